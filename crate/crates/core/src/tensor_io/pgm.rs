use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::LabelMask;
use crate::error::{Error, Result};

/// Sidecar listing label-to-gray-value pairs: `mask.pgm` -> `mask.pgm.labels.txt`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels.txt");
    PathBuf::from(s)
}

fn gray_value(label: u32, n_labels: u32, scale: bool) -> u32 {
    if !scale {
        return label;
    }
    if label >= n_labels {
        return 255;
    }
    if n_labels == 1 {
        return 0;
    }
    // Rounded linear stretch of 0..n_labels-1 onto 0..255.
    (label * 255 * 2 + (n_labels - 1)) / (2 * (n_labels - 1))
}

/// Writes a binary P5 PGM (maxval 255). With `scale`, labels are stretched
/// linearly onto 0..=255 and ignored pixels are drawn at 255; otherwise the
/// raw label values are written.
pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &LabelMask, scale: bool) -> Result<()> {
    let path = path.as_ref();
    let n = mask.n_labels();
    if n > 256 {
        return Err(Error::Unsupported(format!("PGM export supports at most 256 labels, mask has {n}")));
    }
    let has_ignore = mask.labels().contains(&n);
    if !scale && has_ignore && n > 255 {
        return Err(Error::Unsupported("ignore label 256 does not fit in an 8-bit PGM".into()));
    }
    let mut bytes = format!("P5\n{} {}\n255\n", mask.cols(), mask.rows()).into_bytes();
    bytes.extend(mask.labels().iter().map(|&l| gray_value(l, n, scale) as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;

    let mut listing = String::from("# label value\n");
    for label in 0..n {
        let _ = writeln!(listing, "{label} {}", gray_value(label, n, scale));
    }
    if has_ignore {
        let _ = writeln!(listing, "ignore {}", gray_value(n, n, scale));
    }
    let side = sidecar_path(path);
    fs::write(&side, listing).map_err(|e| Error::io(side, e))
}
