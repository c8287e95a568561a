//! Ground-truth mask ingestion: 8-bit single-channel images whose pixel
//! values are dataset-specific category codes, remapped through a palette.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use image::DynamicImage;

use super::LabelMask;
use crate::error::{Error, Result};

/// Maps source pixel codes to contiguous category labels `0..n_categories`.
///
/// Codes missing from the palette are mapped to the ignore label
/// (`n_categories`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    map: BTreeMap<u8, u32>,
    n_categories: u32,
}

impl Palette {
    /// Builds a palette from `(source_code, target_label)` pairs.
    ///
    /// Targets must cover `0..n` without gaps. Several source codes may share
    /// a target (dataset classes merged into one category) unless `strict`
    /// is set, in which case such a collision is an error.
    pub fn new(pairs: impl IntoIterator<Item = (u8, u32)>, strict: bool) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut owner: BTreeMap<u32, u8> = BTreeMap::new();
        for (src, dst) in pairs {
            if let Some(prev) = map.insert(src, dst) {
                return Err(Error::Palette(format!("source code {src} listed twice (targets {prev} and {dst})")));
            }
            if let Some(other) = owner.insert(dst, src) {
                if strict {
                    return Err(Error::Palette(format!("source codes {other} and {src} both map to target {dst}")));
                }
            }
        }
        if map.is_empty() {
            return Err(Error::Palette("palette is empty".into()));
        }
        let n_categories = owner.len() as u32;
        if let Some((&max, _)) = owner.iter().next_back() {
            if max + 1 != n_categories {
                let missing: Vec<u32> = (0..=max).filter(|t| !owner.contains_key(t)).collect();
                return Err(Error::Palette(format!("target labels are not contiguous; missing {missing:?}")));
            }
        }
        Ok(Self { map, n_categories })
    }

    /// Parses `source_code target_label` lines; `#` starts a comment.
    pub fn parse(text: &str, strict: bool) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [a, b] => a.parse::<u8>().ok().zip(b.parse::<u32>().ok()),
                _ => None,
            };
            let pair = parsed.ok_or_else(|| {
                Error::Palette(format!("line {}: expected `source_code target_label`, got {line:?}", lineno + 1))
            })?;
            pairs.push(pair);
        }
        Self::new(pairs, strict)
    }

    pub fn from_file(path: impl AsRef<Path>, strict: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, strict)
    }

    pub fn n_categories(&self) -> u32 {
        self.n_categories
    }

    pub fn ignore_label(&self) -> u32 {
        self.n_categories
    }

    pub fn map_code(&self, code: u8) -> u32 {
        self.map.get(&code).copied().unwrap_or(self.n_categories)
    }

    /// Remaps a row-major buffer of raw codes.
    pub fn apply(&self, rows: usize, cols: usize, codes: &[u8]) -> Result<LabelMask> {
        let labels = codes.iter().map(|&c| self.map_code(c)).collect();
        LabelMask::new(rows, cols, self.n_categories, labels)
    }
}

/// Reads a single-channel mask image and remaps its codes.
///
/// 8-bit grayscale images of any supported format are accepted, as are
/// palette-indexed PNGs, whose raw palette indices are used as codes.
pub fn read_gt_mask(path: impl AsRef<Path>, palette: &Palette) -> Result<LabelMask> {
    let path = path.as_ref();
    if let Some((rows, cols, codes)) = read_indexed_png(path)? {
        return palette.apply(rows, cols, &codes);
    }
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Image { path: path.to_path_buf(), msg: e.to_string() })?;
    let DynamicImage::ImageLuma8(gray) = img else {
        return Err(Error::Image {
            path: path.to_path_buf(),
            msg: format!("expected an 8-bit single-channel mask, found {:?}", img.color()),
        });
    };
    let (w, h) = gray.dimensions();
    palette.apply(h as usize, w as usize, gray.as_raw())
}

/// Raw palette indices of an indexed PNG; `None` for any other file.
fn read_indexed_png(path: &Path) -> Result<Option<(usize, usize, Vec<u8>)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let image_err = |e: png::DecodingError| Error::Image { path: path.to_path_buf(), msg: e.to_string() };
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = match decoder.read_info() {
        Ok(r) if r.info().color_type == png::ColorType::Indexed => r,
        _ => return Ok(None),
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Image { path: path.to_path_buf(), msg: "image too large".into() })?;
    let mut buf = vec![0u8; size];
    let out = reader.next_frame(&mut buf).map_err(image_err)?;
    let (w, h) = (out.width as usize, out.height as usize);
    let bits = out.bit_depth as usize;
    let per_byte = 8 / bits;
    let mask = ((1u16 << bits) - 1) as u8;
    let mut codes = Vec::with_capacity(w * h);
    for line in buf.chunks(out.line_size).take(h) {
        codes.extend((0..w).map(|x| {
            let shift = 8 - bits * (x % per_byte + 1);
            (line[x / per_byte] >> shift) & mask
        }));
    }
    Ok(Some((h, w, codes)))
}
