//! Input discovery and stem pairing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::manifest::Failure;

const IMAGE_EXTENSIONS: &[&str] = &["png", "tif", "tiff", "bmp", "pgm", "pnm"];

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            entries.push(path);
        }
    }
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// A single FST file, or every `*.fst` file in a directory, sorted.
pub fn fst_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let files: Vec<PathBuf> = list_dir(path)?.into_iter().filter(|p| file_name(p).ends_with(".fst")).collect();
    if files.is_empty() {
        bail!("no .fst files in {}", path.display());
    }
    Ok(files)
}

/// File name without the given suffix.
pub fn stem(path: &Path, suffix: &str) -> String {
    let name = file_name(path);
    name.strip_suffix(suffix).map(str::to_string).unwrap_or(name)
}

/// Predicted label masks keyed by stem. Segmentation outputs
/// (`<stem>.mask.fst`) take precedence over other FST files.
pub fn prediction_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let fst = fst_inputs(dir)?;
    let masks: Vec<&PathBuf> = fst.iter().filter(|p| file_name(p).ends_with(".mask.fst")).collect();
    Ok(if masks.is_empty() {
        fst.iter().map(|p| (stem(p, ".fst"), p.clone())).collect()
    } else {
        masks.into_iter().map(|p| (stem(p, ".mask.fst"), p.clone())).collect()
    })
}

/// Ground-truth images keyed by file stem. Several images sharing a stem
/// are reported as failures.
pub fn ground_truth_files(dir: &Path) -> Result<(BTreeMap<String, PathBuf>, Vec<Failure>)> {
    let mut found: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    for path in list_dir(dir)? {
        let ext = path.extension().map(|e| e.to_string_lossy().to_lowercase()).unwrap_or_default();
        if IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            let s = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            found.entry(s).or_default().push(path);
        }
    }
    if found.is_empty() {
        bail!("no ground-truth images in {}", dir.display());
    }
    let mut unique = BTreeMap::new();
    let mut failures = Vec::new();
    for (s, paths) in found {
        if paths.len() == 1 {
            unique.insert(s, paths.into_iter().next().unwrap());
        } else {
            failures.push(Failure::new(s, format!("ambiguous ground truth: {paths:?}")));
        }
    }
    Ok((unique, failures))
}

#[derive(Debug, Clone, Serialize)]
pub struct Pair {
    pub stem: String,
    pub input: PathBuf,
    pub gt: PathBuf,
}

/// Pairs inputs with ground truth by stem, in stem order; anything without
/// a partner becomes a failure.
pub fn pair_by_stem(inputs: BTreeMap<String, PathBuf>, mut gt: BTreeMap<String, PathBuf>) -> (Vec<Pair>, Vec<Failure>) {
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for (s, input) in inputs {
        match gt.remove(&s) {
            Some(g) => pairs.push(Pair { stem: s, input, gt: g }),
            None => failures.push(Failure::new(input.display().to_string(), "no ground-truth file with this stem")),
        }
    }
    for (_, g) in gt {
        failures.push(Failure::new(g.display().to_string(), "no input file with this stem"));
    }
    (pairs, failures)
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
