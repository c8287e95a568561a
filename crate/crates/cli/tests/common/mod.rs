//! Fixture writers shared by the CLI tests and the acceptance suite.
#![allow(dead_code)]

use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fseg_core::tensor_io::{write_fst, FeatureTensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fseg<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_fseg")).args(args).output().expect("spawning fseg")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write_tensor(path: &Path, rows: usize, cols: usize, channels: usize, data: Vec<f32>) {
    write_fst(path, &FeatureTensor::new(rows, cols, channels, data).unwrap()).unwrap();
}

pub fn write_gt(path: &Path, rows: usize, cols: usize, codes: Vec<u8>) {
    image::GrayImage::from_raw(cols as u32, rows as u32, codes).unwrap().save(path).unwrap();
}

/// Writes an identity palette `i -> i` for `n` categories.
pub fn write_palette(path: &Path, n: u8) {
    let text: String = (0..n).map(|i| format!("{i} {i}\n")).collect();
    fs::write(path, text).unwrap();
}

pub fn subdir(root: &Path, name: &str) -> PathBuf {
    let dir = root.join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Prototype `g` of a corpus with `n` categories: strictly positive on its
/// own band of `band` channels, near zero elsewhere.
pub fn banded_prototype(rng: &mut ChaCha8Rng, g: usize, n: usize, band: usize) -> Vec<f32> {
    (0..n * band)
        .map(|c| if c / band == g { rng.random_range(0.5..1.5) } else { rng.random_range(0.0..0.02) })
        .collect()
}

/// A tile split into vertical stripes, stripe `s` carrying category
/// `order[s]`. Returns the feature data and per-pixel categories.
pub fn striped_tile(
    rng: &mut ChaCha8Rng,
    prototypes: &[Vec<f32>],
    order: &[usize],
    rows: usize,
    cols: usize,
    noise: f32,
) -> (Vec<f32>, Vec<u8>) {
    let mut data = Vec::new();
    let mut cats = Vec::new();
    for _ in 0..rows {
        for c in 0..cols {
            let g = order[c * order.len() / cols];
            cats.push(g as u8);
            data.extend(prototypes[g].iter().map(|&v| (v * (1.0 + noise * rng.random_range(-1.0..1.0))).max(0.0)));
        }
    }
    (data, cats)
}

/// Upsamples a row-major grid by an integer factor.
pub fn upsample<T: Copy>(grid: &[T], rows: usize, cols: usize, factor: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(grid.len() * factor * factor);
    for r in 0..rows * factor {
        for c in 0..cols * factor {
            out.push(grid[(r / factor) * cols + c / factor]);
        }
    }
    out
}

/// Writes a corpus of `tiles` striped tiles whose categories are linearly
/// separable in feature space, with ground truth at twice the grid size.
pub fn separable_corpus(root: &Path, rng: &mut ChaCha8Rng, tiles: usize, n: usize) -> (PathBuf, PathBuf, PathBuf) {
    let (features, gt) = (subdir(root, "features"), subdir(root, "gt"));
    let palette = root.join("palette.txt");
    write_palette(&palette, n as u8);
    let (rows, cols, band) = (8, 8, 4);
    let prototypes: Vec<Vec<f32>> = (0..n).map(|g| banded_prototype(rng, g, n, band)).collect();
    for t in 0..tiles {
        let order: Vec<usize> = (0..n).map(|s| (s + t) % n).collect();
        let (data, cats) = striped_tile(rng, &prototypes, &order, rows, cols, 0.02);
        write_tensor(&features.join(format!("tile_{t:02}.fst")), rows, cols, n * band, data);
        write_gt(&gt.join(format!("tile_{t:02}.png")), 2 * rows, 2 * cols, upsample(&cats, rows, cols, 2));
    }
    (features, gt, palette)
}

/// Every regular file under `dir`, relative and sorted.
pub fn tree(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}
