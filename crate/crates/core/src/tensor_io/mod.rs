//! Containers for feature tensors, matrices and label masks, and their
//! on-disk representations.

mod fst;
mod ground_truth;
mod pgm;

pub use fst::{decode_fst, encode_fst, read_fst, read_fst_header, write_fst, Fst, FstHeader, FstRef};
pub use ground_truth::{read_gt_mask, Palette};
pub use pgm::{sidecar_path, write_mask_pgm};

use crate::error::{Error, Result};

/// Non-negative spatial activation grid, stored row-major as
/// `(row, col, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    /// Fails if a dimension is zero, the length is wrong, or any element is
    /// negative or NaN.
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "feature tensor dims must be positive, got {rows}x{cols}x{channels}"
            )));
        }
        let expected = rows
            .checked_mul(cols)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Dimension("feature tensor size overflows".into()))?;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "feature tensor {rows}x{cols}x{channels} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Input(format!("feature tensor value {} at index {pos} is not non-negative", data[pos])));
        }
        Ok(Self { rows, cols, channels, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.cols + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// The `(rows*cols) x channels` matrix view used for factorization.
    pub fn as_matrix(&self) -> MatrixView<'_> {
        MatrixView { n_rows: self.rows * self.cols, n_cols: self.channels, data: &self.data }
    }
}

/// Row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f32>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Dimension(format!("matrix dims must be positive, got {n_rows}x{n_cols}")));
        }
        let expected = n_rows.checked_mul(n_cols).ok_or_else(|| Error::Dimension("matrix size overflows".into()))?;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "matrix {n_rows}x{n_cols} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Result<Self> {
        Self::new(n_rows, n_cols, vec![0.0; n_rows * n_cols])
    }

    /// Stacks equally long rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::Dimension(format!("row {i} has {} columns, expected {n_cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn view(&self) -> MatrixView<'_> {
        MatrixView { n_rows: self.n_rows, n_cols: self.n_cols, data: &self.data }
    }
}

/// Borrowed row-major matrix; how factorization sees both flattened feature
/// tensors and plain matrices.
#[derive(Debug, Clone, Copy)]
pub struct MatrixView<'a> {
    n_rows: usize,
    n_cols: usize,
    data: &'a [f32],
}

impl<'a> MatrixView<'a> {
    pub fn new(n_rows: usize, n_cols: usize, data: &'a [f32]) -> Result<Self> {
        if n_rows.checked_mul(n_cols) != Some(data.len()) || n_rows == 0 || n_cols == 0 {
            return Err(Error::Dimension(format!("view {n_rows}x{n_cols} does not match {} values", data.len())));
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &'a [f32] {
        self.data
    }

    pub fn row(&self, row: usize) -> &'a [f32] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn to_owned(&self) -> DenseMatrix {
        DenseMatrix { n_rows: self.n_rows, n_cols: self.n_cols, data: self.data.to_vec() }
    }
}

/// Integer label grid.
///
/// Valid labels are `0..n_labels`. The value `n_labels` itself is reserved as
/// the ignore label (pixels without a usable ground-truth category) and is
/// skipped by every metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    rows: usize,
    cols: usize,
    n_labels: u32,
    labels: Vec<u32>,
}

impl LabelMask {
    pub fn new(rows: usize, cols: usize, n_labels: u32, labels: Vec<u32>) -> Result<Self> {
        if rows == 0 || cols == 0 || n_labels == 0 {
            return Err(Error::Dimension(format!(
                "label mask needs positive dims and n_labels, got {rows}x{cols}, n_labels={n_labels}"
            )));
        }
        if rows.checked_mul(cols) != Some(labels.len()) {
            return Err(Error::Dimension(format!("label mask {rows}x{cols} does not match {} labels", labels.len())));
        }
        if let Some(pos) = labels.iter().position(|&l| l > n_labels) {
            return Err(Error::Input(format!("label {} at index {pos} exceeds n_labels={n_labels}", labels[pos])));
        }
        Ok(Self { rows, cols, n_labels, labels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn n_labels(&self) -> u32 {
        self.n_labels
    }

    pub fn ignore_label(&self) -> u32 {
        self.n_labels
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.cols + col]
    }

    pub fn is_ignored(&self, index: usize) -> bool {
        self.labels[index] == self.n_labels
    }

    /// Pixel count per label; the final entry counts ignored pixels, so the
    /// histogram always sums to `rows * cols`.
    pub fn histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_labels as usize + 1];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}
