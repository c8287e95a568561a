//! Small dense `f64` kernels. Everything runs single-threaded in a fixed
//! loop order so results are bit-reproducible.

use crate::tensor_io::{DenseMatrix, MatrixView};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_view(v: MatrixView<'_>) -> Self {
        Self { rows: v.n_rows(), cols: v.n_cols(), data: v.data().iter().map(|&x| x as f64).collect() }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::from_view(m.view())
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::new(self.rows, self.cols, self.data.iter().map(|&x| x as f32).collect())
            .expect("shape is consistent by construction")
    }

    /// Rounds every entry through `f32`.
    pub fn round_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// `a (n x m) * b (m x k)`.
pub(crate) fn mul(a: &Mat, b: &Mat) -> Mat {
    debug_assert_eq!(a.cols, b.rows);
    let mut out = Mat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (t, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(b.row(t)) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a^T (m x n) * b (n x k)` without materializing the transpose.
pub(crate) fn mul_tn(a: &Mat, b: &Mat) -> Mat {
    debug_assert_eq!(a.rows, b.rows);
    let mut out = Mat::zeros(a.cols, b.cols);
    for i in 0..a.rows {
        let brow = b.row(i);
        for (t, &av) in a.row(i).iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out.data[t * b.cols..(t + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `x^T x`.
pub(crate) fn gram(x: &Mat) -> Mat {
    mul_tn(x, x)
}

/// Frobenius inner product.
pub(crate) fn dot(a: &Mat, b: &Mat) -> f64 {
    debug_assert_eq!(a.data.len(), b.data.len());
    a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
