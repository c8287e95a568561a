//! Seeded synthetic inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform `[0, 1)` matrix, row-major.
pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.random::<f64>()).collect()
}

/// Product of two row-major matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..k {
            let av = a[i * k + j];
            for t in 0..m {
                out[i * m + t] += av * b[j * m + t];
            }
        }
    }
    out
}

/// ReLU of a standard Gaussian vector, resampled until it has positive norm;
/// mimics a post-activation feature prototype (about half the entries zero).
pub fn relu_prototype(rng: &mut ChaCha8Rng, channels: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..channels)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z.max(0.0)
            })
            .collect();
        if v.iter().any(|&x| x > 0.0) {
            return v;
        }
    }
}

/// A spatial mosaic of prototype feature vectors.
pub struct Mosaic {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    /// `rows x cols x channels`, row-major, non-negative.
    pub data: Vec<f32>,
    /// Which prototype generated each pixel.
    pub labels: Vec<u32>,
    /// `p x channels`, row-major.
    pub prototypes: Vec<f32>,
}

/// Block layout used for `p` prototypes: `(block_rows, block_cols)`.
pub fn block_layout(p: usize) -> (usize, usize) {
    let mut br = (p as f64).sqrt() as usize;
    while !p.is_multiple_of(br) {
        br -= 1;
    }
    (br, p / br)
}

/// Builds a `rows x cols` grid tiled by `p` rectangular blocks, block `b`
/// filled with prototype `b`. Each pixel gets Gaussian noise whose norm is
/// `noise` times the prototype norm, then is clamped at zero.
pub fn mosaic(rng: &mut ChaCha8Rng, p: usize, rows: usize, cols: usize, channels: usize, noise: f64) -> Mosaic {
    let prototypes: Vec<Vec<f64>> = (0..p).map(|_| relu_prototype(rng, channels)).collect();
    mosaic_from(rng, &prototypes, rows, cols, noise)
}

pub fn mosaic_from(rng: &mut ChaCha8Rng, prototypes: &[Vec<f64>], rows: usize, cols: usize, noise: f64) -> Mosaic {
    let p = prototypes.len();
    let channels = prototypes[0].len();
    let (br, bc) = block_layout(p);
    let mut data = Vec::with_capacity(rows * cols * channels);
    let mut labels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let block = (r * br / rows) * bc + c * bc / cols;
            labels.push(block as u32);
            let proto = &prototypes[block];
            let norm = proto.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dir: Vec<f64> = (0..channels).map(|_| StandardNormal.sample(rng)).collect();
            let dir_norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for t in 0..channels {
                let v = proto[t] + noise * norm * dir[t] / dir_norm;
                data.push(v.max(0.0) as f32);
            }
        }
    }
    Mosaic { rows, cols, channels, data, labels, prototypes: prototypes.iter().flatten().map(|&v| v as f32).collect() }
}
