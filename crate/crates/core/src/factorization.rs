//! Non-negative matrix factorization of flattened feature tensors.
//!
//! Both solvers minimize the Frobenius objective `||A - W H||_F^2` by block
//! coordinate descent: each sweep updates `H` with `W` fixed, then `W` with
//! `H` fixed (the fixed-`H` variant only runs the second half). Rows of `W`
//! (and columns of `H`) are independent within a block, so each block update
//! is a batch of tiny non-negative quadratic problems over the `k` concept
//! weights of one pixel (or one channel).
//!
//! Two block solvers are available:
//! - [`NmfSolver::Hals`] (default): exact minimization over one coordinate at
//!   a time, clamped at zero. `epsilon` in the denominator only shortens the
//!   step, so every pass is a descent step.
//! - [`NmfSolver::Multiplicative`]: the Lee–Seung multiplicative rule
//!   `X <- X * C / (X G + epsilon)`.
//!
//! Each block runs `inner_iters` passes per sweep; the cross products
//! `A^T W` and `A H^T` are shared by all passes of a block.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, gram, mul, mul_tn, Mat};
use crate::tensor_io::{DenseMatrix, MatrixView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmfSolver {
    #[default]
    Hals,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfConfig {
    /// Maximum number of full sweeps.
    pub max_iters: usize,
    /// Stop once the relative objective change between sweeps drops below this.
    pub tol: f64,
    pub seed: u64,
    /// Added to every update denominator.
    pub epsilon: f64,
    /// Passes over each block per sweep.
    pub inner_iters: usize,
    pub solver: NmfSolver,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self { max_iters: 200, tol: 1e-4, seed: 0, epsilon: 1e-9, inner_iters: 5, solver: NmfSolver::Hals }
    }
}

impl NmfConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Input("max_iters must be positive".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Input(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Input(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.inner_iters == 0 {
            return Err(Error::Input("inner_iters must be positive".into()));
        }
        Ok(())
    }
}

/// `A ≈ W H` with `W: (rows*cols) x k_c` and `H: k_c x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    /// Per-pixel concept contributions.
    pub w: DenseMatrix,
    /// Concept feature vectors, one per row.
    pub h: DenseMatrix,
    pub k_c: usize,
    /// `||A - W H||_F` recomputed from the returned `f32` factors.
    pub final_error: f64,
    /// Sweeps performed.
    pub n_iters: usize,
    /// Squared objective at initialization followed by its value after each
    /// sweep; length `n_iters + 1`.
    pub objective_trace: Vec<f64>,
}

fn check_input(a: MatrixView<'_>) -> Result<()> {
    if let Some(pos) = a.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite value {} at element {pos}", a.data()[pos])));
    }
    if let Some(pos) = a.data().iter().position(|&v| v < 0.0) {
        return Err(Error::Input(format!("negative value {} at element {pos}", a.data()[pos])));
    }
    Ok(())
}

/// `|N(0,1)| * mean(A) / k` entries.
fn random_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z.abs() * scale
        })
        .collect();
    Mat { rows, cols, data }
}

fn init_scale(a: &Mat, k: usize) -> f64 {
    let mean = a.data.iter().sum::<f64>() / a.data.len() as f64;
    mean / k as f64
}

/// One block update of `x (m x k)` against `cross = A-side product (m x k)`
/// and `g = other factor's Gram matrix (k x k)`.
fn update_block(x: &mut Mat, cross: &Mat, g: &Mat, cfg: &NmfConfig) {
    let k = x.cols;
    let eps = cfg.epsilon;
    let mut xg = vec![0.0; k];
    for i in 0..x.rows {
        let c = cross.row(i);
        let row = x.row_mut(i);
        for _ in 0..cfg.inner_iters {
            match cfg.solver {
                NmfSolver::Hals => {
                    for j in 0..k {
                        let gj = g.row(j);
                        let s: f64 = row.iter().zip(gj).map(|(a, b)| a * b).sum();
                        row[j] = (row[j] + (c[j] - s) / (gj[j] + eps)).max(0.0);
                    }
                }
                NmfSolver::Multiplicative => {
                    for (j, out) in xg.iter_mut().enumerate() {
                        *out = row.iter().zip(g.row(j)).map(|(a, b)| a * b).sum();
                    }
                    for j in 0..k {
                        row[j] *= c[j] / (xg[j] + eps);
                    }
                }
            }
        }
    }
}

/// `||A||^2 - 2 <W, A H^T> + <W^T W, H H^T>`, clamped at zero.
fn objective(norm_a2: f64, w: &Mat, cross_w: &Mat, gram_h: &Mat) -> f64 {
    (norm_a2 - 2.0 * dot(w, cross_w) + dot(&gram(w), gram_h)).max(0.0)
}

fn converged(prev: f64, cur: f64, tol: f64) -> bool {
    cur == 0.0 || (prev - cur).abs() <= tol * prev
}

/// Factorizes `a` into `k_c` concepts.
pub fn nmf_factorize(a: MatrixView<'_>, k_c: usize, cfg: &NmfConfig) -> Result<Factorization> {
    cfg.validate()?;
    let (n, c) = (a.n_rows(), a.n_cols());
    if k_c == 0 || k_c > n.min(c) {
        return Err(Error::Dimension(format!("rank {k_c} must be between 1 and min(pixels, channels) = {}", n.min(c))));
    }
    check_input(a)?;
    let am = Mat::from_view(a);
    let norm_a2 = am.sq_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = init_scale(&am, k_c);
    let mut w = random_factor(&mut rng, n, k_c, scale);
    let mut ht = random_factor(&mut rng, k_c, c, scale).transpose();

    let mut trace = vec![objective(norm_a2, &w, &mul(&am, &ht), &gram(&ht))];
    for _ in 0..cfg.max_iters {
        let cross_h = mul_tn(&am, &w);
        let gram_w = gram(&w);
        update_block(&mut ht, &cross_h, &gram_w, cfg);

        let cross_w = mul(&am, &ht);
        let gram_h = gram(&ht);
        update_block(&mut w, &cross_w, &gram_h, cfg);

        let obj = objective(norm_a2, &w, &cross_w, &gram_h);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        if converged(prev, obj, cfg.tol) {
            break;
        }
    }
    finish(a, w.to_dense(), ht.transpose().to_dense(), k_c, trace)
}

/// Solves `min_{W >= 0} ||A - W H||` with `H` pinned to `h_fixed`.
pub fn nmf_solve_w(a: MatrixView<'_>, h_fixed: &DenseMatrix, cfg: &NmfConfig) -> Result<Factorization> {
    cfg.validate()?;
    let (n, c) = (a.n_rows(), a.n_cols());
    if h_fixed.n_cols() != c {
        return Err(Error::Dimension(format!("fixed H has {} channels but the input has {c}", h_fixed.n_cols())));
    }
    if h_fixed.data().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Input("fixed H must be finite and non-negative".into()));
    }
    if let Some(row) = h_fixed.rows().position(|r| r.iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateCenter { row });
    }
    check_input(a)?;
    let k = h_fixed.n_rows();
    let am = Mat::from_view(a);
    let norm_a2 = am.sq_norm();
    let ht = Mat::from_dense(h_fixed).transpose();
    let cross = mul(&am, &ht);
    let gram_h = gram(&ht);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = random_factor(&mut rng, n, k, init_scale(&am, k));
    let mut trace = vec![objective(norm_a2, &w, &cross, &gram_h)];
    for _ in 0..cfg.max_iters {
        update_block(&mut w, &cross, &gram_h, cfg);
        let obj = objective(norm_a2, &w, &cross, &gram_h);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        if converged(prev, obj, cfg.tol) {
            break;
        }
    }
    finish(a, w.to_dense(), h_fixed.clone(), k, trace)
}

fn finish(a: MatrixView<'_>, w: DenseMatrix, h: DenseMatrix, k_c: usize, trace: Vec<f64>) -> Result<Factorization> {
    let final_error = reconstruction_error(a, &w, &h)?;
    Ok(Factorization { w, h, k_c, final_error, n_iters: trace.len() - 1, objective_trace: trace })
}

/// `||A - W H||_F`, accumulated in `f64`.
pub fn reconstruction_error(a: MatrixView<'_>, w: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
    if w.n_rows() != a.n_rows() || h.n_cols() != a.n_cols() || w.n_cols() != h.n_rows() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, W is {}x{}, H is {}x{}",
            a.n_rows(),
            a.n_cols(),
            w.n_rows(),
            w.n_cols(),
            h.n_rows(),
            h.n_cols()
        )));
    }
    let hm = Mat::from_dense(h);
    let mut total = 0.0;
    let mut approx = vec![0.0f64; a.n_cols()];
    for i in 0..a.n_rows() {
        approx.iter_mut().for_each(|v| *v = 0.0);
        for (j, &wv) in w.row(i).iter().enumerate() {
            let wv = wv as f64;
            for (o, &hv) in approx.iter_mut().zip(hm.row(j)) {
                *o += wv * hv;
            }
        }
        total += a.row(i).iter().zip(&approx).map(|(&x, y)| (x as f64 - y).powi(2)).sum::<f64>();
    }
    Ok(total.sqrt())
}
