//! Brute-force and textbook reference computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `A x = b` for a small symmetric positive-definite system by Gaussian
/// elimination with partial pivoting. Returns `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (x, &y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * y;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Unconstrained least squares restricted to the columns in `passive`,
/// via the normal equations. `m` is `rows x cols`, row-major.
fn lstsq_subset(m: &[f64], rows: usize, cols: usize, b: &[f64], passive: &[usize]) -> Vec<f64> {
    let p = passive.len();
    let mut gram = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (a, &ja) in passive.iter().enumerate() {
        for (bb, &jb) in passive.iter().enumerate() {
            gram[a][bb] = (0..rows).map(|r| m[r * cols + ja] * m[r * cols + jb]).sum();
        }
        rhs[a] = (0..rows).map(|r| m[r * cols + ja] * b[r]).sum();
    }
    let sol = solve_dense(gram, rhs).expect("singular passive set in NNLS oracle");
    let mut out = vec![0.0; cols];
    for (a, &j) in passive.iter().enumerate() {
        out[j] = sol[a];
    }
    out
}

/// Lawson–Hanson active-set non-negative least squares:
/// `argmin_{x >= 0} ||M x - b||` with `M` given as `rows x cols`, row-major.
pub fn nnls_active_set(m: &[f64], rows: usize, cols: usize, b: &[f64]) -> Vec<f64> {
    assert_eq!(m.len(), rows * cols);
    assert_eq!(b.len(), rows);
    let tol = 1e-12;
    let mut x = vec![0.0; cols];
    let mut passive: Vec<usize> = Vec::new();
    let dual = |x: &[f64]| -> Vec<f64> {
        let resid: Vec<f64> =
            (0..rows).map(|r| b[r] - (0..cols).map(|c| m[r * cols + c] * x[c]).sum::<f64>()).collect();
        (0..cols).map(|c| (0..rows).map(|r| m[r * cols + c] * resid[r]).sum()).collect()
    };
    for _outer in 0..(3 * cols + 10) {
        let w = dual(&x);
        let candidate = (0..cols).filter(|j| !passive.contains(j)).max_by(|&a, &bb| w[a].total_cmp(&w[bb]));
        let Some(j) = candidate else { break };
        if w[j] <= tol {
            break;
        }
        passive.push(j);
        loop {
            let s = lstsq_subset(m, rows, cols, b, &passive);
            if passive.iter().all(|&i| s[i] > tol) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &i in &passive {
                if s[i] <= tol {
                    alpha = alpha.min(x[i] / (x[i] - s[i]));
                }
            }
            for (xi, &si) in x.iter_mut().zip(&s) {
                *xi += alpha * (si - *xi);
            }
            passive.retain(|&i| x[i] > tol);
            for (i, xi) in x.iter_mut().enumerate() {
                if !passive.contains(&i) {
                    *xi = 0.0;
                }
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    x
}

/// `||M x - b||^2`.
pub fn lsq_objective(m: &[f64], rows: usize, cols: usize, x: &[f64], b: &[f64]) -> f64 {
    (0..rows)
        .map(|r| {
            let v: f64 = (0..cols).map(|c| m[r * cols + c] * x[c]).sum();
            (v - b[r]).powi(2)
        })
        .sum()
}

/// Optimal fixed-H objective `min_{W >= 0} ||A - W H||_F^2`, solved one row of
/// `A` at a time. `a` is `n x c`, `h` is `k x c`, both row-major.
pub fn fixed_h_optimum(a: &[f64], n: usize, c: usize, h: &[f64], k: usize) -> (Vec<f64>, f64) {
    // Row problem: min ||H^T w - a_i||, with H^T laid out c x k.
    let mut ht = vec![0.0; c * k];
    for j in 0..k {
        for ch in 0..c {
            ht[ch * k + j] = h[j * c + ch];
        }
    }
    let mut w = vec![0.0; n * k];
    let mut total = 0.0;
    for i in 0..n {
        let row = &a[i * c..(i + 1) * c];
        let x = nnls_active_set(&ht, c, k, row);
        total += lsq_objective(&ht, c, k, &x, row);
        w[i * k..(i + 1) * k].copy_from_slice(&x);
    }
    (w, total)
}

/// Sum of squared distances of each point to the exact mean of its cluster.
/// Empty clusters contribute nothing. `points` is `n x d`, row-major.
pub fn partition_inertia(points: &[f64], d: usize, labels: &[usize], k: usize) -> f64 {
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k * d];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for t in 0..d {
            sums[l * d + t] += points[i * d + t];
        }
    }
    let mut inertia = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        for t in 0..d {
            let mean = sums[l * d + t] / counts[l] as f64;
            inertia += (points[i * d + t] - mean).powi(2);
        }
    }
    inertia
}

/// Global k-means optimum by enumerating every assignment of `n` points to
/// `k` non-empty clusters. `points` is `n x d`, row-major.
pub fn exhaustive_kmeans(points: &[f64], n: usize, d: usize, k: usize) -> f64 {
    assert!(n >= k && k >= 1);
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for code in 0..k.pow(n as u32) {
        let mut rest = code;
        for l in labels.iter_mut() {
            *l = rest % k;
            rest /= k;
        }
        if (0..k).all(|c| labels.contains(&c)) {
            best = best.min(partition_inertia(points, d, &labels, k));
        }
    }
    best
}

/// Best Frobenius error found by sampling `restarts` random non-negative
/// rank-`k` factor pairs, each rescaled by its optimal scalar.
pub fn random_search_nmf(a: &[f64], n: usize, c: usize, k: usize, restarts: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm_a2: f64 = a.iter().map(|v| v * v).sum();
    let mut best = norm_a2.sqrt();
    for _ in 0..restarts {
        let w: Vec<f64> = (0..n * k).map(|_| rng.random::<f64>()).collect();
        let h: Vec<f64> = (0..k * c).map(|_| rng.random::<f64>()).collect();
        let mut wh = vec![0.0; n * c];
        for i in 0..n {
            for j in 0..k {
                for ch in 0..c {
                    wh[i * c + ch] += w[i * k + j] * h[j * c + ch];
                }
            }
        }
        let dot: f64 = a.iter().zip(&wh).map(|(x, y)| x * y).sum();
        let nn: f64 = wh.iter().map(|v| v * v).sum();
        let alpha = if nn > 0.0 { (dot / nn).max(0.0) } else { 0.0 };
        let err: f64 = a.iter().zip(&wh).map(|(x, y)| (x - alpha * y).powi(2)).sum::<f64>().sqrt();
        best = best.min(err);
    }
    best
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `(precision, recall, f1)`; `None` marks an undefined value.
pub type ClassScores = (Option<f64>, Option<f64>, Option<f64>);

/// Per-class scores recomputed pixel by pixel, skipping pixels whose ground
/// truth equals `ignore`.
pub fn brute_force_f1(pred: &[u32], gt: &[u32], n_classes: u32, ignore: u32) -> Vec<ClassScores> {
    (0..n_classes)
        .map(|class| {
            let mut tp = 0u64;
            let mut fp = 0u64;
            let mut fn_ = 0u64;
            for (&p, &g) in pred.iter().zip(gt) {
                if g == ignore {
                    continue;
                }
                match (p == class, g == class) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
            let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
            let f1 = if tp + fp + fn_ == 0 { None } else { Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64) };
            (precision, recall, f1)
        })
        .collect()
}

/// Softmax cross-entropy (mean over examples) plus `reg * ||W||^2`, written
/// from scratch for gradient checks. `params` holds the `n_classes x d`
/// weights row-major followed by `n_classes` biases.
pub fn softmax_objective(
    params: &[f64],
    features: &[f64],
    labels: &[usize],
    d: usize,
    n_classes: usize,
    reg: f64,
) -> f64 {
    let n = labels.len();
    let (w, b) = params.split_at(n_classes * d);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let x = &features[i * d..(i + 1) * d];
        let logits: Vec<f64> =
            (0..n_classes).map(|c| b[c] + (0..d).map(|t| w[c * d + t] * x[t]).sum::<f64>()).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        loss += lse - logits[y];
    }
    loss / n as f64 + reg * w.iter().map(|v| v * v).sum::<f64>()
}
