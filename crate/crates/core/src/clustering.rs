//! Global average pooling and the k-means concept vocabulary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::tensor_io::{read_fst, write_fst, DenseMatrix, FeatureTensor, LabelMask};

/// k-means centers over pooled features plus free-form provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    centers: DenseMatrix,
    meta: BTreeMap<String, String>,
}

impl ClusterModel {
    /// Centers must be finite, non-negative, and have no all-zero row.
    pub fn new(centers: DenseMatrix, meta: BTreeMap<String, String>) -> Result<Self> {
        if centers.data().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Input("cluster centers must be finite and non-negative".into()));
        }
        if let Some(row) = centers.rows().position(|r| r.iter().all(|&v| v == 0.0)) {
            return Err(Error::DegenerateCenter { row });
        }
        Ok(Self { centers, meta })
    }

    pub fn k(&self) -> usize {
        self.centers.n_rows()
    }

    pub fn channels(&self) -> usize {
        self.centers.n_cols()
    }

    pub fn centers(&self) -> &DenseMatrix {
        &self.centers
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn insert_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    /// `<prefix>.fst` and `<prefix>.meta.json`; a trailing `.fst` on the
    /// prefix is ignored.
    pub fn paths(prefix: impl AsRef<Path>) -> (PathBuf, PathBuf) {
        let prefix = prefix.as_ref();
        let base = match prefix.to_str() {
            Some(s) if s.ends_with(".fst") => PathBuf::from(&s[..s.len() - 4]),
            _ => prefix.to_path_buf(),
        };
        let with = |suffix: &str| {
            let mut s = base.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        (with(".fst"), with(".meta.json"))
    }

    pub fn save(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let (fst_path, meta_path) = Self::paths(prefix);
        write_fst(&fst_path, &self.centers)?;
        let mut json = serde_json::to_string_pretty(&self.meta).expect("string map serializes");
        json.push('\n');
        fs::write(&meta_path, json).map_err(|e| Error::io(meta_path, e))
    }

    /// Loads the centers; a missing metadata sidecar yields empty metadata.
    pub fn load(prefix: impl AsRef<Path>) -> Result<Self> {
        let (fst_path, meta_path) = Self::paths(prefix);
        let centers = read_fst(&fst_path)?.into_matrix()?;
        let meta = match fs::read_to_string(&meta_path) {
            Ok(text) => {
                serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", meta_path.display())))?
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(Error::io(meta_path, e)),
        };
        Self::new(centers, meta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Relative inertia change below which Lloyd iterations stop.
    pub tol: f64,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub n_init: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iters: 300, tol: 1e-4, n_init: 4 }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Input(format!("k must be at least 2, got {}", self.k)));
        }
        if self.n_init == 0 || self.max_iters == 0 {
            return Err(Error::Input("n_init and max_iters must be positive".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Input(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub model: ClusterModel,
    /// Sum of squared distances to the nearest center.
    pub inertia: f64,
    /// Final assignment, in input order.
    pub labels: Vec<u32>,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub n_iters: usize,
}

/// Per-channel mean over all spatial positions.
pub fn gap_pool(tensor: &FeatureTensor) -> Vec<f32> {
    let c = tensor.channels();
    let mut sums = vec![0.0f64; c];
    for px in tensor.data().chunks_exact(c) {
        for (s, &v) in sums.iter_mut().zip(px) {
            *s += v as f64;
        }
    }
    let n = (tensor.rows() * tensor.cols()) as f64;
    sums.into_iter().map(|s| (s / n) as f32).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center by squared distance; ties go to the lowest index.
fn nearest(point: &[f64], centers: &Mat) -> (usize, f64) {
    let mut best = (0, sq_dist(point, centers.row(0)));
    for j in 1..centers.rows {
        let d = sq_dist(point, centers.row(j));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &Mat, centers: &Mat) -> (Vec<usize>, Vec<f64>) {
    (0..points.rows).map(|i| nearest(points.row(i), centers)).unzip()
}

fn plus_plus(points: &Mat, k: usize, rng: &mut ChaCha8Rng) -> Mat {
    let n = points.rows;
    let mut centers = Mat::zeros(k, points.cols);
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), centers.row(0))).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(j).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(j)));
        }
    }
    centers
}

/// Moves the farthest point of some multi-member cluster into each empty
/// cluster, so no center is lost.
fn repair_empty(labels: &mut [usize], dists: &mut [f64], k: usize) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        if let Some(p) = donor {
            counts[labels[p]] -= 1;
            labels[p] = empty;
            counts[empty] = 1;
            dists[p] = 0.0;
        }
    }
}

fn exact_means(points: &Mat, labels: &[usize], k: usize) -> (Mat, Vec<usize>) {
    let mut sums = Mat::zeros(k, points.cols);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, &v) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        if n > 0 {
            sums.row_mut(j).iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    (sums, counts)
}

/// Cluster means, rounded through `f32` so the stored model reproduces the
/// final assignment exactly.
fn means(points: &Mat, labels: &[usize], k: usize) -> Mat {
    let (mut m, _) = exact_means(points, labels, k);
    m.round_f32();
    m
}

/// Hartigan single-point transfers: moves a point to another cluster
/// whenever that strictly lowers the inertia of the partition. Lloyd fixed
/// points can still be improved this way. Returns whether anything moved.
#[allow(clippy::needless_range_loop)]
fn transfer_points(points: &Mat, labels: &mut [usize], k: usize, max_passes: usize) -> bool {
    let (mut centroids, mut counts) = exact_means(points, labels, k);
    let mut moved = false;
    for _ in 0..max_passes {
        let mut pass_moved = false;
        for i in 0..points.rows {
            let from = labels[i];
            if counts[from] < 2 {
                continue;
            }
            let x = points.row(i);
            let nf = counts[from] as f64;
            let leave = nf / (nf - 1.0) * sq_dist(x, centroids.row(from));
            let mut best: Option<(usize, f64)> = None;
            for to in (0..k).filter(|&j| j != from) {
                let nt = counts[to] as f64;
                let join = nt / (nt + 1.0) * sq_dist(x, centroids.row(to));
                if best.is_none_or(|(_, b)| join < b) {
                    best = Some((to, join));
                }
            }
            let Some((to, join)) = best else { continue };
            if join >= leave * (1.0 - 1e-12) {
                continue;
            }
            let nt = counts[to] as f64;
            for (c, &v) in centroids.row_mut(from).iter_mut().zip(x) {
                *c = (nf * *c - v) / (nf - 1.0);
            }
            for (c, &v) in centroids.row_mut(to).iter_mut().zip(x) {
                *c = (nt * *c + v) / (nt + 1.0);
            }
            counts[from] -= 1;
            counts[to] += 1;
            labels[i] = to;
            pass_moved = true;
        }
        if !pass_moved {
            break;
        }
        moved = true;
    }
    moved
}

struct Run {
    centers: Mat,
    labels: Vec<usize>,
    inertia: f64,
    trace: Vec<f64>,
}

fn lloyd(points: &Mat, mut centers: Mat, cfg: &KMeansConfig) -> Run {
    centers.round_f32();
    let (mut labels, mut dists) = assign(points, &centers);
    let mut inertia: f64 = dists.iter().sum();
    let mut trace = vec![inertia];
    for _ in 0..cfg.max_iters {
        repair_empty(&mut labels, &mut dists, cfg.k);
        centers = means(points, &labels, cfg.k);
        let (new_labels, new_dists) = assign(points, &centers);
        let new_inertia: f64 = new_dists.iter().sum();
        trace.push(new_inertia);
        let mut stable = new_labels == labels || (inertia - new_inertia) <= cfg.tol * inertia;
        labels = new_labels;
        dists = new_dists;
        inertia = new_inertia;
        if stable && transfer_points(points, &mut labels, cfg.k, cfg.max_iters) {
            stable = false;
        }
        if stable {
            break;
        }
    }
    Run { centers, labels, inertia, trace }
}

fn to_points(points: &DenseMatrix) -> Result<Mat> {
    if let Some(pos) = points.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite value at element {pos}")));
    }
    if points.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Input("k-means points must be non-negative".into()));
    }
    Ok(Mat::from_dense(points))
}

/// Runs k-means and returns the model together with fit diagnostics.
///
/// Each restart seeds with k-means++ and alternates Lloyd iterations with
/// Hartigan single-point transfers until neither changes the partition.
/// Points are processed in a canonical (lexicographic) order, so the result
/// does not depend on the order in which they are supplied.
pub fn kmeans_fit_detailed(points: &DenseMatrix, cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate()?;
    let n = points.n_rows();
    if n < cfg.k {
        return Err(Error::InsufficientData(format!("{n} points for k = {}", cfg.k)));
    }
    let raw = to_points(points)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw.row(a)
            .iter()
            .zip(raw.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut sorted = Mat::zeros(n, raw.cols);
    for (dst, &src) in order.iter().enumerate() {
        sorted.row_mut(dst).copy_from_slice(raw.row(src));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Run> = None;
    for _ in 0..cfg.n_init {
        let init = plus_plus(&sorted, cfg.k, &mut rng);
        let run = lloyd(&sorted, init, cfg);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("n_init >= 1");

    let mut labels = vec![0u32; n];
    for (pos, &src) in order.iter().enumerate() {
        labels[src] = best.labels[pos] as u32;
    }
    let mut meta = BTreeMap::new();
    meta.insert("k".into(), cfg.k.to_string());
    meta.insert("n_points".into(), n.to_string());
    meta.insert("seed".into(), cfg.seed.to_string());
    meta.insert("inertia".into(), best.inertia.to_string());
    let model = ClusterModel::new(best.centers.to_dense(), meta)?;
    Ok(KMeansFit { model, inertia: best.inertia, labels, n_iters: best.trace.len() - 1, inertia_trace: best.trace })
}

pub fn kmeans_fit(points: &DenseMatrix, cfg: &KMeansConfig) -> Result<ClusterModel> {
    kmeans_fit_detailed(points, cfg).map(|f| f.model)
}

/// Nearest-center label for each point, as a single-row mask with
/// `n_labels = k`.
pub fn kmeans_assign(points: &DenseMatrix, model: &ClusterModel) -> Result<LabelMask> {
    if points.n_cols() != model.channels() {
        return Err(Error::Dimension(format!(
            "points have {} channels, model has {}",
            points.n_cols(),
            model.channels()
        )));
    }
    let p = to_points(points)?;
    let centers = Mat::from_dense(model.centers());
    let (labels, _) = assign(&p, &centers);
    LabelMask::new(1, points.n_rows(), model.k() as u32, labels.into_iter().map(|l| l as u32).collect())
}
