//! Scoring segmentations against ground truth: frequency-based cluster
//! matching with F1 reporting, and a linear probe over concept features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::factorization::Factorization;
use crate::linalg::argmax;
use crate::tensor_io::{DenseMatrix, LabelMask};

/// Pixel counts indexed by `(predicted, ground truth)`. A square matrix over
/// categories doubles as a confusion matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyMatrix {
    n_clusters: usize,
    n_categories: usize,
    counts: Vec<u64>,
}

impl FrequencyMatrix {
    pub fn new(n_clusters: usize, n_categories: usize) -> Result<Self> {
        if n_clusters == 0 || n_categories == 0 {
            return Err(Error::Dimension(format!(
                "frequency matrix needs positive dims, got {n_clusters}x{n_categories}"
            )));
        }
        Ok(Self { n_clusters, n_categories, counts: vec![0; n_clusters * n_categories] })
    }

    /// Builds a matrix from explicit rows of counts.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let n_categories = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut m = Self::new(rows.len(), n_categories)?;
        for (c, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_categories {
                return Err(Error::Dimension(format!("row {c} has {} entries, expected {n_categories}", r.len())));
            }
            m.counts[c * n_categories..(c + 1) * n_categories].copy_from_slice(r);
        }
        Ok(m)
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    pub fn get(&self, cluster: usize, category: usize) -> u64 {
        self.counts[cluster * self.n_categories + category]
    }

    pub fn row(&self, cluster: usize) -> &[u64] {
        &self.counts[cluster * self.n_categories..(cluster + 1) * self.n_categories]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Column sums: pixels per ground-truth category.
    pub fn category_totals(&self) -> Vec<u64> {
        let mut t = vec![0u64; self.n_categories];
        for r in self.counts.chunks_exact(self.n_categories) {
            for (s, &v) in t.iter_mut().zip(r) {
                *s += v;
            }
        }
        t
    }

    /// Adds another matrix of the same shape.
    pub fn merge(&mut self, other: &FrequencyMatrix) -> Result<()> {
        if (self.n_clusters, self.n_categories) != (other.n_clusters, other.n_categories) {
            return Err(Error::Dimension(format!(
                "cannot merge {}x{} with {}x{}",
                self.n_clusters, self.n_categories, other.n_clusters, other.n_categories
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// CSV with one row per cluster and one column per category.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> =
            std::iter::once("cluster".to_string()).chain((0..self.n_categories).map(|g| g.to_string())).collect();
        w.write_record(&header).expect("in-memory write");
        for c in 0..self.n_clusters {
            let rec: Vec<String> =
                std::iter::once(c.to_string()).chain(self.row(c).iter().map(|v| v.to_string())).collect();
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

fn check_same_dims(pred: &LabelMask, gt: &LabelMask) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::Dimension(format!("prediction is {:?}, ground truth is {:?}", pred.dims(), gt.dims())));
    }
    Ok(())
}

/// Adds the `(cluster, category)` pairs of one tile to `acc`, skipping
/// ignored ground-truth pixels.
pub fn accumulate_frequencies(pred: &LabelMask, gt: &LabelMask, acc: &mut FrequencyMatrix) -> Result<()> {
    check_same_dims(pred, gt)?;
    let mut local = FrequencyMatrix::new(acc.n_clusters, acc.n_categories)?;
    for (i, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
        if gt.is_ignored(i) {
            continue;
        }
        if p as usize >= acc.n_clusters {
            return Err(Error::Input(format!("predicted label {p} at pixel {i} exceeds {} clusters", acc.n_clusters)));
        }
        if g as usize >= acc.n_categories {
            return Err(Error::Input(format!("category {g} at pixel {i} exceeds {} categories", acc.n_categories)));
        }
        local.counts[p as usize * acc.n_categories + g as usize] += 1;
    }
    acc.merge(&local)
}

/// Category assigned to each cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMapping {
    pub map: Vec<u32>,
    pub n_categories: u32,
    /// Whether counts were normalized by category totals.
    pub normalized: bool,
}

/// Assigns each cluster the category it overlaps most, optionally after
/// dividing each count by its category total so rare categories can win.
pub fn match_clusters(freq: &FrequencyMatrix, normalized: bool) -> Result<ClusterMapping> {
    if freq.total() == 0 {
        return Err(Error::InsufficientData("frequency matrix has no counts".into()));
    }
    let totals = freq.category_totals();
    let mut map = Vec::with_capacity(freq.n_clusters);
    for c in 0..freq.n_clusters {
        let row = freq.row(c);
        if row.iter().all(|&v| v == 0) {
            log::warn!("event=empty_cluster cluster={c} assigned_category=0");
            map.push(0);
            continue;
        }
        let mut best: Option<usize> = None;
        for g in 0..freq.n_categories {
            if normalized && totals[g] == 0 {
                continue;
            }
            let better = match best {
                None => true,
                // Exact rational comparison of row[g]/t[g] against row[b]/t[b].
                Some(b) if normalized => {
                    (row[g] as u128) * (totals[b] as u128) > (row[b] as u128) * (totals[g] as u128)
                }
                Some(b) => row[g] > row[b],
            };
            if better {
                best = Some(g);
            }
        }
        map.push(best.unwrap_or(0) as u32);
    }
    Ok(ClusterMapping { map, n_categories: freq.n_categories as u32, normalized })
}

/// Relabels clusters as categories; ignored pixels stay ignored.
pub fn apply_mapping(pred: &LabelMask, mapping: &ClusterMapping) -> Result<LabelMask> {
    let ignore = pred.ignore_label();
    let labels = pred
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| match mapping.map.get(l as usize) {
            Some(&g) => Ok(g),
            None if l == ignore => Ok(mapping.n_categories),
            None => Err(Error::Input(format!("label {l} at pixel {i} has no mapping"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, cols) = pred.dims();
    LabelMask::new(rows, cols, mapping.n_categories, labels)
}

/// Per-class pixel scores. `None` marks an undefined value: precision with
/// no predictions, recall with no ground truth, or F1 for a class absent
/// from both.
#[derive(Debug, Clone, PartialEq)]
pub struct F1Report {
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
    pub f1: Vec<Option<f64>>,
    /// Ground-truth pixels per class.
    pub support: Vec<u64>,
    /// Mean F1 over classes present in the ground truth.
    pub macro_f1: f64,
    /// Pooled F1, equal to pixel accuracy for single-label predictions.
    pub micro_f1: f64,
    pub n_pixels: u64,
}

impl F1Report {
    pub fn n_categories(&self) -> usize {
        self.f1.len()
    }

    /// Flat JSON object: `macro_f1`, `micro_f1`, `n_pixels`, then
    /// `f1_<g>`, `precision_<g>`, `recall_<g>`, `support_<g>` per category.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("macro_f1".into(), self.macro_f1.into());
        m.insert("micro_f1".into(), self.micro_f1.into());
        m.insert("n_pixels".into(), self.n_pixels.into());
        for g in 0..self.n_categories() {
            m.insert(format!("f1_{g}"), self.f1[g].into());
            m.insert(format!("precision_{g}"), self.precision[g].into());
            m.insert(format!("recall_{g}"), self.recall[g].into());
            m.insert(format!("support_{g}"), self.support[g].into());
        }
        Value::Object(m)
    }

    /// One row per category plus a `macro` row; undefined values are empty.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["category", "precision", "recall", "f1", "support"]).expect("in-memory write");
        for g in 0..self.n_categories() {
            w.write_record([
                g.to_string(),
                fmt(self.precision[g]),
                fmt(self.recall[g]),
                fmt(self.f1[g]),
                self.support[g].to_string(),
            ])
            .expect("in-memory write");
        }
        w.write_record([
            "macro".into(),
            String::new(),
            String::new(),
            self.macro_f1.to_string(),
            self.n_pixels.to_string(),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

fn report_from_counts(tp: &[u64], fp: &[u64], fn_: &[u64], n_pixels: u64) -> Result<F1Report> {
    if n_pixels == 0 {
        return Err(Error::InsufficientData("no evaluated pixels".into()));
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let n = tp.len();
    let precision = (0..n).map(|g| ratio(tp[g], tp[g] + fp[g])).collect();
    let recall = (0..n).map(|g| ratio(tp[g], tp[g] + fn_[g])).collect();
    let f1: Vec<Option<f64>> = (0..n).map(|g| ratio(2 * tp[g], 2 * tp[g] + fp[g] + fn_[g])).collect();
    let support: Vec<u64> = (0..n).map(|g| tp[g] + fn_[g]).collect();
    let present: Vec<f64> = (0..n).filter(|&g| support[g] > 0).filter_map(|g| f1[g]).collect();
    let macro_f1 = present.iter().sum::<f64>() / present.len() as f64;
    let micro_f1 = tp.iter().sum::<u64>() as f64 / n_pixels as f64;
    Ok(F1Report { precision, recall, f1, support, macro_f1, micro_f1, n_pixels })
}

/// Pixel-level scores of category predictions. Ignored ground-truth pixels
/// are skipped; an ignored prediction counts as a miss.
pub fn f1_report(pred: &LabelMask, gt: &LabelMask, n_categories: usize) -> Result<F1Report> {
    check_same_dims(pred, gt)?;
    let mut tp = vec![0u64; n_categories];
    let mut fp = vec![0u64; n_categories];
    let mut fn_ = vec![0u64; n_categories];
    let mut n_pixels = 0u64;
    for (i, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
        if gt.is_ignored(i) {
            continue;
        }
        let g = g as usize;
        if g >= n_categories {
            return Err(Error::Input(format!("category {g} at pixel {i} exceeds {n_categories} categories")));
        }
        n_pixels += 1;
        let p = p as usize;
        if p == g {
            tp[g] += 1;
            continue;
        }
        fn_[g] += 1;
        if p < n_categories {
            fp[p] += 1;
        }
    }
    report_from_counts(&tp, &fp, &fn_, n_pixels)
}

/// Scores from a square confusion matrix (`predicted x ground truth`).
pub fn f1_from_confusion(conf: &FrequencyMatrix) -> Result<F1Report> {
    let n = conf.n_categories;
    if conf.n_clusters != n {
        return Err(Error::Dimension(format!("confusion matrix must be square, got {}x{n}", conf.n_clusters)));
    }
    let tp: Vec<u64> = (0..n).map(|g| conf.get(g, g)).collect();
    let fp: Vec<u64> = (0..n).map(|p| conf.row(p).iter().sum::<u64>() - tp[p]).collect();
    let fn_: Vec<u64> = conf.category_totals().iter().zip(&tp).map(|(t, d)| t - d).collect();
    report_from_counts(&tp, &fp, &fn_, conf.total())
}

/// Training pairs of concept features and the category they fall into.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    channels: usize,
    threshold: f64,
    features: Vec<f32>,
    labels: Vec<u32>,
}

impl ProbeSet {
    pub fn new(channels: usize, threshold: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Dimension("probe features need at least one channel".into()));
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Input(format!("threshold must lie in (0, 1], got {threshold}")));
        }
        Ok(Self { channels, threshold, features: Vec::new(), labels: Vec::new() })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    pub fn push(&mut self, feature: &[f32], label: u32) -> Result<()> {
        if feature.len() != self.channels {
            return Err(Error::Dimension(format!(
                "feature has {} channels, probe set has {}",
                feature.len(),
                self.channels
            )));
        }
        self.features.extend_from_slice(feature);
        self.labels.push(label);
        Ok(())
    }

    /// Features stacked as an `n x channels` matrix.
    pub fn features(&self) -> Result<DenseMatrix> {
        DenseMatrix::new(self.len(), self.channels, self.features.clone())
    }
}

/// Appends `(H_m, category)` for every concept whose non-ignored pixels fall
/// into one category with fraction at least the set's threshold. Returns the
/// number of pairs added.
pub fn probe_collect(
    factorization: &Factorization,
    concept_mask: &LabelMask,
    gt: &LabelMask,
    acc: &mut ProbeSet,
) -> Result<usize> {
    check_same_dims(concept_mask, gt)?;
    let h = &factorization.h;
    if h.n_cols() != acc.channels {
        return Err(Error::Dimension(format!("concepts have {} channels, probe set has {}", h.n_cols(), acc.channels)));
    }
    let k = h.n_rows();
    let n_cat = gt.n_labels() as usize;
    let mut counts = vec![0u64; k * n_cat];
    for (i, (&m, &g)) in concept_mask.labels().iter().zip(gt.labels()).enumerate() {
        if gt.is_ignored(i) {
            continue;
        }
        if m as usize >= k {
            return Err(Error::Input(format!("concept {m} at pixel {i} exceeds rank {k}")));
        }
        counts[m as usize * n_cat + g as usize] += 1;
    }
    let mut added = 0;
    for m in 0..k {
        let row = &counts[m * n_cat..(m + 1) * n_cat];
        let total: u64 = row.iter().sum();
        if total == 0 {
            continue;
        }
        let best = argmax(row);
        if row[best] as f64 >= acc.threshold * total as f64 {
            acc.push(h.row(m), best as u32)?;
            added += 1;
        }
    }
    Ok(added)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    /// L2 penalty on the weights (the bias is not penalized).
    pub reg: f64,
    pub use_bias: bool,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { reg: 1e-3, use_bias: true, max_iters: 20_000, grad_tol: 1e-5, seed: 0 }
    }
}

/// Multinomial logistic-regression classifier over concept features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    /// `n_categories x channels`.
    pub weights: DenseMatrix,
    pub bias: Vec<f32>,
}

impl LinearProbe {
    pub fn new(weights: DenseMatrix, bias: Vec<f32>) -> Result<Self> {
        if bias.len() != weights.n_rows() {
            return Err(Error::Dimension(format!("{} bias entries for {} categories", bias.len(), weights.n_rows())));
        }
        if weights.data().iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Input("probe parameters must be finite".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn n_categories(&self) -> usize {
        self.weights.n_rows()
    }

    pub fn channels(&self) -> usize {
        self.weights.n_cols()
    }
}

/// Training diagnostics returned with the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFit {
    pub probe: LinearProbe,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub objective: f64,
}

struct Problem<'a> {
    x: &'a [f32],
    y: &'a [u32],
    d: usize,
    k: usize,
    reg: f64,
    use_bias: bool,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    /// Mean cross-entropy plus `reg * ||W||^2`, and its gradient. `params`
    /// holds `W` row-major followed by the bias.
    fn eval(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (d, k) = (self.d, self.k);
        let (w, b) = params.split_at(k * d);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let mut logits = vec![0.0f64; k];
        let inv_n = 1.0 / self.n() as f64;
        for (i, &yi) in self.y.iter().enumerate() {
            let x = &self.x[i * d..(i + 1) * d];
            for (c, l) in logits.iter_mut().enumerate() {
                let wc = &w[c * d..(c + 1) * d];
                *l = b[c] + wc.iter().zip(x).map(|(a, &v)| a * v as f64).sum::<f64>();
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            loss += max + z.ln() - logits[yi as usize];
            for c in 0..k {
                let p = (logits[c] - max).exp() / z;
                let r = (p - if c == yi as usize { 1.0 } else { 0.0 }) * inv_n;
                for (g, &v) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *g += r * v as f64;
                }
                if self.use_bias {
                    grad[k * d + c] += r;
                }
            }
        }
        let mut penalty = 0.0;
        for (g, &wv) in grad[..k * d].iter_mut().zip(w) {
            *g += 2.0 * self.reg * wv;
            penalty += wv * wv;
        }
        loss * inv_n + self.reg * penalty
    }
}

fn probe_problem<'a>(set: &'a ProbeSet, n_categories: usize, reg: f64, use_bias: bool) -> Result<Problem<'a>> {
    if set.is_empty() {
        return Err(Error::EmptyProbe);
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::Input(format!("reg must be a finite non-negative number, got {reg}")));
    }
    if let Some(&bad) = set.labels.iter().find(|&&l| l as usize >= n_categories) {
        return Err(Error::Input(format!("probe label {bad} exceeds {n_categories} categories")));
    }
    Ok(Problem { x: &set.features, y: &set.labels, d: set.channels, k: n_categories, reg, use_bias })
}

fn flatten(probe: &LinearProbe) -> Vec<f64> {
    probe.weights.data().iter().chain(&probe.bias).map(|&v| v as f64).collect()
}

/// Objective and gradient of the probe loss at `probe`'s parameters; the
/// gradient lists the weights row-major, then the bias (zero when the bias
/// is disabled).
pub fn probe_gradient(set: &ProbeSet, probe: &LinearProbe, reg: f64, use_bias: bool) -> Result<(f64, Vec<f64>)> {
    if probe.channels() != set.channels {
        return Err(Error::Dimension(format!("probe has {} channels, set has {}", probe.channels(), set.channels)));
    }
    let problem = probe_problem(set, probe.n_categories(), reg, use_bias)?;
    let params = flatten(probe);
    let mut grad = vec![0.0; params.len()];
    let loss = problem.eval(&params, &mut grad);
    Ok((loss, grad))
}

/// Trains the probe by accelerated full-batch gradient descent with a fixed
/// step `1/L`, where `L` bounds the curvature of the loss.
pub fn probe_train_detailed(set: &ProbeSet, n_categories: usize, cfg: &ProbeConfig) -> Result<ProbeFit> {
    if n_categories == 0 {
        return Err(Error::Input("n_categories must be positive".into()));
    }
    let problem = probe_problem(set, n_categories, cfg.reg, cfg.use_bias)?;
    let mut counts = vec![0usize; n_categories];
    for &l in &set.labels {
        counts[l as usize] += 1;
    }
    let missing: Vec<usize> = (0..n_categories).filter(|&g| counts[g] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::Coverage { missing, counts });
    }

    let (d, k, n) = (set.channels, n_categories, set.len());
    let bias_term = if cfg.use_bias { 1.0 } else { 0.0 };
    let mean_sq = set
        .features
        .chunks_exact(d)
        .map(|x| x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() + bias_term)
        .sum::<f64>()
        / n as f64;
    let lipschitz = 0.5 * mean_sq + 2.0 * cfg.reg;
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 0.01).expect("valid normal");
    let mut x: Vec<f64> = (0..k * d).map(|_| normal.sample(&mut rng)).chain(std::iter::repeat_n(0.0, k)).collect();
    let mut y = x.clone();
    let mut grad = vec![0.0; x.len()];
    let mut t = 1.0f64;
    let mut f_prev = problem.eval(&x, &mut grad);
    let mut grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut iterations = 0;
    while grad_norm >= cfg.grad_tol && iterations < cfg.max_iters {
        iterations += 1;
        problem.eval(&y, &mut grad);
        let x_next: Vec<f64> = y.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
        let f_next = problem.eval(&x_next, &mut grad);
        if f_next > f_prev {
            // Momentum overshot; restart from the last iterate.
            t = 1.0;
            y.clone_from(&x);
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        for i in 0..x.len() {
            y[i] = x_next[i] + beta * (x_next[i] - x[i]);
        }
        x = x_next;
        t = t_next;
        f_prev = f_next;
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    }
    let converged = grad_norm < cfg.grad_tol;
    if !converged {
        log::warn!("event=probe_not_converged iterations={iterations} grad_norm={grad_norm:e}");
    }
    let weights = DenseMatrix::new(k, d, x[..k * d].iter().map(|&v| v as f32).collect())?;
    let bias = x[k * d..].iter().map(|&v| v as f32).collect();
    Ok(ProbeFit { probe: LinearProbe::new(weights, bias)?, iterations, grad_norm, converged, objective: f_prev })
}

pub fn probe_train(set: &ProbeSet, n_categories: usize, cfg: &ProbeConfig) -> Result<LinearProbe> {
    probe_train_detailed(set, n_categories, cfg).map(|f| f.probe)
}

/// Category with the highest score `w_c . h + b_c` for each concept row.
pub fn probe_classify(h: &DenseMatrix, probe: &LinearProbe) -> Result<Vec<u32>> {
    if h.n_cols() != probe.channels() {
        return Err(Error::Dimension(format!("concepts have {} channels, probe has {}", h.n_cols(), probe.channels())));
    }
    Ok(h.rows()
        .map(|x| {
            let scores: Vec<f64> = probe
                .weights
                .rows()
                .zip(&probe.bias)
                .map(|(w, &b)| b as f64 + w.iter().zip(x).map(|(&a, &v)| a as f64 * v as f64).sum::<f64>())
                .collect();
            argmax(&scores) as u32
        })
        .collect())
}
