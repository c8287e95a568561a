//! Turning feature tensors into cluster-space label masks.

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::factorization::{nmf_factorize, nmf_solve_w, Factorization, NmfConfig};
use crate::linalg::{argmax, norm};
use crate::tensor_io::{DenseMatrix, FeatureTensor, LabelMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentationMode {
    /// Free NMF, then each concept goes to the most cosine-similar center.
    FullNmfCosine,
    /// NMF with `H` pinned to the cluster centers.
    FixedH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResizeMode {
    /// Nearest-neighbour upsampling of the label grid.
    #[default]
    NearestLabel,
    /// Bilinear upsampling of each `W` column, then per-pixel argmax.
    BilinearW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationRequest {
    pub mode: SegmentationMode,
    /// Factorization rank in `FullNmfCosine` mode; unused with `FixedH`.
    pub k_concepts: usize,
    /// Output `(height, width)`, if the grid should be upsampled.
    pub resize_to: Option<(usize, usize)>,
    pub resize_mode: ResizeMode,
    pub nmf_cfg: NmfConfig,
}

impl SegmentationRequest {
    pub fn fixed_h(nmf_cfg: NmfConfig) -> Self {
        Self {
            mode: SegmentationMode::FixedH,
            k_concepts: 0,
            resize_to: None,
            resize_mode: ResizeMode::default(),
            nmf_cfg,
        }
    }

    pub fn full_nmf(k_concepts: usize, nmf_cfg: NmfConfig) -> Self {
        Self { mode: SegmentationMode::FullNmfCosine, k_concepts, ..Self::fixed_h(nmf_cfg) }
    }

    pub fn with_resize(mut self, target: (usize, usize), mode: ResizeMode) -> Self {
        self.resize_to = Some(target);
        self.resize_mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// Per-pixel dominant concept, at grid resolution.
    pub concept_mask: LabelMask,
    /// Per-pixel cluster index, at grid resolution.
    pub cluster_mask: LabelMask,
    pub resized_mask: Option<LabelMask>,
    pub factorization: Factorization,
    /// Cluster assigned to each concept; the identity in `FixedH` mode.
    pub concept_to_cluster: Vec<u32>,
}

/// Per-pixel argmax over the columns of `w`, reshaped to `rows x cols`.
pub fn concept_labels(w: &DenseMatrix, rows: usize, cols: usize) -> Result<LabelMask> {
    if rows.checked_mul(cols) != Some(w.n_rows()) {
        return Err(Error::Dimension(format!("W has {} rows, grid is {rows}x{cols}", w.n_rows())));
    }
    let labels = w.rows().map(|r| argmax(r) as u32).collect();
    LabelMask::new(rows, cols, w.n_cols() as u32, labels)
}

/// For each concept row of `h`, the cluster center with the highest cosine
/// similarity. Zero concept rows fall back to cluster 0.
pub fn match_concepts_to_clusters(h: &DenseMatrix, model: &ClusterModel) -> Result<Vec<u32>> {
    if h.n_cols() != model.channels() {
        return Err(Error::Dimension(format!("concepts have {} channels, model has {}", h.n_cols(), model.channels())));
    }
    let centers: Vec<Vec<f64>> = model.centers().rows().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let center_norms: Vec<f64> = centers.iter().map(|c| norm(c)).collect();
    let mut out = Vec::with_capacity(h.n_rows());
    for (m, row) in h.rows().enumerate() {
        let concept: Vec<f64> = row.iter().map(|&v| v as f64).collect();
        let n = norm(&concept);
        if n == 0.0 {
            log::warn!("event=zero_concept concept={m} assigned_cluster=0");
            out.push(0);
            continue;
        }
        let cos: Vec<f64> = centers
            .iter()
            .zip(&center_norms)
            .map(|(c, &cn)| c.iter().zip(&concept).map(|(a, b)| a * b).sum::<f64>() / (cn * n))
            .collect();
        out.push(argmax(&cos) as u32);
    }
    Ok(out)
}

/// Segments one tile against a cluster vocabulary.
pub fn segment_tile(a: &FeatureTensor, model: &ClusterModel, req: &SegmentationRequest) -> Result<SegmentationResult> {
    if a.channels() != model.channels() {
        return Err(Error::Dimension(format!("tensor has {} channels, model has {}", a.channels(), model.channels())));
    }
    let (rows, cols) = (a.rows(), a.cols());
    let (factorization, concept_to_cluster) = match req.mode {
        SegmentationMode::FullNmfCosine => {
            if req.k_concepts == 0 {
                return Err(Error::Input("k_concepts must be at least 1".into()));
            }
            let f = nmf_factorize(a.as_matrix(), req.k_concepts, &req.nmf_cfg)?;
            let map = match_concepts_to_clusters(&f.h, model)?;
            (f, map)
        }
        SegmentationMode::FixedH => {
            let f = nmf_solve_w(a.as_matrix(), model.centers(), &req.nmf_cfg)?;
            (f, (0..model.k() as u32).collect())
        }
    };
    let concept_mask = concept_labels(&factorization.w, rows, cols)?;
    let cluster_labels = concept_mask.labels().iter().map(|&m| concept_to_cluster[m as usize]).collect();
    let cluster_mask = LabelMask::new(rows, cols, model.k() as u32, cluster_labels)?;
    let mut result =
        SegmentationResult { concept_mask, cluster_mask, resized_mask: None, factorization, concept_to_cluster };
    if let Some(target) = req.resize_to {
        result.resized_mask = Some(resize_mask(&result, target, req.resize_mode)?);
    }
    Ok(result)
}

/// Upsamples the cluster mask of `result` to `target = (height, width)`.
pub fn resize_mask(result: &SegmentationResult, target: (usize, usize), mode: ResizeMode) -> Result<LabelMask> {
    let (rows, cols) = result.cluster_mask.dims();
    let (th, tw) = target;
    if th < rows || tw < cols {
        return Err(Error::Unsupported(format!("cannot downscale a {rows}x{cols} grid to {th}x{tw}")));
    }
    match mode {
        ResizeMode::NearestLabel => resize_labels_nearest(&result.cluster_mask, target),
        ResizeMode::BilinearW => {
            let concepts = bilinear_argmax(&result.factorization.w, rows, cols, target);
            let labels = concepts.into_iter().map(|m| result.concept_to_cluster[m]).collect();
            LabelMask::new(th, tw, result.cluster_mask.n_labels(), labels)
        }
    }
}

/// Nearest-neighbour resampling to any size. Output pixel `y` samples source
/// row `floor((y + 0.5) * rows / height)`, computed in integers.
pub fn resize_labels_nearest(mask: &LabelMask, target: (usize, usize)) -> Result<LabelMask> {
    let (rows, cols) = mask.dims();
    let (th, tw) = target;
    if th == 0 || tw == 0 {
        return Err(Error::Dimension(format!("resize target must be positive, got {th}x{tw}")));
    }
    let src_col: Vec<usize> = (0..tw).map(|x| (2 * x + 1) * cols / (2 * tw)).collect();
    let mut labels = Vec::with_capacity(th * tw);
    for y in 0..th {
        let sy = (2 * y + 1) * rows / (2 * th);
        labels.extend(src_col.iter().map(|&sx| mask.get(sy, sx)));
    }
    LabelMask::new(th, tw, mask.n_labels(), labels)
}

/// Half-pixel-centre source coordinate and interpolation weight.
fn sample_axis(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, s - lo as f64)
}

fn bilinear_argmax(w: &DenseMatrix, rows: usize, cols: usize, (th, tw): (usize, usize)) -> Vec<usize> {
    let k = w.n_cols();
    let xs: Vec<_> = (0..tw).map(|x| sample_axis(x, cols, tw)).collect();
    let mut out = Vec::with_capacity(th * tw);
    let mut acc = vec![0.0f64; k];
    for y in 0..th {
        let (y0, y1, fy) = sample_axis(y, rows, th);
        for &(x0, x1, fx) in &xs {
            let taps = [
                (y0 * cols + x0, (1.0 - fy) * (1.0 - fx)),
                (y0 * cols + x1, (1.0 - fy) * fx),
                (y1 * cols + x0, fy * (1.0 - fx)),
                (y1 * cols + x1, fy * fx),
            ];
            acc.iter_mut().for_each(|v| *v = 0.0);
            for (idx, wt) in taps {
                for (a, &v) in acc.iter_mut().zip(w.row(idx)) {
                    *a += wt * v as f64;
                }
            }
            out.push(argmax(&acc));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn model(rows: &[&[f32]]) -> ClusterModel {
        ClusterModel::new(DenseMatrix::from_rows(rows).unwrap(), BTreeMap::new()).unwrap()
    }

    #[test]
    fn concept_argmax_examples() {
        let w = DenseMatrix::from_rows(&[[0.1, 0.9, 0.3], [0.5, 0.5, 0.2], [0.0, 0.0, 0.0]]).unwrap();
        let m = concept_labels(&w, 1, 3).unwrap();
        assert_eq!(m.labels(), &[1, 0, 0]);
        assert_eq!(m.n_labels(), 3);
        assert!(matches!(concept_labels(&w, 2, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn cosine_examples() {
        let centers = model(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[1.0, 1.0, 0.0], &[0.2, 0.3, 0.9]]);
        let h = DenseMatrix::from_rows(&[[1.0, 1.5, 4.5], [0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(match_concepts_to_clusters(&h, &centers).unwrap(), vec![3, 0]);

        let centers = model(&[&[0.0, 1.0], &[1.0, 1.0]]);
        let h = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert_eq!(match_concepts_to_clusters(&h, &centers).unwrap(), vec![1]);
        let bad = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(match_concepts_to_clusters(&bad, &centers), Err(Error::Dimension(_))));
    }

    #[test]
    fn nearest_resize_examples() {
        let m = LabelMask::new(2, 2, 4, vec![0, 1, 2, 3]).unwrap();
        let up = resize_labels_nearest(&m, (4, 4)).unwrap();
        assert_eq!(up.labels(), &[0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3]);
        assert_eq!(resize_labels_nearest(&m, (2, 2)).unwrap(), m);
    }

    fn result_from_w(w: DenseMatrix, rows: usize, cols: usize) -> SegmentationResult {
        let concept_mask = concept_labels(&w, rows, cols).unwrap();
        let k = w.n_cols();
        SegmentationResult {
            cluster_mask: concept_mask.clone(),
            concept_mask,
            resized_mask: None,
            factorization: Factorization {
                h: DenseMatrix::zeros(k, 1).unwrap(),
                w,
                k_c: k,
                final_error: 0.0,
                n_iters: 0,
                objective_trace: vec![0.0],
            },
            concept_to_cluster: (0..k as u32).collect(),
        }
    }

    #[test]
    fn bilinear_half_pixel_example() {
        let r = result_from_w(DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(), 1, 2);
        let up = resize_mask(&r, (1, 4), ResizeMode::BilinearW).unwrap();
        assert_eq!(up.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn identity_resize_both_modes() {
        let w = DenseMatrix::from_rows(&[[0.2, 0.7], [0.9, 0.1], [0.4, 0.6], [0.3, 0.3]]).unwrap();
        let r = result_from_w(w, 2, 2);
        for mode in [ResizeMode::NearestLabel, ResizeMode::BilinearW] {
            assert_eq!(resize_mask(&r, (2, 2), mode).unwrap(), r.cluster_mask);
        }
        assert!(matches!(resize_mask(&r, (1, 4), ResizeMode::NearestLabel), Err(Error::Unsupported(_))));
    }

    fn block_tensor(centers: &[[f32; 4]; 4]) -> FeatureTensor {
        let mut data = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                data.extend_from_slice(&centers[(r / 2) * 2 + c / 2]);
            }
        }
        FeatureTensor::new(4, 4, 4, data).unwrap()
    }

    const CENTERS: [[f32; 4]; 4] =
        [[1.0, 0.1, 0.0, 0.0], [0.0, 1.0, 0.2, 0.0], [0.1, 0.0, 1.0, 0.3], [0.2, 0.0, 0.0, 1.0]];
    const BLOCKS: [u32; 16] = [0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3];

    #[test]
    fn fixed_h_recovers_blocks() {
        let m = model(&CENTERS.iter().map(|c| &c[..]).collect::<Vec<_>>());
        let req = SegmentationRequest::fixed_h(NmfConfig::default()).with_resize((8, 8), ResizeMode::NearestLabel);
        let r = segment_tile(&block_tensor(&CENTERS), &m, &req).unwrap();
        assert_eq!(r.cluster_mask.labels(), &BLOCKS);
        assert_eq!(r.cluster_mask, r.concept_mask);
        assert_eq!(r.resized_mask.unwrap().dims(), (8, 8));
    }

    #[test]
    fn full_nmf_recovers_blocks() {
        let m = model(&CENTERS.iter().map(|c| &c[..]).collect::<Vec<_>>());
        let cfg = NmfConfig { max_iters: 1000, tol: 1e-10, ..NmfConfig::default() };
        let r = segment_tile(&block_tensor(&CENTERS), &m, &SegmentationRequest::full_nmf(4, cfg)).unwrap();
        assert_eq!(r.cluster_mask.labels(), &BLOCKS);
    }

    #[test]
    fn request_errors() {
        let m = model(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let t = FeatureTensor::new(1, 1, 2, vec![1.0, 1.0]).unwrap();
        let req = SegmentationRequest::full_nmf(0, NmfConfig::default());
        assert!(matches!(segment_tile(&t, &m, &req), Err(Error::Input(_))));
        let t3 = FeatureTensor::new(1, 1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        let req = SegmentationRequest::fixed_h(NmfConfig::default());
        assert!(matches!(segment_tile(&t3, &m, &req), Err(Error::Dimension(_))));
    }
}
