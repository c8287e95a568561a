use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use fseg_core::evaluation::{
    accumulate_frequencies, apply_mapping, f1_from_confusion, match_clusters, FrequencyMatrix,
};
use fseg_core::segmentation::resize_labels_nearest;
use fseg_core::tensor_io::{read_fst, read_gt_mask, LabelMask};
use rayon::prelude::*;
use serde_json::json;

use crate::cmd::load_palette;
use crate::files::{ensure_dir, ground_truth_files, pair_by_stem, prediction_files, write_json, write_text, Pair};
use crate::manifest::Failure;
use crate::{Context, EvalMatchArgs, Record};

/// Rejects pairs whose aspect ratios differ by more than 1%.
pub(crate) fn check_aspect(pred: (usize, usize), gt: (usize, usize)) -> Result<()> {
    let lhs = (pred.0 * gt.1) as f64;
    let rhs = (pred.1 * gt.0) as f64;
    if (lhs - rhs).abs() > 0.01 * lhs.max(rhs) {
        bail!(fseg_core::Error::Dimension(format!(
            "prediction {}x{} and ground truth {}x{} have different aspect ratios",
            pred.0, pred.1, gt.0, gt.1
        )));
    }
    Ok(())
}

/// Prediction resampled onto the ground-truth grid.
pub(crate) fn aligned(pred: &LabelMask, gt: &LabelMask) -> Result<LabelMask> {
    check_aspect(pred.dims(), gt.dims())?;
    Ok(resize_labels_nearest(pred, gt.dims())?)
}

fn load_pair(pair: &Pair, palette: &fseg_core::tensor_io::Palette) -> Result<(LabelMask, LabelMask)> {
    let pred = read_fst(&pair.input)
        .and_then(|f| f.into_labels())
        .with_context(|| format!("reading {}", pair.input.display()))?;
    let gt = read_gt_mask(&pair.gt, palette)?;
    Ok((aligned(&pred, &gt)?, gt))
}

pub fn run(ctx: &Context, args: &EvalMatchArgs) -> Result<Record> {
    let palette = load_palette(&args.palette)?;
    let n_categories = palette.n_categories() as usize;
    let preds = prediction_files(&args.pred)?;
    let (gts, mut failures) = ground_truth_files(&args.gt)?;
    let (pairs, orphans) = pair_by_stem(preds, gts);
    failures.extend(orphans);
    if pairs.is_empty() {
        bail!("no prediction/ground-truth pairs between {} and {}", args.pred.display(), args.gt.display());
    }

    let loaded: Vec<Result<(LabelMask, LabelMask)>> =
        ctx.pool.install(|| pairs.par_iter().map(|p| load_pair(p, &palette)).collect());
    let mut masks = Vec::new();
    let mut n_clusters = None;
    for (pair, r) in pairs.iter().zip(loaded) {
        let checked = r.and_then(|(pred, gt)| {
            let n = *n_clusters.get_or_insert(pred.n_labels());
            if pred.n_labels() != n {
                bail!("mask has {} clusters, earlier masks have {n}", pred.n_labels());
            }
            Ok((pred, gt))
        });
        match checked {
            Ok(m) => masks.push((pair, m)),
            Err(e) => failures.push(Failure::new(pair.stem.clone(), e)),
        }
    }
    let Some(n_clusters) = n_clusters.filter(|_| !masks.is_empty()) else {
        bail!("no pair could be loaded");
    };

    let mut freq = FrequencyMatrix::new(n_clusters as usize, n_categories)?;
    let mut used = Vec::new();
    for (pair, (pred, gt)) in &masks {
        match accumulate_frequencies(pred, gt, &mut freq) {
            Ok(()) => used.push((pair, pred, gt)),
            Err(e) => failures.push(Failure::new(pair.stem.clone(), e)),
        }
    }
    let mapping = match_clusters(&freq, args.normalized)?;

    let mut confusion = FrequencyMatrix::new(n_categories, n_categories)?;
    for (_, pred, gt) in &used {
        let categories = apply_mapping(pred, &mapping)?;
        accumulate_frequencies(&categories, gt, &mut confusion)?;
    }
    let report = f1_from_confusion(&confusion)?;
    log::info!("event=eval_match pairs={} macro_f1={} micro_f1={}", used.len(), report.macro_f1, report.micro_f1);

    ensure_dir(&args.out)?;
    let out = |name: &str| args.out.join(name);
    let outputs: Vec<PathBuf> =
        ["frequency.csv", "mapping.json", "confusion.csv", "f1.csv", "f1.json"].iter().map(|n| out(n)).collect();
    write_text(&outputs[0], &freq.to_csv())?;
    write_json(&outputs[1], &json!({ "normalized": mapping.normalized, "map": mapping.map }))?;
    write_text(&outputs[2], &confusion.to_csv())?;
    write_text(&outputs[3], &report.to_csv())?;
    write_json(&outputs[4], &report.to_json())?;

    let mut inputs = Vec::new();
    for p in &pairs {
        inputs.extend([p.input.clone(), p.gt.clone()]);
    }
    inputs.push(args.palette.palette.clone());
    Ok(Record {
        params: serde_json::to_value(args)?,
        inputs,
        outputs,
        failures,
        manifest_path: Some(out("manifest.json")),
    })
}
