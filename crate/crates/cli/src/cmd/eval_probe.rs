use anyhow::{bail, Context as _, Result};
use fseg_core::clustering::ClusterModel;
use fseg_core::evaluation::{
    accumulate_frequencies, f1_from_confusion, probe_classify, probe_collect, probe_train_detailed, FrequencyMatrix,
    ProbeConfig, ProbeSet,
};
use fseg_core::factorization::{nmf_factorize, nmf_solve_w, Factorization};
use fseg_core::segmentation::concept_labels;
use fseg_core::tensor_io::{read_fst, read_gt_mask, write_fst, LabelMask, Palette};
use rayon::prelude::*;
use serde_json::json;

use crate::cmd::eval_match::aligned;
use crate::cmd::{load_model, load_palette};
use crate::files::{ensure_dir, fst_inputs, ground_truth_files, pair_by_stem, stem, write_json, write_text, Pair};
use crate::manifest::Failure;
use crate::{Context, EvalProbeArgs, ModeArg, Record};

/// One factorized tile with its concept mask on the ground-truth grid.
struct Tile {
    factorization: Factorization,
    concepts: LabelMask,
    gt: LabelMask,
}

fn factorize(
    pair: &Pair,
    args: &EvalProbeArgs,
    model: Option<&ClusterModel>,
    palette: &Palette,
    seed: u64,
) -> Result<Tile> {
    let tensor = read_fst(&pair.input)
        .and_then(|f| f.into_tensor())
        .with_context(|| format!("reading {}", pair.input.display()))?;
    let cfg = args.nmf.config(seed);
    let factorization = match (args.mode, model) {
        (ModeArg::FixedH, Some(m)) => nmf_solve_w(tensor.as_matrix(), m.centers(), &cfg)?,
        (ModeArg::FixedH, None) => bail!("fixed-h mode needs --model"),
        (ModeArg::FullNmf, _) => nmf_factorize(tensor.as_matrix(), args.k_concepts.unwrap_or(0) as usize, &cfg)?,
    };
    let grid = concept_labels(&factorization.w, tensor.rows(), tensor.cols())?;
    let gt = read_gt_mask(&pair.gt, palette)?;
    let concepts = aligned(&grid, &gt)?;
    Ok(Tile { factorization, concepts, gt })
}

pub fn run(ctx: &Context, args: &EvalProbeArgs) -> Result<Record> {
    let palette = load_palette(&args.palette)?;
    let n_categories = palette.n_categories() as usize;
    let model = args.model.as_deref().map(load_model).transpose()?;
    let features = fst_inputs(&args.features)?.into_iter().map(|p| (stem(&p, ".fst"), p)).collect();
    let (gts, mut failures) = ground_truth_files(&args.gt)?;
    let (pairs, orphans) = pair_by_stem(features, gts);
    failures.extend(orphans);
    if pairs.is_empty() {
        bail!("no feature/ground-truth pairs between {} and {}", args.features.display(), args.gt.display());
    }

    let results: Vec<Result<Tile>> =
        ctx.pool.install(|| pairs.par_iter().map(|p| factorize(p, args, model.as_ref(), &palette, ctx.seed)).collect());
    let mut tiles = Vec::new();
    for (pair, r) in pairs.iter().zip(results) {
        match r {
            Ok(t) => tiles.push((pair, t)),
            Err(e) => failures.push(Failure::new(pair.stem.clone(), e)),
        }
    }
    let Some((_, first)) = tiles.first() else {
        bail!("no tile could be factorized");
    };

    let mut set = ProbeSet::new(first.factorization.h.n_cols(), args.threshold)?;
    let mut kept = Vec::new();
    for (pair, tile) in tiles {
        match probe_collect(&tile.factorization, &tile.concepts, &tile.gt, &mut set) {
            Ok(added) => {
                log::debug!("event=probe_collect tile={} added={added}", pair.stem);
                kept.push((pair, tile));
            }
            Err(e) => failures.push(Failure::new(pair.stem.clone(), e)),
        }
    }
    let cfg = ProbeConfig {
        reg: args.reg,
        use_bias: !args.no_bias,
        max_iters: args.probe_max_iters,
        seed: ctx.seed,
        ..ProbeConfig::default()
    };
    let fit = probe_train_detailed(&set, n_categories, &cfg)?;
    log::info!(
        "event=probe_trained examples={} iterations={} grad_norm={:e} converged={}",
        set.len(),
        fit.iterations,
        fit.grad_norm,
        fit.converged
    );

    let mut confusion = FrequencyMatrix::new(n_categories, n_categories)?;
    for (pair, tile) in &kept {
        let categories = probe_classify(&tile.factorization.h, &fit.probe)?;
        let (rows, cols) = tile.concepts.dims();
        let labels = tile.concepts.labels().iter().map(|&m| categories[m as usize]).collect();
        let pred = LabelMask::new(rows, cols, n_categories as u32, labels)?;
        if let Err(e) = accumulate_frequencies(&pred, &tile.gt, &mut confusion) {
            failures.push(Failure::new(pair.stem.clone(), e));
        }
    }
    let report = f1_from_confusion(&confusion)?;
    log::info!("event=eval_probe tiles={} macro_f1={} micro_f1={}", kept.len(), report.macro_f1, report.micro_f1);

    ensure_dir(&args.out)?;
    let out = |name: &str| args.out.join(name);
    let outputs: Vec<_> =
        ["probe_weights.fst", "probe_bias.fst", "confusion.csv", "f1.csv", "f1.json", "probe_summary.json"]
            .iter()
            .map(|n| out(n))
            .collect();
    write_fst(&outputs[0], &fit.probe.weights)?;
    write_fst(&outputs[1], &fit.probe.bias[..])?;
    write_text(&outputs[2], &confusion.to_csv())?;
    write_text(&outputs[3], &report.to_csv())?;
    write_json(&outputs[4], &report.to_json())?;
    let mut per_category = vec![0usize; n_categories];
    for &l in set.labels() {
        per_category[l as usize] += 1;
    }
    write_json(
        &outputs[5],
        &json!({
            "tiles": kept.len(),
            "examples": set.len(),
            "examples_per_category": per_category,
            "threshold": args.threshold,
            "iterations": fit.iterations,
            "grad_norm": fit.grad_norm,
            "converged": fit.converged,
            "objective": fit.objective,
        }),
    )?;

    let mut inputs = Vec::new();
    for p in &pairs {
        inputs.extend([p.input.clone(), p.gt.clone()]);
    }
    inputs.push(args.palette.palette.clone());
    if let Some(m) = &args.model {
        let (f, meta) = ClusterModel::paths(m);
        inputs.extend([f, meta]);
    }
    Ok(Record {
        params: serde_json::to_value(args)?,
        inputs,
        outputs,
        failures,
        manifest_path: Some(out("manifest.json")),
    })
}
