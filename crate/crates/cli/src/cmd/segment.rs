use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use fseg_core::clustering::ClusterModel;
use fseg_core::segmentation::{segment_tile, SegmentationRequest};
use fseg_core::tensor_io::{read_fst, sidecar_path, write_fst, write_mask_pgm};
use rayon::prelude::*;
use serde_json::json;

use crate::cmd::load_model;
use crate::files::{ensure_dir, fst_inputs, stem, write_json};
use crate::manifest::Failure;
use crate::{Context, ModeArg, Record, SegmentArgs};

fn request(args: &SegmentArgs, seed: u64) -> SegmentationRequest {
    let cfg = args.nmf.config(seed);
    let req = match args.mode {
        ModeArg::FixedH => SegmentationRequest::fixed_h(cfg),
        ModeArg::FullNmf => SegmentationRequest::full_nmf(args.k_concepts.unwrap_or(0) as usize, cfg),
    };
    match args.resize {
        Some(target) => req.with_resize(target, args.resize_mode.into()),
        None => req,
    }
}

/// Segments one tile and writes its mask set; returns the written paths.
fn segment_one(
    tile: &Path,
    model: &ClusterModel,
    req: &SegmentationRequest,
    args: &SegmentArgs,
) -> Result<Vec<PathBuf>> {
    let name = stem(tile, ".fst");
    let tensor = read_fst(tile).and_then(|f| f.into_tensor()).with_context(|| format!("reading {}", tile.display()))?;
    let result = segment_tile(&tensor, model, req)?;
    let mask = result.resized_mask.as_ref().unwrap_or(&result.cluster_mask);

    let out = |suffix: &str| args.out.join(format!("{name}{suffix}"));
    let (mask_fst, concepts_fst, pgm, info) = (out(".mask.fst"), out(".concepts.fst"), out(".mask.pgm"), out(".json"));
    write_fst(&mask_fst, mask)?;
    write_fst(&concepts_fst, &result.concept_mask)?;
    write_mask_pgm(&pgm, mask, args.scale_pgm)?;
    let f = &result.factorization;
    write_json(
        &info,
        &json!({
            "tile": name,
            "mode": args.mode,
            "grid": [tensor.rows(), tensor.cols()],
            "mask_dims": [mask.rows(), mask.cols()],
            "k_concepts": f.k_c,
            "final_error": f.final_error,
            "n_iters": f.n_iters,
            "concept_to_cluster": result.concept_to_cluster,
        }),
    )?;
    log::debug!("event=tile_done tile={name} final_error={} n_iters={}", f.final_error, f.n_iters);
    let side = sidecar_path(&pgm);
    Ok(vec![mask_fst, concepts_fst, pgm, side, info])
}

pub fn run(ctx: &Context, args: &SegmentArgs) -> Result<Record> {
    let model = load_model(&args.model)?;
    let tiles = fst_inputs(&args.features)?;
    ensure_dir(&args.out)?;
    let req = request(args, ctx.seed);
    log::info!("event=segment tiles={} mode={:?} k={}", tiles.len(), args.mode, model.k());

    let results: Vec<Result<Vec<PathBuf>>> =
        ctx.pool.install(|| tiles.par_iter().map(|t| segment_one(t, &model, &req, args)).collect());
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for (tile, r) in tiles.iter().zip(results) {
        match r {
            Ok(paths) => outputs.extend(paths),
            Err(e) => failures.push(Failure::new(tile.display().to_string(), e)),
        }
    }
    let (model_fst, model_meta) = ClusterModel::paths(&args.model);
    let mut inputs = tiles;
    inputs.extend([model_fst, model_meta]);
    Ok(Record {
        params: serde_json::to_value(args)?,
        inputs,
        outputs,
        failures,
        manifest_path: Some(args.out.join("manifest.json")),
    })
}
