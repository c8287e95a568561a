use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use fseg_core::clustering::{gap_pool, kmeans_fit_detailed, ClusterModel, KMeansConfig};
use fseg_core::tensor_io::{read_fst, DenseMatrix, Fst};
use rayon::prelude::*;

use crate::files::{fst_inputs, write_json};
use crate::{ClusterFitArgs, Context, Record};

/// Feature vectors contributed by one file.
fn vectors(fst: Fst) -> Vec<Vec<f32>> {
    match fst {
        Fst::Vector(v) => vec![v],
        Fst::Matrix(m) => m.rows().map(|r| r.to_vec()).collect(),
        Fst::Tensor(t) => vec![gap_pool(&t)],
        Fst::Labels(_) => Vec::new(),
    }
}

pub fn run(ctx: &Context, args: &ClusterFitArgs) -> Result<Record> {
    let files = fst_inputs(&args.features)?;
    let loaded: Vec<Result<Vec<Vec<f32>>>> = ctx.pool.install(|| {
        files
            .par_iter()
            .map(|p| {
                let fst = read_fst(p).with_context(|| format!("reading {}", p.display()))?;
                if matches!(fst, Fst::Labels(_)) {
                    bail!("{} holds a label mask, not features", p.display());
                }
                Ok(vectors(fst))
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in loaded {
        rows.extend(r?);
    }
    if let Some(first) = rows.first() {
        let c = first.len();
        if let Some(i) = rows.iter().position(|r| r.len() != c) {
            bail!("mixed channel counts: vector {i} has {} channels, expected {c}", rows[i].len());
        }
    }
    if rows.len() < args.k {
        bail!(fseg_core::Error::InsufficientData(format!("{} feature vectors for k = {}", rows.len(), args.k)));
    }
    let points = DenseMatrix::from_rows(&rows)?;
    let cfg = KMeansConfig { k: args.k, seed: ctx.seed, max_iters: args.max_iters, tol: args.tol, n_init: args.n_init };
    let fit = kmeans_fit_detailed(&points, &cfg)?;
    log::info!(
        "event=kmeans_fit k={} points={} inertia={} iters={}",
        args.k,
        points.n_rows(),
        fit.inertia,
        fit.n_iters
    );

    let mut model: ClusterModel = fit.model;
    model.insert_meta("features", args.features.display().to_string());
    model.insert_meta("n_files", files.len().to_string());
    model.insert_meta("channels", points.n_cols().to_string());
    for (k, v) in &args.meta {
        model.insert_meta(k.clone(), v.clone());
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        crate::files::ensure_dir(parent)?;
    }
    model.save(&args.out)?;
    let (fst_path, meta_path) = ClusterModel::paths(&args.out);
    let manifest_path = PathBuf::from(format!("{}.manifest.json", fst_path.with_extension("").display()));

    let trace_path = PathBuf::from(format!("{}.trace.json", fst_path.with_extension("").display()));
    write_json(
        &trace_path,
        &serde_json::json!({ "inertia": fit.inertia, "n_iters": fit.n_iters, "inertia_trace": fit.inertia_trace }),
    )?;
    Ok(Record {
        params: serde_json::to_value(args)?,
        inputs: files,
        outputs: vec![fst_path, meta_path, trace_path],
        failures: Vec::new(),
        manifest_path: Some(manifest_path),
    })
}
