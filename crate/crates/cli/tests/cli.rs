mod common;

use std::fs;
use std::path::Path;

use common::*;
use fseg_cli::manifest::RunManifest;
use fseg_core::clustering::ClusterModel;
use fseg_core::tensor_io::{read_fst, write_fst, DenseMatrix, LabelMask};
use fseg_testkit::fixtures::rng;
use serde_json::Value;

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_model(prefix: &Path, centers: &[Vec<f32>]) {
    ClusterModel::new(DenseMatrix::from_rows(centers).unwrap(), Default::default()).unwrap().save(prefix).unwrap();
}

#[test]
fn cluster_fit_separates_two_groups_of_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let feats = subdir(dir.path(), "pooled");
    let vectors: [&[f32]; 4] = [&[1.0, 0.0], &[0.9, 0.1], &[0.0, 1.0], &[0.1, 0.9]];
    for (i, v) in vectors.iter().enumerate() {
        write_fst(feats.join(format!("v{i}.fst")), *v).unwrap();
    }
    let prefix = dir.path().join("model");
    let out = fseg([
        "cluster-fit",
        "--features",
        feats.to_str().unwrap(),
        "--k",
        "2",
        "--meta",
        "backbone=test",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let model = ClusterModel::load(&prefix).unwrap();
    assert_eq!(model.k(), 2);
    assert_eq!(model.meta()["backbone"], "test");
    let first = model.centers().row(0)[0];
    assert!((first - 0.95).abs() < 1e-6 || (first - 0.05).abs() < 1e-6);
    let manifest = RunManifest::read(&dir.path().join("model.manifest.json")).unwrap();
    assert_eq!(manifest.command, "cluster-fit");
    assert_eq!(manifest.inputs.len(), 4);
    assert!(manifest.failures.is_empty());
}

#[test]
fn cluster_fit_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let empty = subdir(dir.path(), "empty");
    let prefix = dir.path().join("m");
    let out =
        fseg(["cluster-fit", "--features", empty.to_str().unwrap(), "--k", "2", "--out", prefix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no .fst files"));
}

#[test]
fn segment_recovers_stripes_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(5);
    let prototypes: Vec<Vec<f32>> = (0..3).map(|g| banded_prototype(&mut r, g, 3, 4)).collect();
    let (data, cats) = striped_tile(&mut r, &prototypes, &[2, 0, 1], 6, 9, 0.02);
    let tiles = subdir(dir.path(), "tiles");
    write_tensor(&tiles.join("t.fst"), 6, 9, 12, data);
    let model = dir.path().join("model");
    write_model(&model, &prototypes);
    for mode in [&["fixed-h"][..], &["full-nmf", "--k-concepts", "3"]] {
        let out_dir = dir.path().join(format!("out-{}", mode[0]));
        let mut args = vec!["segment", "--features", tiles.to_str().unwrap(), "--model", model.to_str().unwrap()];
        args.extend(["--resize", "12x18", "--out", out_dir.to_str().unwrap(), "--mode"]);
        args.extend(mode);
        let out = fseg(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        let mask = read_fst(out_dir.join("t.mask.fst")).unwrap().into_labels().unwrap();
        assert_eq!(mask.dims(), (12, 18));
        let expected: Vec<u32> = upsample(&cats, 6, 9, 2).into_iter().map(u32::from).collect();
        assert_eq!(mask.labels(), &expected[..], "mode {}", mode[0]);
        for name in ["t.concepts.fst", "t.mask.pgm", "t.json", "manifest.json"] {
            assert!(out_dir.join(name).is_file(), "{name}");
        }
        assert_eq!(json(&out_dir.join("t.json"))["mask_dims"], serde_json::json!([12, 18]));
    }
}

#[test]
fn full_nmf_without_rank_is_a_usage_error() {
    let out = fseg(["segment", "--features", "x", "--model", "m", "--mode", "full-nmf", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn segment_directory_writes_one_mask_set_per_tile() {
    let dir = tempfile::tempdir().unwrap();
    let tiles = subdir(dir.path(), "tiles");
    let mut r = rng(9);
    let prototypes: Vec<Vec<f32>> = (0..2).map(|g| banded_prototype(&mut r, g, 2, 3)).collect();
    for i in 0..10 {
        let (data, _) = striped_tile(&mut r, &prototypes, &[i % 2, 1 - i % 2], 4, 4, 0.05);
        write_tensor(&tiles.join(format!("tile{i}.fst")), 4, 4, 6, data);
    }
    let model = dir.path().join("model");
    write_model(&model, &prototypes);
    let out_dir = dir.path().join("masks");
    let out = fseg([
        "--jobs",
        "3",
        "segment",
        "--features",
        tiles.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--mode",
        "fixed-h",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let files = tree(&out_dir);
    assert_eq!(files.iter().filter(|f| f.to_string_lossy().ends_with(".mask.fst")).count(), 10);
    assert_eq!(files.iter().filter(|f| f.to_string_lossy().ends_with("manifest.json")).count(), 1);
    let manifest = RunManifest::read(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.jobs, 3);
    assert_eq!(manifest.outputs.len(), 50);
}

#[test]
fn segment_collects_failures_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let tiles = subdir(dir.path(), "tiles");
    write_tensor(&tiles.join("good.fst"), 2, 2, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    fs::write(tiles.join("bad.fst"), b"FST").unwrap();
    let model = dir.path().join("model");
    write_model(&model, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let out_dir = dir.path().join("out");
    let out = fseg([
        "segment",
        "--features",
        tiles.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--mode",
        "fixed-h",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out_dir.join("good.mask.fst").is_file());
    let manifest = RunManifest::read(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.failures.len(), 1);
    assert!(manifest.failures[0].item.ends_with("bad.fst"));
}

/// Cluster 0 covers 90 pixels of category 0 and 10 of category 1; cluster 1
/// covers 5 of each.
fn write_frequency_fixture(root: &Path) -> (String, String, String) {
    let (pred, gt) = (subdir(root, "pred"), subdir(root, "gt"));
    let mut clusters = vec![0u32; 100];
    clusters.extend([1; 10]);
    let mut cats = vec![0u8; 90];
    cats.extend([1; 10]);
    cats.extend([0; 5]);
    cats.extend([1; 5]);
    write_fst(pred.join("a.mask.fst"), &LabelMask::new(10, 11, 2, clusters).unwrap()).unwrap();
    write_gt(&gt.join("a.png"), 10, 11, cats);
    let palette = root.join("palette.txt");
    write_palette(&palette, 2);
    let s = |p: &Path| p.to_str().unwrap().to_string();
    (s(&pred), s(&gt), s(&palette))
}

#[test]
fn eval_match_plain_and_normalized_mappings() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt, palette) = write_frequency_fixture(dir.path());
    for (flag, expected) in [(None, [0, 0]), (Some("--normalized"), [0, 1])] {
        let out_dir = dir.path().join(format!("eval-{}", flag.is_some()));
        let mut args = vec!["eval-match", "--pred", &pred, "--gt", &gt, "--palette", &palette];
        args.extend(flag);
        args.extend(["--out", out_dir.to_str().unwrap()]);
        let out = fseg(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        assert_eq!(json(&out_dir.join("mapping.json"))["map"], serde_json::json!(expected));
        let freq = fs::read_to_string(out_dir.join("frequency.csv")).unwrap();
        assert_eq!(freq, "cluster,0,1\n0,90,10\n1,5,5\n");
    }
}

#[test]
fn eval_match_four_pixel_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = (subdir(dir.path(), "pred"), subdir(dir.path(), "gt"));
    write_fst(pred.join("x.mask.fst"), &LabelMask::new(2, 2, 2, vec![0, 0, 1, 1]).unwrap()).unwrap();
    write_gt(&gt.join("x.png"), 2, 2, vec![0, 1, 1, 1]);
    let palette = dir.path().join("p.txt");
    write_palette(&palette, 2);
    let out_dir = dir.path().join("eval");
    let out = fseg([
        "eval-match",
        "--pred",
        pred.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--palette",
        palette.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&out_dir.join("f1.json"));
    assert!((report["macro_f1"].as_f64().unwrap() - 11.0 / 15.0).abs() < 1e-12);
    assert!((report["f1_0"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((report["f1_1"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(report["micro_f1"].as_f64().unwrap(), 0.75);
    let csv = fs::read_to_string(out_dir.join("f1.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("macro,"));
}

#[test]
fn eval_match_reports_unpaired_files() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt, palette) = write_frequency_fixture(dir.path());
    write_gt(&Path::new(&gt).join("orphan.png"), 2, 2, vec![0; 4]);
    let out_dir = dir.path().join("eval");
    let out =
        fseg(["eval-match", "--pred", &pred, "--gt", &gt, "--palette", &palette, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out_dir.join("f1.json").is_file());
    let manifest = RunManifest::read(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.failures.len(), 1);
    assert!(manifest.failures[0].item.ends_with("orphan.png"));
}

#[test]
fn eval_match_with_empty_gt_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, _, palette) = write_frequency_fixture(dir.path());
    let empty = subdir(dir.path(), "none");
    let out = fseg([
        "eval-match",
        "--pred",
        &pred,
        "--gt",
        empty.to_str().unwrap(),
        "--palette",
        &palette,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no ground-truth images"));
}

#[test]
fn eval_probe_on_separable_corpus_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let (features, gt, palette) = separable_corpus(dir.path(), &mut rng(21), 6, 3);
    let out_dir = dir.path().join("probe");
    let out = fseg([
        "eval-probe",
        "--features",
        features.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--palette",
        palette.to_str().unwrap(),
        "--mode",
        "full-nmf",
        "--k-concepts",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&out_dir.join("f1.json"))["macro_f1"].as_f64(), Some(1.0));
    let summary = json(&out_dir.join("probe_summary.json"));
    assert_eq!(summary["examples"], 18);
    assert_eq!(summary["converged"], true);
    let weights = read_fst(out_dir.join("probe_weights.fst")).unwrap().into_matrix().unwrap();
    assert_eq!((weights.n_rows(), weights.n_cols()), (3, 12));
}

#[test]
fn eval_probe_with_unreachable_threshold_reports_empty_probe() {
    let dir = tempfile::tempdir().unwrap();
    let (features, gt, palette) = separable_corpus(dir.path(), &mut rng(4), 2, 2);
    // Scramble ground truth so that no concept is pure.
    for t in 0..2 {
        let codes = (0..256).map(|i| ((i * 7 + t) % 3 % 2) as u8).collect();
        write_gt(&gt.join(format!("tile_{t:02}.png")), 16, 16, codes);
    }
    let out = fseg([
        "eval-probe",
        "--features",
        features.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--palette",
        palette.to_str().unwrap(),
        "--mode",
        "full-nmf",
        "--k-concepts",
        "2",
        "--threshold",
        "1.0",
        "--out",
        dir.path().join("probe").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("probe set is empty"), "{}", stderr(&out));
}

#[test]
fn info_prints_headers() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.fst");
    let m = dir.path().join("m.fst");
    write_tensor(&t, 2, 3, 4, vec![0.0; 24]);
    write_fst(&m, &LabelMask::new(2, 2, 5, vec![0, 1, 2, 3]).unwrap()).unwrap();
    let out = fseg(["info".as_ref(), t.as_os_str(), m.as_os_str()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].ends_with("version=1 dtype=f32 ndim=3 dims=2x3x4"), "{}", lines[0]);
    assert!(lines[1].ends_with("dims=2x2 n_labels=5"), "{}", lines[1]);
}

#[test]
fn outputs_do_not_depend_on_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let (features, gt, palette) = separable_corpus(dir.path(), &mut rng(12), 6, 3);
    let run = |jobs: &str| {
        let out_dir = dir.path().join(format!("jobs{jobs}"));
        let (masks, probe) = (out_dir.join("masks"), out_dir.join("probe"));
        let model = dir.path().join("model");
        if !model.with_extension("fst").exists() {
            let out = fseg([
                "cluster-fit",
                "--features",
                features.to_str().unwrap(),
                "--k",
                "3",
                "--out",
                model.to_str().unwrap(),
            ]);
            assert!(out.status.success(), "{}", stderr(&out));
        }
        let out = fseg([
            "--jobs",
            jobs,
            "segment",
            "--features",
            features.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--mode",
            "full-nmf",
            "--k-concepts",
            "3",
            "--out",
            masks.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let out = fseg([
            "--jobs",
            jobs,
            "eval-probe",
            "--features",
            features.to_str().unwrap(),
            "--gt",
            gt.to_str().unwrap(),
            "--palette",
            palette.to_str().unwrap(),
            "--mode",
            "full-nmf",
            "--k-concepts",
            "3",
            "--out",
            probe.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        out_dir
    };
    let (one, four) = (run("1"), run("4"));
    let files = tree(&one);
    assert_eq!(files, tree(&four));
    for f in files.iter().filter(|f| !f.ends_with("manifest.json")) {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(four.join(f)).unwrap(), "{}", f.display());
    }
}
