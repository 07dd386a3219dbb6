mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;

use dppn::ablation::{run_ablation, AblationGrid};
use dppn::checkpoint::Checkpoint;
use dppn::dataset::Domain;
use dppn::error::Error;
use dppn::localization::export_localization;
use dppn::metrics::{evaluate_gzsl, evaluate_model, harmonic_mean, mca, GzslReport};
use dppn::oracle::oracle_for;
use dppn::synth::{generate_synthetic, SyntheticConfig};

fn noiseless(samples_per_class: usize) -> dppn::dataset::GzslDataset {
    generate_synthetic(&SyntheticConfig {
        noise: 0.0,
        samples_per_class,
        ..SyntheticConfig::reference()
    })
    .unwrap()
}

#[test]
fn mca_examples() {
    assert_eq!(mca(&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]).unwrap(), 100.0);
    // Class 0: 3 of 3 right; class 1: 0 of 1. Sample mean would be 75.
    assert_eq!(mca(&[0, 0, 0, 0], &[0, 0, 0, 1], &[0, 1]).unwrap(), 50.0);
    let e = mca(&[0], &[0], &[0, 7]).unwrap_err();
    assert!(e.to_string().contains('7'), "{e}");
    assert!(mca(&[0], &[0, 1], &[0, 1]).is_err());
}

#[test]
fn harmonic_mean_examples() {
    assert!((harmonic_mean(70.2, 77.1) - 73.5).abs() <= 0.05);
    assert!((harmonic_mean(50.5, 84.4) - 63.2).abs() <= 0.05);
    assert_eq!(harmonic_mean(42.0, 42.0), 42.0);
    assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    assert_eq!(harmonic_mean(0.0, 90.0), 0.0);
}

#[test]
fn gzsl_needs_unseen_samples() {
    let mut ds = common::small_dataset(1);
    ds.test.retain(|s| s.domain == Domain::Seen);
    ds.planted = None;
    let preds: Vec<usize> = ds.test.iter().map(|s| s.label).collect();
    assert!(matches!(
        GzslReport::from_predictions(&ds, &preds),
        Err(Error::Eval(_))
    ));
}

#[test]
fn report_is_consistent_and_splits_domains() {
    let ds = common::small_dataset(2);
    // Predict the true label for even samples, the first unseen id otherwise.
    let preds: Vec<usize> = ds
        .test
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if i % 2 == 0 {
                s.label
            } else {
                ds.unseen_ids[0]
            }
        })
        .collect();
    let r = GzslReport::from_predictions(&ds, &preds).unwrap();
    assert!((r.h - harmonic_mean(r.mca_u, r.mca_s)).abs() < 1e-9);
    let n_seen = ds.test.iter().filter(|s| s.domain == Domain::Seen).count();
    assert_eq!(r.n_seen_samples, n_seen);
    assert_eq!(r.n_seen_samples + r.n_unseen_samples, ds.test.len());
    let expected_sau = ds
        .test
        .iter()
        .zip(&preds)
        .filter(|(s, p)| s.domain == Domain::Seen && ds.unseen_ids.contains(p))
        .count();
    assert_eq!(r.seen_as_unseen, expected_sau);
    assert_eq!(r.per_class.len(), 12);
}

#[test]
fn oracle_scores_high_on_noiseless_data() {
    let ds = noiseless(40);
    let r = evaluate_model(&oracle_for(&ds, 3.0, 1).unwrap(), &ds).unwrap();
    assert!(r.mca_s > 90.0 && r.mca_u > 90.0, "{r:?}");
}

#[test]
fn single_variant_ablation_and_determinism() {
    let ds = common::small_dataset(3);
    let grid = AblationGrid::parse("preset=synthetic-reference\nepochs=2\nonly: variant=pal K=1\n")
        .unwrap();
    let a = run_ablation(&grid, &ds, 1).unwrap();
    let csv = a.to_csv();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(csv.starts_with("variant,seed,mca_u,mca_s,h,status\n"));
    assert!(csv.lines().nth(1).unwrap().starts_with("only,0,"));
    assert!(a.median_h("only").is_some());
    assert!(run_ablation(&grid, &ds, 0).is_err());

    let grid = AblationGrid::parse(
        "preset=synthetic-reference\nepochs=2\na: variant=base\nb: variant=dppn K=2\n",
    )
    .unwrap();
    let x = run_ablation(&grid, &ds, 2).unwrap().to_csv();
    let y = run_ablation(&grid, &ds, 2).unwrap().to_csv();
    assert_eq!(x, y);
    assert_eq!(x.lines().count(), 5);
}

#[test]
fn failing_variant_is_marked_and_grid_continues() {
    let mut ds = common::small_dataset(4);
    let grid = AblationGrid::parse("epochs=1\nbatch=8\nok: variant=base\n").unwrap();
    // An unseen test category with no samples makes evaluation fail.
    let missing = ds.unseen_ids[0];
    ds.test.retain(|s| s.label != missing);
    ds.planted = None;
    let r = run_ablation(&grid, &ds, 1).unwrap();
    assert!(r.failed("ok"));
    assert!(r.to_csv().contains("failed: "));
}

fn read_pgm(path: &Path) -> (usize, usize, Vec<u8>) {
    let bytes = fs::read(path).unwrap();
    let text = String::from_utf8_lossy(&bytes[..bytes.len().min(32)]).to_string();
    let mut it = text.split_whitespace();
    assert_eq!(it.next(), Some("P5"));
    let w: usize = it.next().unwrap().parse().unwrap();
    let h: usize = it.next().unwrap().parse().unwrap();
    assert_eq!(it.next(), Some("255"));
    let pixels = bytes[bytes.len() - w * h..].to_vec();
    (w, h, pixels)
}

#[test]
fn localization_export_files() {
    let ds = noiseless(10);
    let ckpt = Checkpoint::new(oracle_for(&ds, 3.0, 2).unwrap(), 0);
    let dir = tempfile::tempdir().unwrap();
    let ids = [0, 5, ds.test.len() - 1];
    let exports = export_localization(&ckpt, &ds, &ids, dir.path()).unwrap();
    assert_eq!(exports.len(), 3);
    let planted = ds.planted.as_ref().unwrap();
    for e in &exports {
        assert_eq!((e.csv.len(), e.pgm.len()), (2, 2));
        for csv in &e.csv {
            let text = fs::read_to_string(csv).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next().unwrap().split(',').count(), 12);
            let rows: Vec<Vec<f64>> = lines
                .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
                .collect();
            assert_eq!(rows.len(), 16);
            for j in 0..12 {
                let sum: f64 = rows.iter().map(|r| r[j]).sum();
                assert!((sum - 1.0).abs() < 1e-6, "column {j} sums to {sum}");
            }
        }
        for (i, region) in planted[e.sample].iter().enumerate() {
            let Some(r) = *region else { continue };
            let (w, h, px) = read_pgm(&e.pgm[0][i]);
            assert_eq!((w, h), (4, 4));
            let brightest = (0..px.len())
                .max_by_key(|&p| (px[p], std::cmp::Reverse(p)))
                .unwrap();
            assert_eq!(brightest, r);
            assert_eq!(px[r], 255);
        }
    }

    let e = export_localization(&ckpt, &ds, &[ds.test.len()], dir.path()).unwrap_err();
    assert!(matches!(e, Error::Index { .. }), "{e}");
}

#[test]
fn constant_similarity_exports_black_image() {
    // All-zero features give uniform similarity columns.
    let mut ds = noiseless(4);
    for v in ds.test[0].features.data_mut() {
        *v = 0.0;
    }
    let ckpt = Checkpoint::new(oracle_for(&ds, 3.0, 1).unwrap(), 0);
    let dir = tempfile::tempdir().unwrap();
    let e = export_localization(&ckpt, &ds, &[0], dir.path()).unwrap();
    let (_, _, px) = read_pgm(&e[0].pgm[0][3]);
    assert!(px.iter().all(|&p| p == 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mca_matches_brute_force_tally(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40)) {
        let mut labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let mut preds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        // Make sure every class has a sample.
        labels.extend([0, 1, 2]);
        preds.extend([0, 2, 2]);
        let mut per: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for (p, y) in preds.iter().zip(&labels) {
            let e = per.entry(*y).or_default();
            e.1 += 1.0;
            if p == y {
                e.0 += 1.0;
            }
        }
        let brute = per.values().map(|(h, t)| 100.0 * h / t).sum::<f64>() / 3.0;
        prop_assert!((mca(&preds, &labels, &[0, 1, 2]).unwrap() - brute).abs() < 1e-9);
    }

    #[test]
    fn harmonic_mean_bounds(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
        let h = harmonic_mean(a, b);
        prop_assert!(h <= (a + b) / 2.0 + 1e-12);
        prop_assert!(h <= 2.0 * a.min(b) + 1e-12);
        prop_assert!(h >= 0.0);
        prop_assert!((h - harmonic_mean(b, a)).abs() < 1e-12);
    }
}

fn dppn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dppn"))
}

/// Asserts a failed run printed exactly one machine-parsable error line.
fn assert_error_line(out: &std::process::Output, kind: &str) {
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().last().unwrap_or("");
    assert!(
        line.starts_with(&format!("error kind={kind} message=\"")),
        "{err}"
    );
    assert!(line.ends_with('"'), "{err}");
}

#[test]
fn cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("synth.cfg"), "samples_per_class=6\nseed=3\n").unwrap();
    fs::write(
        d.join("train.cfg"),
        "preset=synthetic-reference\nK=2\nepochs=2\n",
    )
    .unwrap();
    fs::write(
        d.join("grid.cfg"),
        "preset=synthetic-reference\nepochs=1\nb: variant=base\np: variant=pal K=1\n",
    )
    .unwrap();

    let run = |args: &[&str]| {
        let out = dppn().args(args).current_dir(d).output().unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).to_string()
    };
    run(&["synth", "--config", "synth.cfg", "--out", "data"]);
    assert!(d.join("data/manifest.cfg").exists());

    let log = run(&[
        "train",
        "--config",
        "train.cfg",
        "--data",
        "data/manifest.cfg",
        "--out",
        "ckpt",
    ]);
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch")).count(), 2);
    assert!(d.join("ckpt/meta.cfg").exists());
    assert_eq!(
        fs::read_to_string(d.join("ckpt/train_log.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    let stdout = run(&[
        "eval",
        "--ckpt",
        "ckpt",
        "--data",
        "data/manifest.cfg",
        "--csv",
        "eval.csv",
    ]);
    assert!(stdout.contains("H "));
    let csv = fs::read_to_string(d.join("eval.csv")).unwrap();
    let h: f64 = csv
        .lines()
        .find_map(|l| l.strip_prefix("h,"))
        .unwrap()
        .parse()
        .unwrap();
    let ckpt = Checkpoint::load(d.join("ckpt")).unwrap();
    let ds = dppn::dataset::load_dataset(d.join("data/manifest.cfg")).unwrap();
    assert!((evaluate_gzsl(&ckpt, &ds).unwrap().h - h).abs() < 1e-6);

    run(&[
        "localize",
        "--ckpt",
        "ckpt",
        "--data",
        "data/manifest.cfg",
        "--samples",
        "0,3",
        "--out",
        "maps",
    ]);
    assert!(d.join("maps/sample3_k2_attr11.pgm").exists());
    assert!(d.join("maps/sample0_k1.csv").exists());

    let summary = run(&[
        "ablate",
        "--grid",
        "grid.cfg",
        "--data",
        "data/manifest.cfg",
        "--seeds",
        "1",
        "--out",
        "abl.csv",
    ]);
    assert_eq!(summary.lines().count(), 2);
    assert_eq!(
        fs::read_to_string(d.join("abl.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    // Failures.
    let out = dppn()
        .args(["eval", "--ckpt", "nope", "--data", "data/manifest.cfg"])
        .current_dir(d)
        .output()
        .unwrap();
    assert_error_line(&out, "io");
    let out = dppn()
        .args([
            "localize",
            "--ckpt",
            "ckpt",
            "--data",
            "data/manifest.cfg",
            "--samples",
            "9999",
            "--out",
            "maps",
        ])
        .current_dir(d)
        .output()
        .unwrap();
    assert_error_line(&out, "index");
    fs::write(d.join("bad.cfg"), "K=0\n").unwrap();
    let out = dppn()
        .args([
            "train",
            "--config",
            "bad.cfg",
            "--data",
            "data/manifest.cfg",
            "--out",
            "x",
        ])
        .current_dir(d)
        .output()
        .unwrap();
    assert_error_line(&out, "config");
    let out = dppn().args(["frobnicate"]).output().unwrap();
    assert_error_line(&out, "usage");
    assert_eq!(out.status.code(), Some(2));
}
