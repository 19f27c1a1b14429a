//! Command-line behaviour on small configurations.

use std::path::Path;
use std::process::{Command, Output};

use slowflow::datagen::read_csv;

const SMALL: &str = r#"{
    "experiment": "structural",
    "structural": { "length": 512 },
    "model": { "layers": 2, "hidden": [8], "window": 64 },
    "training": { "epochs": 3 },
    "seeds": [0, 1]
}"#;

fn slowflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowflow"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn slowflow")
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.json");
    std::fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn bad_arguments_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = slowflow(&["reproduce", "--experiment", "bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = slowflow(&["reproduce", "--experiment", "structural", "--epochs", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epochs"));
    let o = slowflow(&["reproduce", "--experiment", "structural", "--methods", "PCA"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{ "experiment": "structural", "epochz": 3 }"#).unwrap();
    let o = slowflow(&["generate", "--config", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_stage_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = slowflow(&["train", "--out", "empty"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("generate"), "{err}");
    assert!(dir.path().join("empty/failures.log").exists());
}

#[test]
fn staged_run_matches_one_shot_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for stage in ["generate", "train", "evaluate", "traces"] {
        let o = slowflow(&[stage, "--config", &cfg, "--out", "staged"], dir.path());
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = slowflow(&["reproduce", "--experiment", "structural", "--config", &cfg, "--out", "oneshot"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let staged = std::fs::read_to_string(dir.path().join("staged/summary.csv")).unwrap();
    let oneshot = std::fs::read_to_string(dir.path().join("oneshot/summary.csv")).unwrap();
    assert_eq!(staged, oneshot);
    assert!(staged.starts_with("method,mean,std,n\nICA,"));
    assert_eq!(staged.lines().count(), 5);

    for seed in ["seed_0", "seed_1"] {
        let s = dir.path().join("staged").join(seed);
        for f in ["dataset.csv", "manifest.json", "mixing.ckpt", "fbm.ckpt", "slow_fbm.ckpt", "scores.csv", "diagnostics.json", "traces.csv"] {
            assert!(s.join(f).exists(), "{seed}/{f}");
        }
    }
}

#[test]
fn traces_cover_every_panel_and_channel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = slowflow(&["reproduce", "--experiment", "structural", "--config", &cfg, "--seed", "3", "--out", "run"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let seed_dir = dir.path().join("run/seed_3");
    let (sources, _) = read_csv::<f64>(&seed_dir.join("dataset.csv")).unwrap();
    let text = std::fs::read_to_string(seed_dir.join("traces.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 4 * sources.rows());

    // Truth rows hold raw source values, one channel per source.
    let mut truth_cols: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for r in rows.iter().filter(|r| r[2] == "truth") {
        let channel: usize = r[1].parse().unwrap();
        truth_cols[channel - 1].push(r[3].parse().unwrap());
    }
    let mut matched = [false; 4];
    for col in &truth_cols {
        assert_eq!(col.len(), sources.rows());
        let j = (0..4).find(|&j| (0..col.len()).all(|t| col[t] == sources.get(t, j))).expect("truth channel");
        matched[j] = true;
    }
    assert!(matched.iter().all(|&m| m));

    // Channels are numbered slowest first.
    let msi = |c: &[f64]| c.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / c.iter().map(|v| v * v).sum::<f64>();
    let slow: Vec<f64> = truth_cols.iter().map(|c| msi(c)).collect();
    assert!(slow.windows(2).all(|w| w[0] <= w[1]), "{slow:?}");
}
