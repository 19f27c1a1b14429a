//! Run-directory layout and the staged pipeline built on it.
//!
//! ```text
//! <out>/config.json  scores.csv  summary.csv  failures.log
//! <out>/seed_<s>/config.json  dataset.csv  manifest.json  mixing.ckpt
//!                fbm.ckpt  fbm_nll.csv  slow_fbm.ckpt  slow_fbm_nll.csv
//!                estimates/<method>.csv  scores.csv  diagnostics.json  traces.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{error, info};
use slowflow::datagen::{read_csv, ConditioningReport, DatasetManifest};
use slowflow::eval::{AggregateScore, Method};
use slowflow::flows::{checkpoint, TrainReport};
use slowflow::io::write_atomic;
use slowflow::{Dataset, FlowStack, Series};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{self, Diagnostics};
use crate::report::{parse_scores_csv, scores_csv, summarize, summary_csv, ScoreRow};
use crate::traces::traces_csv;

pub const FBM: &str = "fbm";
pub const SLOW_FBM: &str = "slow_fbm";

pub fn method_slug(m: Method) -> &'static str {
    match m {
        Method::Ica => "ica",
        Method::FbmIca => "fbm_ica",
        Method::SlowFbm => "slow_fbm",
        Method::SlowFbmIca => "slow_fbm_ica",
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn missing(stage: &str, path: &Path) -> CliError {
    CliError::Failed(format!("missing artifact {} (run the `{stage}` stage first)", path.display()))
}

fn read_text(stage: &str, path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|_| missing(stage, path))
}

/// `t,c1..cd` with absolute time indices.
pub fn series_csv(x: &Series, t0: usize) -> String {
    let mut out = String::from("t");
    for j in 1..=x.cols() {
        let _ = write!(out, ",c{j}");
    }
    out.push('\n');
    for t in 0..x.rows() {
        let _ = write!(out, "{}", t0 + t);
        for v in x.row(t) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_series_csv(text: &str) -> Result<(usize, Series), CliError> {
    let bad = |m: String| CliError::Failed(format!("estimate file: {m}"));
    let mut lines = text.lines();
    let d = lines.next().ok_or_else(|| bad("empty".into()))?.split(',').count() - 1;
    let mut t0 = None;
    let mut data = Vec::new();
    for line in lines {
        let mut f = line.split(',');
        let t: usize = f.next().unwrap_or("").parse().map_err(|_| bad(format!("bad row `{line}`")))?;
        t0.get_or_insert(t);
        for v in f {
            data.push(v.parse::<f64>().map_err(|_| bad(format!("bad value in `{line}`")))?);
        }
    }
    let rows = data.len().checked_div(d).unwrap_or(0);
    Ok((t0.unwrap_or(0), Series::new(rows, d, data)?))
}

#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.root.join(format!("seed_{seed}"))
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn scores_path(&self) -> PathBuf {
        self.root.join("scores.csv")
    }

    pub fn failures_path(&self) -> PathBuf {
        self.root.join("failures.log")
    }

    pub fn traces_path(&self, seed: u64) -> PathBuf {
        self.seed_dir(seed).join("traces.csv")
    }

    pub fn estimate_path(&self, seed: u64, m: Method) -> PathBuf {
        self.seed_dir(seed).join("estimates").join(format!("{}.csv", method_slug(m)))
    }

    fn seed_config(cfg: &ExperimentConfig, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seeds: vec![seed],
            ..cfg.clone()
        }
    }

    pub fn write_config(&self, cfg: &ExperimentConfig) -> Result<(), CliError> {
        write_text(&self.config_path(), &cfg.to_json())
    }

    pub fn write_prepared(
        &self,
        cfg: &ExperimentConfig,
        seed: u64,
        ds: &Dataset,
        mixing: &slowflow::MixingModel,
    ) -> Result<(), CliError> {
        let dir = self.seed_dir(seed);
        write_text(&dir.join("config.json"), &Self::seed_config(cfg, seed).to_json())?;
        ds.write_csv(&dir.join("dataset.csv"))?;
        checkpoint::save_path(&mixing.stack, &dir.join("mixing.ckpt"))?;
        let manifest = DatasetManifest {
            experiment: cfg.experiment.name().into(),
            seed,
            length: ds.len(),
            dim: ds.dim(),
            boundary: ds.boundary,
            window: ds.window,
            mixing_seed: mixing.seed,
            mixing_checkpoint: Some("mixing.ckpt".into()),
            csv: "dataset.csv".into(),
            source_mean: ds.source_mean.clone(),
            source_std: ds.source_std.clone(),
        };
        let json = serde_json::json!({ "dataset": manifest, "conditioning": mixing.report });
        write_text(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&json).expect("json") + "\n"))
    }

    pub fn load_dataset(&self, seed: u64) -> Result<Dataset, CliError> {
        let dir = self.seed_dir(seed);
        let manifest_path = dir.join("manifest.json");
        let value: serde_json::Value = serde_json::from_str(&read_text("generate", &manifest_path)?)
            .map_err(|e| CliError::Failed(format!("{}: {e}", manifest_path.display())))?;
        let m: DatasetManifest = serde_json::from_value(value["dataset"].clone())
            .map_err(|e| CliError::Failed(format!("{}: {e}", manifest_path.display())))?;
        let _: Option<ConditioningReport> = serde_json::from_value(value["conditioning"].clone()).ok();
        let csv = dir.join(&m.csv);
        if !csv.exists() {
            return Err(missing("generate", &csv));
        }
        let (sources, observed) = read_csv::<f64>(&csv)?;
        if sources.rows() != m.length || sources.cols() != m.dim {
            return Err(CliError::Failed(format!("{} disagrees with its manifest", csv.display())));
        }
        Ok(Dataset {
            sources,
            observed,
            boundary: m.boundary,
            window: m.window,
            source_mean: m.source_mean,
            source_std: m.source_std,
        })
    }

    pub fn write_model(&self, seed: u64, name: &str, stack: &FlowStack, report: &TrainReport) -> Result<(), CliError> {
        let dir = self.seed_dir(seed);
        checkpoint::save_path(stack, &dir.join(format!("{name}.ckpt")))?;
        let mut curve = String::from("epoch,nll\n");
        for (e, v) in report.nll.iter().enumerate() {
            let _ = writeln!(curve, "{e},{v}");
        }
        write_text(&dir.join(format!("{name}_nll.csv")), &curve)
    }

    pub fn load_model(&self, seed: u64, name: &str) -> Result<FlowStack, CliError> {
        let path = self.seed_dir(seed).join(format!("{name}.ckpt"));
        if !path.exists() {
            return Err(missing("train", &path));
        }
        Ok(checkpoint::load_path(&path)?)
    }

    pub fn write_evaluation(
        &self,
        seed: u64,
        ds: &Dataset,
        estimates: &BTreeMap<Method, Series>,
        scores: &BTreeMap<Method, f64>,
        diagnostics: &Diagnostics,
    ) -> Result<(), CliError> {
        let t0 = ds.eval_range().start;
        for (&m, est) in estimates {
            write_text(&self.estimate_path(seed, m), &series_csv(est, t0))?;
        }
        let rows = score_rows(seed, scores);
        write_text(&self.seed_dir(seed).join("scores.csv"), &scores_csv(&rows))?;
        write_text(
            &self.seed_dir(seed).join("diagnostics.json"),
            &(serde_json::to_string_pretty(diagnostics).expect("json") + "\n"),
        )?;
        if estimates.contains_key(&Method::FbmIca) && estimates.contains_key(&Method::SlowFbmIca) {
            self.write_traces(seed)?;
        }
        Ok(())
    }

    pub fn load_estimate(&self, seed: u64, m: Method) -> Result<(usize, Series), CliError> {
        parse_series_csv(&read_text("evaluate", &self.estimate_path(seed, m))?)
    }

    /// Traces from stored artifacts: truth from the dataset, FBM+ICA and
    /// S-FBM+ICA estimates from the evaluation stage.
    pub fn write_traces(&self, seed: u64) -> Result<PathBuf, CliError> {
        let ds = self.load_dataset(seed)?;
        let absent: Vec<String> = [Method::FbmIca, Method::SlowFbmIca]
            .iter()
            .map(|&m| self.estimate_path(seed, m))
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !absent.is_empty() {
            return Err(CliError::Failed(format!(
                "traces need the `evaluate` stage with FBM+ICA and S-FBM+ICA; missing {}",
                absent.join(", ")
            )));
        }
        let (t0, fbm) = self.load_estimate(seed, Method::FbmIca)?;
        let (_, slow) = self.load_estimate(seed, Method::SlowFbmIca)?;
        let truth = ds.sources.slice_rows(t0, t0 + fbm.rows());
        let path = self.traces_path(seed);
        write_text(&path, &traces_csv(&truth, &fbm, &slow, t0)?)?;
        Ok(path)
    }

    /// Combines per-seed score files into the top-level tables.
    pub fn write_tables(&self, seeds: &[u64]) -> Result<Vec<AggregateScore>, CliError> {
        let mut rows = Vec::new();
        for &s in seeds {
            let p = self.seed_dir(s).join("scores.csv");
            if let Ok(text) = std::fs::read_to_string(&p) {
                rows.extend(parse_scores_csv(&text)?);
            }
        }
        let aggs = summarize(&rows)?;
        write_text(&self.scores_path(), &scores_csv(&rows))?;
        write_text(&self.summary_path(), &summary_csv(&aggs))?;
        Ok(aggs)
    }
}

pub fn score_rows(seed: u64, scores: &BTreeMap<Method, f64>) -> Vec<ScoreRow> {
    scores
        .iter()
        .map(|(&method, &matched_mean)| ScoreRow {
            method,
            seed,
            matched_mean,
        })
        .collect()
}

/// Runs `f` for every seed, logging failures to `failures.log` and
/// continuing with the remaining seeds.
fn for_each_seed(
    cfg: &ExperimentConfig,
    run: &RunDir,
    stage: &str,
    mut f: impl FnMut(u64) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut failures = String::new();
    for &seed in &cfg.seeds {
        if let Err(e) = f(seed) {
            error!("seed {seed}: {stage} failed: {e}");
            let _ = writeln!(failures, "seed {seed}: {stage}: {e}");
        }
    }
    if failures.is_empty() {
        let _ = std::fs::remove_file(run.failures_path());
        return Ok(());
    }
    write_text(&run.failures_path(), &failures)?;
    Err(CliError::Failed(format!(
        "{stage} failed for {} seed(s); see {}",
        failures.lines().count(),
        run.failures_path().display()
    )))
}

pub fn generate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let run = RunDir::new(&cfg.out);
    run.write_config(cfg)?;
    for_each_seed(cfg, &run, "generate", |seed| {
        let (ds, mixing) = experiment::prepare(cfg, seed)?;
        run.write_prepared(cfg, seed, &ds, &mixing)
    })
}

pub fn train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let run = RunDir::new(&cfg.out);
    for_each_seed(cfg, &run, "train", |seed| {
        let ds = run.load_dataset(seed)?;
        for (needed, slow, name) in [(cfg.needs_fbm(), false, FBM), (cfg.needs_slow_fbm(), true, SLOW_FBM)] {
            if needed {
                let (stack, report) = experiment::fit_flow(cfg, &ds, slow, seed)?;
                run.write_model(seed, name, &stack, &report)?;
            }
        }
        Ok(())
    })
}

pub fn evaluate(cfg: &ExperimentConfig) -> Result<Vec<AggregateScore>, CliError> {
    cfg.validate()?;
    let run = RunDir::new(&cfg.out);
    let result = for_each_seed(cfg, &run, "evaluate", |seed| {
        let ds = run.load_dataset(seed)?;
        let fbm = cfg.needs_fbm().then(|| run.load_model(seed, FBM)).transpose()?;
        let slow = cfg.needs_slow_fbm().then(|| run.load_model(seed, SLOW_FBM)).transpose()?;
        let est = experiment::estimate(cfg, &ds, fbm.as_ref(), slow.as_ref(), seed)?;
        let scores = experiment::score(&ds, &est)?;
        let diag = experiment::diagnose(&ds, fbm.as_ref(), slow.as_ref(), &est)?;
        run.write_evaluation(seed, &ds, &est, &scores, &diag)
    });
    let aggs = run.write_tables(&cfg.seeds)?;
    result.map(|_| aggs)
}

/// Every stage for every seed, writing all artifacts.
pub fn reproduce(cfg: &ExperimentConfig) -> Result<Vec<AggregateScore>, CliError> {
    cfg.validate()?;
    let run = RunDir::new(&cfg.out);
    run.write_config(cfg)?;
    let result = for_each_seed(cfg, &run, "reproduce", |seed| {
        let o = experiment::run_seed(cfg, seed)?;
        run.write_prepared(cfg, seed, &o.dataset, &o.mixing)?;
        for (name, model) in [(FBM, &o.fbm), (SLOW_FBM, &o.slow_fbm)] {
            if let Some((stack, report)) = model {
                run.write_model(seed, name, stack, report)?;
            }
        }
        run.write_evaluation(seed, &o.dataset, &o.estimates, &o.scores, &o.diagnostics)?;
        info!("seed {seed}: {:?}", o.scores);
        Ok(())
    });
    let aggs = run.write_tables(&cfg.seeds)?;
    result.map(|_| aggs)
}

pub fn traces(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let run = RunDir::new(&cfg.out);
    let mut written = Vec::new();
    for_each_seed(cfg, &run, "traces", |seed| {
        written.push(run.write_traces(seed)?);
        Ok(())
    })?;
    Ok(written)
}
