//! Data preparation, training and scoring for one seed at a time.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use slowflow::ad::Init;
use slowflow::datagen::{gen_structural, load_audio, make_mixing_with, synth_instruments, StructuralSpec};
use slowflow::eval::{score_sources, Method};
use slowflow::flows::{train, TrainConfig, TrainReport};
use slowflow::ica::{lagged_cov_diagnostic, mean_squared_increments, FastIcaConfig, IcaWarning};
use slowflow::ad::AdamConfig;
use slowflow::{Dataset, FlowStack, MixingModel, Series};

use crate::config::{ExperimentConfig, ExperimentKind, IcaFit};
use crate::error::CliError;

/// Raw (unstandardized) ground-truth sources for `seed`.
pub fn make_sources(cfg: &ExperimentConfig, seed: u64) -> Result<Series, CliError> {
    match cfg.experiment {
        ExperimentKind::Structural => Ok(gen_structural(&StructuralSpec {
            seed,
            ..cfg.structural.clone()
        })?),
        ExperimentKind::Audio => match &cfg.audio.paths {
            Some(paths) => {
                let a = load_audio::<f64, _>(paths, cfg.audio.length)?;
                for w in &a.warnings {
                    warn!("{w}");
                }
                Ok(a.sources)
            }
            None => {
                let set = synth_instruments(cfg.audio.length, cfg.audio.sample_rate, seed);
                Ok(Series::from_fn(cfg.audio.length, set.len(), |t, j| set[j].1[t]))
            }
        },
    }
}

pub fn mixing_seed(cfg: &ExperimentConfig, seed: u64) -> u64 {
    seed.wrapping_add(cfg.mixing.seed_offset)
}

pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, MixingModel), CliError> {
    let sources = make_sources(cfg, seed)?;
    let mixing = make_mixing_with(sources.cols(), cfg.mixing.depth, mixing_seed(cfg, seed), &cfg.mixing.params)?;
    info!(
        "seed {seed}: mixing log|det| in [{:.3}, {:.3}], affine residual {:.3}",
        mixing.report.min_logdet, mixing.report.max_logdet, mixing.report.residual_fraction
    );
    let ds = Dataset::build(&sources, &mixing, cfg.model.window, cfg.test_fraction())?;
    Ok((ds, mixing))
}

/// Fresh identity-initialized RealNVP, with a slow flow when `slow`.
///
/// Both variants start from the same coupling weights for a given seed.
pub fn initial_flow(cfg: &ExperimentConfig, d: usize, slow: bool, seed: u64) -> Result<FlowStack, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stack = FlowStack::realnvp(d, cfg.model.layers, &cfg.model.hidden, Init::FanIn, true, &mut rng)?;
    Ok(if slow { stack.with_slow_flow() } else { stack })
}

pub fn fit_flow(cfg: &ExperimentConfig, ds: &Dataset, slow: bool, seed: u64) -> Result<(FlowStack, TrainReport), CliError> {
    let mut stack = initial_flow(cfg, ds.dim(), slow, seed)?;
    let tc = TrainConfig {
        epochs: cfg.training.epochs,
        batch_windows: cfg.training.batch_windows,
        adam: AdamConfig {
            learning_rate: cfg.training.learning_rate,
            ..AdamConfig::default()
        },
        seed,
    };
    let report = train(&mut stack, &ds.train_windows(), &tc, false)?;
    info!(
        "seed {seed}: {} trained, final nll {:.4} in {:.1}s",
        if slow { "S-FBM" } else { "FBM" },
        report.final_nll().unwrap_or(f64::NAN),
        report.wall_clock_secs
    );
    Ok((stack, report))
}

/// ICA fitted on the configured rows of `z` and applied to its evaluation rows.
fn ica_estimate(cfg: &ExperimentConfig, ds: &Dataset, z: &Series, seed: u64, label: &str) -> Result<Series, CliError> {
    let tr = match cfg.ica_fit {
        IcaFit::Train => ds.train_range(),
        IcaFit::All => 0..ds.len(),
    };
    let ev = ds.eval_range();
    let fit = FastIcaConfig { seed, ..cfg.ica }.fit(&z.slice_rows(tr.start, tr.end))?;
    for w in &fit.warnings {
        match w {
            IcaWarning::NotConverged => warn!("seed {seed} {label}: FastICA hit max_iter"),
            IcaWarning::NearGaussian => warn!("seed {seed} {label}: a component is close to Gaussian"),
        }
    }
    Ok(fit.demixing.apply(&z.slice_rows(ev.start, ev.end))?)
}

/// Estimated sources on the evaluation region for every requested method.
pub fn estimate(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    fbm: Option<&FlowStack>,
    slow_fbm: Option<&FlowStack>,
    seed: u64,
) -> Result<BTreeMap<Method, Series>, CliError> {
    let ev = ds.eval_range();
    let mut out = BTreeMap::new();
    let missing = |what: &str| CliError::Failed(format!("missing {what} model"));
    for &m in &cfg.methods {
        let est = match m {
            Method::Ica => ica_estimate(cfg, ds, &ds.observed, seed, "ICA")?,
            Method::FbmIca => {
                let z = fbm.ok_or_else(|| missing("FBM"))?.encode_latent(&ds.observed)?;
                ica_estimate(cfg, ds, &z, seed, "FBM+ICA")?
            }
            Method::SlowFbm => slow_fbm
                .ok_or_else(|| missing("S-FBM"))?
                .encode_latent(&ds.observed)?
                .slice_rows(ev.start, ev.end),
            Method::SlowFbmIca => {
                let z = slow_fbm.ok_or_else(|| missing("S-FBM"))?.encode_latent(&ds.observed)?;
                ica_estimate(cfg, ds, &z, seed, "S-FBM+ICA")?
            }
        };
        out.insert(m, est);
    }
    Ok(out)
}

pub fn score(ds: &Dataset, estimates: &BTreeMap<Method, Series>) -> Result<BTreeMap<Method, f64>, CliError> {
    let ev = ds.eval_range();
    let truth = ds.sources_in(ev);
    estimates
        .iter()
        .map(|(&m, est)| Ok((m, score_sources(&truth, est)?.matched_mean)))
        .collect()
}

/// Per-seed quantities reported next to the scores.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Mean squared increment of the standardized latent, averaged over channels.
    pub fbm_mean_sq_increment: Option<f64>,
    pub slow_fbm_mean_sq_increment: Option<f64>,
    /// Largest off-diagonal instantaneous or lag-1 correlation of S-FBM+ICA.
    pub slow_fbm_ica_max_offdiag: Option<f64>,
    pub fbm_final_nll: Option<f64>,
    pub slow_fbm_final_nll: Option<f64>,
    pub train_secs: f64,
}

/// Mean over channels of the mean squared increment after standardizing.
pub fn standardized_slowness(z: &Series) -> Result<f64, CliError> {
    let (zs, _, _) = slowflow::datagen::standardize(z)?;
    let msi = mean_squared_increments(&zs);
    Ok(msi.iter().sum::<f64>() / msi.len() as f64)
}

#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dataset: Dataset,
    pub mixing: MixingModel,
    pub fbm: Option<(FlowStack, TrainReport)>,
    pub slow_fbm: Option<(FlowStack, TrainReport)>,
    pub estimates: BTreeMap<Method, Series>,
    pub scores: BTreeMap<Method, f64>,
    pub diagnostics: Diagnostics,
}

/// Slowness and independence diagnostics; training fields are left empty.
pub fn diagnose(
    ds: &Dataset,
    fbm: Option<&FlowStack>,
    slow_fbm: Option<&FlowStack>,
    estimates: &BTreeMap<Method, Series>,
) -> Result<Diagnostics, CliError> {
    let ev = ds.eval_range();
    let latent_slowness = |s: &FlowStack| -> Result<f64, CliError> {
        standardized_slowness(&s.encode_latent(&ds.observed)?.slice_rows(ev.start, ev.end))
    };
    Ok(Diagnostics {
        fbm_mean_sq_increment: fbm.map(latent_slowness).transpose()?,
        slow_fbm_mean_sq_increment: slow_fbm.map(latent_slowness).transpose()?,
        slow_fbm_ica_max_offdiag: estimates
            .get(&Method::SlowFbmIca)
            .map(|e| lagged_cov_diagnostic(e).map(|d| d.max_offdiag))
            .transpose()?,
        ..Diagnostics::default()
    })
}

/// Every stage for one seed, in memory.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome, CliError> {
    let started = Instant::now();
    let (dataset, mixing) = prepare(cfg, seed)?;
    let fbm = cfg.needs_fbm().then(|| fit_flow(cfg, &dataset, false, seed)).transpose()?;
    let slow_fbm = cfg.needs_slow_fbm().then(|| fit_flow(cfg, &dataset, true, seed)).transpose()?;
    let estimates = estimate(cfg, &dataset, fbm.as_ref().map(|f| &f.0), slow_fbm.as_ref().map(|f| &f.0), seed)?;
    let scores = score(&dataset, &estimates)?;
    let mut diagnostics = diagnose(&dataset, fbm.as_ref().map(|f| &f.0), slow_fbm.as_ref().map(|f| &f.0), &estimates)?;
    diagnostics.fbm_final_nll = fbm.as_ref().and_then(|f| f.1.final_nll());
    diagnostics.slow_fbm_final_nll = slow_fbm.as_ref().and_then(|f| f.1.final_nll());
    diagnostics.train_secs = [&fbm, &slow_fbm].iter().filter_map(|f| f.as_ref()).map(|f| f.1.wall_clock_secs).sum();
    info!("seed {seed}: done in {:.1}s: {scores:?}", started.elapsed().as_secs_f64());
    Ok(SeedOutcome {
        seed,
        dataset,
        mixing,
        fbm,
        slow_fbm,
        estimates,
        scores,
        diagnostics,
    })
}
