//! Declarative description of one experiment.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slowflow::datagen::{MixingConfig, StructuralSpec};
use slowflow::eval::Method;
use slowflow::ica::FastIcaConfig;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Structural,
    Audio,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Structural => "structural",
            ExperimentKind::Audio => "audio",
        }
    }
}

/// Rows the linear ICA stage is fitted on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcaFit {
    /// Training region only, then applied to the evaluation region.
    #[default]
    Train,
    /// The whole series.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    /// Four WAV files; `None` uses the synthetic instruments.
    pub paths: Option<Vec<PathBuf>>,
    /// Rate of the synthetic instruments.
    pub sample_rate: u32,
    pub length: usize,
    pub test_fraction: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            paths: None,
            sample_rate: 4000,
            length: 16_384,
            test_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingSettings {
    pub depth: usize,
    /// Mixing seed = run seed + offset.
    pub seed_offset: u64,
    pub params: MixingConfig,
}

impl Default for MixingSettings {
    fn default() -> Self {
        Self {
            depth: 4,
            seed_offset: 1000,
            params: MixingConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: Vec<usize>,
    /// Training window length in steps.
    pub window: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            hidden: vec![32, 32],
            window: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Windows per step; `None` is full batch.
    pub batch_windows: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            learning_rate: 1e-3,
            batch_windows: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Used when `experiment` is structural; `seed` is replaced per run.
    pub structural: StructuralSpec,
    pub audio: AudioConfig,
    pub mixing: MixingSettings,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub ica: FastIcaConfig,
    pub ica_fit: IcaFit,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::structural()
    }
}

impl ExperimentConfig {
    pub fn structural() -> Self {
        Self {
            experiment: ExperimentKind::Structural,
            structural: StructuralSpec::default(),
            audio: AudioConfig::default(),
            mixing: MixingSettings::default(),
            model: ModelConfig::default(),
            training: TrainingConfig::default(),
            ica: FastIcaConfig::default(),
            ica_fit: IcaFit::Train,
            methods: Method::ALL.to_vec(),
            seeds: (0..5).collect(),
            out: PathBuf::from("runs/structural"),
        }
    }

    pub fn audio() -> Self {
        Self {
            experiment: ExperimentKind::Audio,
            seeds: (0..3).collect(),
            out: PathBuf::from("runs/audio"),
            ..Self::structural()
        }
    }

    pub fn for_kind(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Structural => Self::structural(),
            ExperimentKind::Audio => Self::audio(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn series_len(&self) -> usize {
        match self.experiment {
            ExperimentKind::Structural => self.structural.length,
            ExperimentKind::Audio => self.audio.length,
        }
    }

    pub fn test_fraction(&self) -> f64 {
        match self.experiment {
            ExperimentKind::Structural => 0.0,
            ExperimentKind::Audio => self.audio.test_fraction,
        }
    }

    pub fn needs(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    pub fn needs_fbm(&self) -> bool {
        self.needs(Method::FbmIca)
    }

    pub fn needs_slow_fbm(&self) -> bool {
        self.needs(Method::SlowFbm) || self.needs(Method::SlowFbmIca)
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        if self.seeds.is_empty() {
            return fail("no seeds".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return fail(format!("duplicate seeds in {:?}", self.seeds));
        }
        if self.methods.is_empty() {
            return fail("no methods".into());
        }
        if self.methods.iter().collect::<HashSet<_>>().len() != self.methods.len() {
            return fail("duplicate methods".into());
        }
        if self.model.layers == 0 || self.model.hidden.contains(&0) {
            return fail("model needs at least one layer and non-zero hidden sizes".into());
        }
        if self.model.window < 2 {
            return fail("window must be at least 2".into());
        }
        if self.training.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        if !(self.training.learning_rate.is_finite() && self.training.learning_rate > 0.0) {
            return fail(format!("bad learning rate {}", self.training.learning_rate));
        }
        if self.training.batch_windows == Some(0) {
            return fail("batch_windows must be positive".into());
        }
        if self.mixing.depth < 2 {
            return fail(format!("mixing depth must be >= 2, got {}", self.mixing.depth));
        }
        if self.mixing.params.hidden.contains(&0) || self.mixing.params.probes < 16 {
            return fail("bad mixing network settings".into());
        }
        match self.experiment {
            ExperimentKind::Structural => {
                if self.structural.length < 64 {
                    return fail("structural length must be >= 64".into());
                }
            }
            ExperimentKind::Audio => {
                let a = &self.audio;
                if let Some(p) = &a.paths {
                    if p.len() != 4 {
                        return fail(format!("audio needs 4 files, got {}", p.len()));
                    }
                }
                if !(0.0..1.0).contains(&a.test_fraction) {
                    return fail(format!("test_fraction must be in [0, 1), got {}", a.test_fraction));
                }
                if a.sample_rate == 0 {
                    return fail("sample_rate must be positive".into());
                }
            }
        }
        let train_len = ((1.0 - self.test_fraction()) * self.series_len() as f64).round() as usize;
        if self.model.window > train_len {
            return fail(format!(
                "window {} exceeds the {train_len}-step training region",
                self.model.window
            ));
        }
        Ok(())
    }
}
