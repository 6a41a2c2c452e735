use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{Method, DEFAULT_METHODS};
use crate::conformal::CpcpConfig;
use crate::data::SyntheticSpec;
use crate::error::{Error, Result};
use crate::losses::QuantileLevel;
use crate::metrics::WscConfig;
use crate::nn::{validate_delta, AdamConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format '{other}' (csv|json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub repetitions: usize,
    pub methods: Vec<String>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Record wall-clock seconds per method (makes output non-reproducible).
    pub timing: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            repetitions: 20,
            methods: DEFAULT_METHODS.iter().map(|s| s.to_string()).collect(),
            output: None,
            format: OutputFormat::Csv,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSection {
    Synthetic {
        #[serde(default = "default_preset")]
        preset: String,
        #[serde(default = "default_n")]
        n: usize,
        /// Overrides the preset's label dimension.
        #[serde(default)]
        label_dim: Option<usize>,
        #[serde(default)]
        name: Option<String>,
    },
    Csv {
        path: PathBuf,
        features: Vec<String>,
        labels: Vec<String>,
        #[serde(default)]
        name: Option<String>,
    },
}

fn default_preset() -> String {
    "heteroscedastic".into()
}

fn default_n() -> usize {
    8000
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection::Synthetic {
            preset: default_preset(),
            n: default_n(),
            label_dim: None,
            name: None,
        }
    }
}

impl DatasetSection {
    pub fn name(&self) -> String {
        match self {
            DatasetSection::Synthetic { preset, name, .. } => {
                name.clone().unwrap_or_else(|| preset.clone())
            }
            DatasetSection::Csv { path, name, .. } => name.clone().unwrap_or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "csv".into())
            }),
        }
    }

    pub fn synthetic_spec(&self) -> Result<Option<SyntheticSpec>> {
        match self {
            DatasetSection::Synthetic {
                preset, label_dim, ..
            } => {
                let mut spec = SyntheticSpec::preset(preset)?;
                if let Some(d) = label_dim {
                    spec.label_dim = *d;
                }
                spec.validate()?;
                Ok(Some(spec))
            }
            DatasetSection::Csv { .. } => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformalSection {
    pub tau: f64,
    pub delta: f64,
    /// Cap multiple used by the `-clip` variants.
    pub clip: f64,
    /// Weighted share used by the `-mix` variants.
    pub lambda: f64,
}

impl Default for ConformalSection {
    fn default() -> Self {
        ConformalSection {
            tau: 0.9,
            delta: 0.02,
            clip: 5.0,
            lambda: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub wsc_mass_fraction: f64,
    pub wsc_directions: usize,
    pub wsc_knots: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let w = WscConfig::default();
        MetricsSection {
            wsc_mass_fraction: w.mass_fraction,
            wsc_directions: w.directions,
            wsc_knots: w.knots,
        }
    }
}

impl MetricsSection {
    pub fn wsc(&self) -> WscConfig {
        WscConfig {
            mass_fraction: self.wsc_mass_fraction,
            directions: self.wsc_directions,
            knots: self.wsc_knots,
            ..WscConfig::default()
        }
    }
}

/// Flat training schedule as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl NetSection {
    fn with(hidden: Vec<usize>, epochs: usize) -> Self {
        NetSection {
            hidden,
            epochs,
            batch_size: 256,
            learning_rate: 1e-3,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
        }
    }
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection::with(vec![256, 256], 100)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Point predictor fitted by squared error.
    pub regressor: NetSection,
    /// Quantile networks: three-head pretraining, likelihood and interval models.
    pub quantile: NetSection,
    /// Main-head fine-tuning; `hidden` is ignored.
    pub finetune: NetSection,
    /// Partition network of the learned-group baseline.
    pub partition: NetSection,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            regressor: NetSection::default(),
            quantile: NetSection::default(),
            finetune: NetSection::with(vec![], 50),
            partition: NetSection::with(vec![64], 100),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub dataset: DatasetSection,
    pub conformal: ConformalSection,
    pub metrics: MetricsSection,
    pub training: TrainingSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let DatasetSection::Csv { path: data, .. } = &mut cfg.dataset {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn tau(&self) -> Result<QuantileLevel> {
        QuantileLevel::new(self.conformal.tau)
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        self.run.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        let tau = self.tau().map_err(|e| Error::Config(e.to_string()))?;
        validate_delta(tau, self.conformal.delta).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.conformal.clip > 0.0) {
            return Err(Error::Config("clip multiple must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.conformal.lambda) {
            return Err(Error::Config("lambda must lie in [0, 1]".into()));
        }
        if self.parsed_methods()?.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.training.quantile.hidden.is_empty() {
            return Err(Error::Config(
                "quantile networks need a hidden layer".into(),
            ));
        }
        self.dataset.synthetic_spec()?;
        let w = self.metrics.wsc();
        if w.directions == 0 || w.knots < 2 || !(w.mass_fraction > 0.0 && w.mass_fraction <= 1.0) {
            return Err(Error::Config("invalid worst-slice settings".into()));
        }
        Ok(())
    }

    /// Three-part calibration settings for a `cpcp` variant (or `rcp`).
    pub fn cpcp_config(&self, clip: bool, mix: bool) -> Result<CpcpConfig> {
        let mut c = CpcpConfig::new(self.tau()?);
        c.delta = self.conformal.delta;
        c.clip = clip.then_some(self.conformal.clip);
        c.lambda = if mix { self.conformal.lambda } else { 1.0 };
        c.pretrain = self.training.quantile.train_config();
        c.finetune = self.training.finetune.train_config();
        Ok(c)
    }
}
