use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderConfig;
use crate::error::{Error, Result};
use crate::gan::{GeneratorLoss, TrainConfig, Variant};

/// Phase lengths of the fast profile.
pub const FAST_EPOCHS: usize = 300;
/// Rows kept from the real data by the fast profile.
pub const FAST_SUBSAMPLE: usize = 8000;

fn default_epsilon() -> f64 {
    0.3
}

fn default_variant() -> Variant {
    Variant::Fairgan
}

/// Settings for the tabular pipeline. Relative paths are resolved against
/// the directory holding the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub data: PathBuf,
    /// Stratified subsample size; `None` keeps every row.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    pub autoencoder: AutoencoderConfig,
    pub train: TrainConfig,
    /// One replicate per seed.
    pub seeds: Vec<u64>,
    /// Fairness weights of the sweep; `train.lambda` is the headline value.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    /// ε of the ε-fairness audit.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Synthetic rows per dataset; `None` matches the real row count.
    #[serde(default)]
    pub synthetic_rows: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.schema = resolve_path(base, &cfg.schema);
        cfg.data = resolve_path(base, &cfg.data);
        cfg.out = resolve_path(base, &cfg.out);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("lambda {l} must be finite and >= 0")));
        }
        if self.subsample == Some(0) || self.synthetic_rows == Some(0) {
            return Err(Error::Config("row counts must be positive".into()));
        }
        Ok(())
    }

    /// Phases of 300/300 epochs on an 8,000-row subsample.
    pub fn apply_fast(&mut self) {
        self.train.phase1_epochs = FAST_EPOCHS;
        self.train.phase2_epochs = FAST_EPOCHS;
        self.subsample = Some(FAST_SUBSAMPLE);
    }

    /// Sweep weights, always including the headline `λ`.
    pub fn sweep_lambdas(&self) -> Vec<f64> {
        let mut l = self.lambdas.clone();
        if !l.contains(&self.train.lambda) {
            l.push(self.train.lambda);
        }
        l
    }
}

pub fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Settings for the one-dimensional comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Training rows drawn from the mixture.
    pub rows: usize,
    /// Rows generated per model for the histograms.
    pub synthetic_rows: usize,
    pub seeds: Vec<u64>,
    pub autoencoder: AutoencoderConfig,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            rows: 4000,
            synthetic_rows: 20_000,
            seeds: vec![0, 1, 2],
            autoencoder: AutoencoderConfig {
                hidden: 64,
                epochs: 50,
                batch: 128,
                learning_rate: 0.001,
            },
            train: TrainConfig {
                phase1_epochs: 600,
                phase2_epochs: 600,
                batch: 128,
                lambda: 1.0,
                noise_dim: 64,
                learning_rate: 2e-4,
                adam_beta1: 0.5,
                generator_loss: GeneratorLoss::Minimax,
                minibatch_averaging: false,
                reconstructed_real: false,
                freeze_decoder: false,
                seed: 0,
                g_hidden: vec![64, 64],
                d_hidden: vec![64, 64],
            },
            out: PathBuf::from("runs/toy"),
        }
    }
}

impl ToyConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ToyConfig = serde_json::from_str(&text)?;
        cfg.out = resolve_path(path.parent().unwrap_or(Path::new(".")), &cfg.out);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.rows < 2 || self.synthetic_rows < 2 {
            return Err(Error::Config("toy row counts must be at least 2".into()));
        }
        Ok(())
    }
}
