use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GenerateArgs, ModelArgs, TrainArgs};
use crate::dist::Scheduler;
use crate::error::{Error, Result};
use crate::models::{Architecture, ModelConfig, DEFAULT_CLASSES};
use crate::training::AdamConfig;

/// Contents of a `--config` TOML file. Flags given on the command line win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub model: Option<Architecture>,
    pub workers: Option<usize>,
    pub blocks: Option<usize>,
    pub epochs: Option<usize>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub window: Option<usize>,
    pub edge_life: Option<usize>,
    pub hidden: Option<usize>,
    pub layers: Option<usize>,
    pub scheduler: Option<Scheduler>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }
}

/// Fully resolved run settings, echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSettings {
    pub model: Architecture,
    pub workers: usize,
    pub blocks: usize,
    pub epochs: usize,
    pub theta: f64,
    pub seed: u64,
    pub lr: f64,
    pub window: usize,
    pub edge_life: usize,
    pub hidden: usize,
    pub layers: usize,
    pub scheduler: Scheduler,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            model: Architecture::TmGcn,
            workers: 1,
            blocks: 1,
            epochs: 10,
            theta: 0.1,
            seed: 0,
            lr: AdamConfig::default().lr,
            window: 3,
            edge_life: 3,
            hidden: 6,
            layers: 2,
            scheduler: Scheduler::RoundRobin,
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

impl TrainSettings {
    /// Model-related settings from shared flags, the config file and
    /// defaults, in that order of precedence.
    pub fn from_model_args(args: &ModelArgs) -> Result<(Self, FileConfig)> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let d = Self::from_file(&file);
        let s = Self {
            model: pick(args.model, file.model, d.model),
            window: pick(args.window, file.window, d.window),
            edge_life: pick(args.edge_life, file.edge_life, d.edge_life),
            hidden: pick(args.hidden, file.hidden, d.hidden),
            layers: pick(args.layers, file.layers, d.layers),
            ..d
        };
        Ok((s, file))
    }

    /// Values from `file`, defaults for everything it leaves out.
    pub fn from_file(file: &FileConfig) -> Self {
        let d = Self::default();
        Self {
            model: file.model.unwrap_or(d.model),
            workers: file.workers.unwrap_or(d.workers),
            blocks: file.blocks.unwrap_or(d.blocks),
            epochs: file.epochs.unwrap_or(d.epochs),
            theta: file.theta.unwrap_or(d.theta),
            seed: file.seed.unwrap_or(d.seed),
            lr: file.lr.unwrap_or(d.lr),
            window: file.window.unwrap_or(d.window),
            edge_life: file.edge_life.unwrap_or(d.edge_life),
            hidden: file.hidden.unwrap_or(d.hidden),
            layers: file.layers.unwrap_or(d.layers),
            scheduler: file.scheduler.unwrap_or(d.scheduler),
        }
    }

    pub fn resolve(args: &TrainArgs) -> Result<Self> {
        let (mut s, _) = Self::from_model_args(&args.model)?;
        s.workers = args.workers.unwrap_or(s.workers);
        s.blocks = args.blocks.unwrap_or(s.blocks);
        s.epochs = args.epochs.unwrap_or(s.epochs);
        s.theta = args.theta.unwrap_or(s.theta);
        s.seed = args.seed.unwrap_or(s.seed);
        s.lr = args.lr.unwrap_or(s.lr);
        s.scheduler = args.scheduler.unwrap_or(s.scheduler);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::config(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if self.workers == 0 || self.blocks == 0 {
            return Err(Error::config("workers and blocks must be at least 1"));
        }
        self.model_config().validate()
    }

    /// Degree features (out, in) feed the first layer.
    pub fn model_config(&self) -> ModelConfig {
        let mut cfg = ModelConfig::new(self.model, 2, self.hidden, self.hidden, self.layers);
        cfg.window = self.window;
        cfg.edge_life = self.edge_life;
        cfg.classes = DEFAULT_CLASSES;
        cfg
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateSettings {
    pub timesteps: usize,
    pub vertices: usize,
    pub density: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl GenerateSettings {
    pub fn from_args(a: &GenerateArgs) -> Self {
        Self {
            timesteps: a.timesteps,
            vertices: a.vertices,
            density: a.density,
            seed: a.seed,
            out: a.out.clone(),
        }
    }
}
