use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ExperimentError;
use crate::env;
use crate::trainer::TrainerConfig;

/// Everything that determines a multi-seed training experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub trainer: TrainerConfig,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Hidden units per layer in both networks.
    pub hidden: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: env::POINTMASS.to_string(),
            trainer: TrainerConfig::default(),
            n_seeds: 12,
            base_seed: 0,
            out_dir: PathBuf::from("runs"),
            hidden: 64,
        }
    }
}

/// Keys accepted in configuration files, in the order they are written out.
pub const KEYS: &[&str] = &[
    "env",
    "n_options",
    "eta",
    "gamma",
    "lambda",
    "clip_epsilon",
    "epochs",
    "horizon",
    "minibatch_size",
    "actor_lr",
    "critic_lr",
    "entropy_coef",
    "iterations",
    "scale_rewards",
    "n_seeds",
    "base_seed",
    "out_dir",
    "hidden",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

impl ExperimentConfig {
    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.trainer;
        match key {
            "env" => self.env = value.to_string(),
            "n_options" => t.n_options = parse(key, value)?,
            "eta" | "deliberation_cost" => t.deliberation_cost = parse(key, value)?,
            "gamma" => t.gamma = parse(key, value)?,
            "lambda" => t.lambda = parse(key, value)?,
            "clip_epsilon" => t.clip_epsilon = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "horizon" => t.horizon = parse(key, value)?,
            "minibatch_size" => t.minibatch_size = parse(key, value)?,
            "actor_lr" => t.actor_lr = parse(key, value)?,
            "critic_lr" => t.critic_lr = parse(key, value)?,
            "entropy_coef" => t.entropy_coef = parse(key, value)?,
            "iterations" => t.iterations = parse(key, value)?,
            "scale_rewards" => t.scale_rewards = parse(key, value)?,
            "n_seeds" => self.n_seeds = parse(key, value)?,
            "base_seed" => self.base_seed = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "hidden" => self.hidden = parse(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<(), ExperimentError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |message: String| ExperimentError::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("expected `key = value`, found {line:?}")))?;
            self.set(key.trim(), value.trim()).map_err(fail)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        let mut config = Self::default();
        config.apply_text(&text, path)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_seeds == 0 {
            return Err(ExperimentError::Config("n_seeds must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(ExperimentError::Config("hidden must be positive".into()));
        }
        env::make(&self.env).map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.trainer
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// The configuration as a file that [`ExperimentConfig::from_file`]
    /// reads back unchanged.
    pub fn to_text(&self) -> String {
        let t = &self.trainer;
        let values: [String; 18] = [
            self.env.clone(),
            t.n_options.to_string(),
            t.deliberation_cost.to_string(),
            t.gamma.to_string(),
            t.lambda.to_string(),
            t.clip_epsilon.to_string(),
            t.epochs.to_string(),
            t.horizon.to_string(),
            t.minibatch_size.to_string(),
            t.actor_lr.to_string(),
            t.critic_lr.to_string(),
            t.entropy_coef.to_string(),
            t.iterations.to_string(),
            t.scale_rewards.to_string(),
            self.n_seeds.to_string(),
            self.base_seed.to_string(),
            self.out_dir.display().to_string(),
            self.hidden.to_string(),
        ];
        let mut out = String::new();
        for (key, value) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}
