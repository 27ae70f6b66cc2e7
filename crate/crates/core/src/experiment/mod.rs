//! Multi-seed training runs, logs, curves, evaluation and gradient audits.

mod config;
mod eval;
mod gradcheck;
mod log;
mod plot;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ExperimentConfig, KEYS};
pub use eval::{eval_checkpoint, eval_policy, eval_scripted, EvalReport};
pub use gradcheck::{
    gradcheck, relative_error, GradcheckReport, ABSOLUTE_FLOOR, LOSS_NAMES, STEP, TOLERANCE,
};
pub use log::{
    summarize, summary_csv, IterationRecord, RunLog, SummaryRow, LOG_SCHEMA, SUMMARY_SCHEMA,
};
pub use plot::{plot_curves, read_curve, render_svg, Curve};

use crate::agent::{AgentError, AgentShape, OptionAgent};
use crate::env::{make, EnvError, Environment};
use crate::nn::NnError;
use crate::rng::RunStreams;
use crate::trainer::{train_iteration, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}:line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("checkpoint does not fit the environment: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One seed's agent, environment and random streams, advanced one
/// iteration at a time.
pub struct TrainingRun {
    config: ExperimentConfig,
    seed: u64,
    agent: OptionAgent,
    env: Box<dyn Environment>,
    streams: RunStreams,
    records: Vec<IterationRecord>,
    steps: usize,
}

impl TrainingRun {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self, ExperimentError> {
        config.validate()?;
        let env = make(&config.env)?;
        let mut streams = RunStreams::new(seed);
        let shape = AgentShape {
            observation_dim: env.spec().observation_dim,
            action_dim: env.spec().action_dim,
            n_options: config.trainer.n_options,
            hidden: config.hidden,
        };
        let agent = OptionAgent::new(shape, &mut streams.init)?;
        Ok(Self {
            config: config.clone(),
            seed,
            agent,
            env,
            streams,
            records: Vec::new(),
            steps: 0,
        })
    }

    /// Runs one collect-and-optimize iteration and records it.
    pub fn step(&mut self) -> Result<&IterationRecord, ExperimentError> {
        let report = train_iteration(
            &mut self.agent,
            self.env.as_mut(),
            &self.config.trainer,
            &mut self.streams,
        )?;
        self.steps += self.config.trainer.horizon;
        let record = IterationRecord::from_report(self.records.len() + 1, self.steps, &report);
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn agent(&self) -> &OptionAgent {
        &self.agent
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn iterations_done(&self) -> usize {
        self.records.len()
    }

    pub fn log(&self) -> RunLog {
        RunLog {
            env: self.config.env.clone(),
            seed: self.seed,
            n_options: self.config.trainer.n_options,
            has_terrain: self.env.spec().has_terrain,
            records: self.records.clone(),
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), ExperimentError> {
        let file = File::create(path).map_err(|e| ExperimentError::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.agent.save(&self.config.env, &mut out)?;
        out.flush().map_err(|e| ExperimentError::io(path, e))
    }
}

/// Files and logs produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub logs: Vec<RunLog>,
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    pub log_paths: Vec<PathBuf>,
    pub checkpoint_paths: Vec<PathBuf>,
}

pub fn seed_log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

pub fn seed_checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.ckpt"))
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    std::fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

/// Trains seeds `base_seed..base_seed + n_seeds` one after another. Writes
/// the resolved configuration, one CSV and one checkpoint per seed, and a
/// cross-seed `summary.csv` into `out_dir`. The directory is prepared before
/// any training starts.
pub fn run_experiment(
    config: &ExperimentConfig,
    mut progress: impl FnMut(u64, &IterationRecord),
) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    write(&dir.join("config.txt"), &config.to_text())?;

    let mut logs = Vec::with_capacity(config.n_seeds);
    let mut log_paths = Vec::new();
    let mut checkpoint_paths = Vec::new();
    for seed in config.base_seed..config.base_seed + config.n_seeds as u64 {
        let mut run = TrainingRun::new(config, seed)?;
        for _ in 0..config.trainer.iterations {
            progress(seed, run.step()?);
        }
        let log = run.log();
        let path = seed_log_path(dir, seed);
        write(&path, &log.to_csv())?;
        log_paths.push(path);
        let ckpt = seed_checkpoint_path(dir, seed);
        run.save_checkpoint(&ckpt)?;
        checkpoint_paths.push(ckpt);
        logs.push(log);
    }
    let summary = summarize(&logs);
    let summary_path = dir.join("summary.csv");
    write(&summary_path, &summary_csv(&summary))?;
    Ok(ExperimentOutput {
        logs,
        summary,
        summary_path,
        log_paths,
        checkpoint_paths,
    })
}
