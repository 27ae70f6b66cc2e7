use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ppoc::experiment::{eval_checkpoint, gradcheck, plot_curves, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ppoc", about = "Proximal policy option-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed and write logs, checkpoints and a summary.
    Train(TrainArgs),
    /// Evaluate a checkpoint on fresh episodes.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Mean actions, most likely options, terminate when β ≥ 0.5.
        #[arg(long)]
        deterministic: bool,
        /// Evaluate on this environment instead of the checkpoint's own.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw mean ± std learning curves from summary CSVs into an SVG.
    Plot {
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare every loss gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Negate the termination loss gradient; the check should fail.
        #[arg(long, hide = true)]
        flip_termination: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    options: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    minibatch_size: Option<usize>,
    #[arg(long)]
    actor_lr: Option<f64>,
    #[arg(long)]
    critic_lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    clip_epsilon: Option<f64>,
    #[arg(long)]
    entropy_coef: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    scale_rewards: Option<bool>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Only print the final summary.
    #[arg(long)]
    quiet: bool,
}

impl TrainArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags: [(&str, Option<String>); 18] = [
            ("env", self.env.clone()),
            ("n_options", self.options.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("n_seeds", self.seeds.map(|v| v.to_string())),
            ("base_seed", self.base_seed.map(|v| v.to_string())),
            (
                "out_dir",
                self.out.as_ref().map(|p| p.display().to_string()),
            ),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("horizon", self.horizon.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("minibatch_size", self.minibatch_size.map(|v| v.to_string())),
            ("actor_lr", self.actor_lr.map(|v| v.to_string())),
            ("critic_lr", self.critic_lr.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("clip_epsilon", self.clip_epsilon.map(|v| v.to_string())),
            ("entropy_coef", self.entropy_coef.map(|v| v.to_string())),
            ("hidden", self.hidden.map(|v| v.to_string())),
            ("scale_rewards", self.scale_rewards.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                config.set(key, &value).map_err(anyhow::Error::msg)?;
            }
        }
        for pair in &self.overrides {
            let (key, value) = pair
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {pair:?}"))?;
            config
                .set(key.trim(), value.trim())
                .map_err(anyhow::Error::msg)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn train(args: &TrainArgs) -> Result<()> {
    let config = args.resolve()?;
    let quiet = args.quiet;
    let output = run_experiment(&config, |seed, r| {
        if !quiet {
            eprintln!(
                "seed {seed} iter {:>4} steps {:>8} return {:>10.3} success {:.2} switch {:.4}",
                r.iteration, r.steps, r.mean_return, r.success_rate, r.switch_rate
            );
        }
    })?;
    if let Some(last) = output.summary.last() {
        println!(
            "{} seeds, {} iterations: final return {:.3} ± {:.3}",
            last.seeds, last.iteration, last.return_mean, last.return_std
        );
    }
    println!("summary: {}", output.summary_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train(args) => train(&args)?,
        Command::Eval {
            checkpoint,
            episodes,
            deterministic,
            env,
            seed,
        } => {
            let report =
                eval_checkpoint(&checkpoint, env.as_deref(), episodes, deterministic, seed)?;
            print!("{}", report.to_text());
        }
        Command::Plot { inputs, out } => {
            plot_curves(&inputs, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Gradcheck {
            seeds,
            flip_termination,
        } => {
            let report = gradcheck(seeds, flip_termination)?;
            print!("{}", report.to_text());
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
