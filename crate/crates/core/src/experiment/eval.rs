//! Policy evaluation on fresh episodes.

use std::path::Path;

use rand::Rng;

use super::ExperimentError;
use crate::agent::{sample_categorical, OptionAgent};
use crate::env::{make, scripted, Environment};
use crate::rng::{eval_stream, StreamRng};
use crate::rollout::{argmax, usage_from_steps, OptionUsage};

/// Outcome of a batch of evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub env: String,
    pub episodes: usize,
    /// Unscaled episode returns.
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub success_rate: f64,
    /// Absent when no steps were taken.
    pub usage: Option<OptionUsage>,
}

impl EvalReport {
    fn new(env: &str, returns: Vec<f64>, successes: usize, usage: Option<OptionUsage>) -> Self {
        let episodes = returns.len();
        let (mean_return, success_rate) = if episodes == 0 {
            (0.0, 0.0)
        } else {
            (
                returns.iter().sum::<f64>() / episodes as f64,
                successes as f64 / episodes as f64,
            )
        };
        Self {
            env: env.to_string(),
            episodes,
            returns,
            mean_return,
            success_rate,
            usage,
        }
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("env: {}", self.env),
            format!("episodes: {}", self.episodes),
            format!("mean return: {:.4}", self.mean_return),
            format!("success rate: {:.3}", self.success_rate),
        ];
        if let Some(u) = &self.usage {
            let fmt = |v: &[f64]| {
                v.iter()
                    .map(|x| format!("{x:.3}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            lines.push(format!("option usage: {}", fmt(&u.frequencies)));
            lines.push(format!("switch rate: {:.4}", u.switch_rate));
            lines.push(format!("option change rate: {:.4}", u.change_rate));
            if let Some(on) = &u.on_ice {
                lines.push(format!("usage on ice: {}", fmt(on)));
            }
            if let Some(off) = &u.off_ice {
                lines.push(format!("usage off ice: {}", fmt(off)));
            }
            if let Some(s) = u.terrain_specialization() {
                lines.push(format!(
                    "dominant option {}: |on-ice - off-ice| frequency = {s:.4}",
                    u.dominant_option()
                ));
            }
        }
        lines.join("\n") + "\n"
    }
}

fn check_dims(agent: &OptionAgent, env: &dyn Environment) -> Result<(), ExperimentError> {
    let shape = agent.shape();
    let spec = env.spec();
    if shape.observation_dim != spec.observation_dim || shape.action_dim != spec.action_dim {
        return Err(ExperimentError::Mismatch(format!(
            "agent expects observations of size {} and actions of size {}, \
             {} has {} and {}",
            shape.observation_dim,
            shape.action_dim,
            spec.name,
            spec.observation_dim,
            spec.action_dim
        )));
    }
    Ok(())
}

fn choose_option(probs: &[f64], deterministic: bool, rng: &mut StreamRng) -> usize {
    if deterministic {
        argmax(probs)
    } else {
        sample_categorical(probs, rng)
    }
}

/// Runs `episodes` episodes from resets drawn from the evaluation stream of
/// `seed`.
///
/// Deterministic mode removes all policy randomness: actions are the
/// option's mean, `μ` is replaced by its most likely option and an option
/// terminates when `β ≥ 0.5`. Otherwise everything is sampled.
pub fn eval_policy(
    agent: &OptionAgent,
    env_name: &str,
    episodes: usize,
    deterministic: bool,
    seed: u64,
) -> Result<EvalReport, ExperimentError> {
    let mut env = make(env_name)?;
    check_dims(agent, env.as_ref())?;
    let mut rng = eval_stream(seed);
    let bounds = (
        env.spec().action_low.clone(),
        env.spec().action_high.clone(),
    );
    let mut steps = Vec::new();
    let mut returns = Vec::with_capacity(episodes);
    let mut successes = 0;
    for _ in 0..episodes {
        let mut obs = env.reset(&mut rng);
        let mut outputs = agent.actor_outputs(&obs)?;
        let mut option = choose_option(&outputs.option_probs, deterministic, &mut rng);
        let mut total = 0.0;
        loop {
            let action = if deterministic {
                env.spec().clamp_action(outputs.mean(option))
            } else {
                outputs
                    .sample(option, (&bounds.0, &bounds.1), &mut rng)
                    .clamped
            };
            let on_ice = env.on_ice();
            let result = env.step(&action)?;
            total += result.reward;
            if result.done {
                steps.push((option, on_ice, false, false));
                successes += usize::from(result.info.success);
                break;
            }
            obs = result.observation;
            outputs = agent.actor_outputs(&obs)?;
            let beta = agent.termination_prob(&obs, option)?;
            let terminated = if deterministic {
                beta >= 0.5
            } else {
                rng.random::<f64>() < beta
            };
            let previous = option;
            if terminated {
                option = choose_option(&outputs.option_probs, deterministic, &mut rng);
            }
            steps.push((previous, on_ice, terminated, option != previous));
        }
        returns.push(total);
    }
    let usage = (!steps.is_empty())
        .then(|| usage_from_steps(agent.n_options(), env.spec().has_terrain, steps));
    Ok(EvalReport::new(env_name, returns, successes, usage))
}

/// Loads a checkpoint and evaluates it, on `env_override` when given and on
/// the checkpoint's own environment otherwise.
pub fn eval_checkpoint(
    path: &Path,
    env_override: Option<&str>,
    episodes: usize,
    deterministic: bool,
    seed: u64,
) -> Result<EvalReport, ExperimentError> {
    let file = std::fs::File::open(path).map_err(|e| ExperimentError::io(path, e))?;
    let (env_name, agent) = OptionAgent::load(std::io::BufReader::new(file))?;
    eval_policy(
        &agent,
        env_override.unwrap_or(&env_name),
        episodes,
        deterministic,
        seed,
    )
}

/// The hand-written controller evaluated under the same protocol.
pub fn eval_scripted(
    env_name: &str,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, ExperimentError> {
    let mut rng = eval_stream(seed);
    let mut returns = Vec::with_capacity(episodes);
    let mut successes = 0;
    for _ in 0..episodes {
        let episode = scripted::run_episode(env_name, &mut rng)?;
        returns.push(episode.total_reward);
        successes += usize::from(episode.success);
    }
    Ok(EvalReport::new(env_name, returns, successes, None))
}
