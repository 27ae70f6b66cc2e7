//! PPO-style optimization of options, terminations, the policy over options
//! and the critic.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::advantage::{estimate, normalize_advantages};
use crate::agent::{ActorHeads, AgentError, CriticHeads, OptionAgent};
use crate::env::Environment;
use crate::nn::{Adam, NnError, Tape, Tensor, Var, HALF_LN_TWO_PI};
use crate::rng::RunStreams;
use crate::rollout::{
    collect, option_usage_stats, CollectConfig, OptionUsage, RolloutError, TrajectoryBatch,
    Transition,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid trainer configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_epsilon: f64,
    /// η, charged in scaled-reward units.
    pub deliberation_cost: f64,
    pub n_options: usize,
    /// Optimization epochs per batch (K).
    pub epochs: usize,
    /// Steps collected per iteration (T).
    pub horizon: usize,
    /// Minibatch size before division by the number of options (M).
    pub minibatch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub iterations: usize,
    /// Divide rewards by 10 when more than one option is used.
    pub scale_rewards: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip_epsilon: 0.2,
            deliberation_cost: 0.0,
            n_options: 2,
            epochs: 10,
            horizon: 2000,
            minibatch_size: 64,
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            entropy_coef: 0.0,
            iterations: 200,
            scale_rewards: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.clip_epsilon > 0.0) {
            return fail("clip_epsilon must be positive");
        }
        if !(self.deliberation_cost >= 0.0) {
            return fail("deliberation_cost must be non-negative");
        }
        if self.n_options == 0 {
            return fail("n_options must be at least 1");
        }
        if self.minibatch_size < self.n_options {
            return fail("minibatch_size must be at least n_options");
        }
        if self.horizon == 0 {
            return fail("horizon must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail("lambda must lie in [0, 1]");
        }
        for (name, value) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("entropy_coef", self.entropy_coef),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return fail(&format!("{name} must be a non-negative number"));
            }
        }
        Ok(())
    }

    pub fn reward_scale(&self) -> f64 {
        if self.scale_rewards && self.n_options > 1 {
            0.1
        } else {
            1.0
        }
    }

    /// Per-option minibatch size.
    pub fn option_minibatch(&self) -> usize {
        (self.minibatch_size / self.n_options).max(1)
    }

    pub fn collect_config(&self) -> CollectConfig {
        CollectConfig {
            horizon: self.horizon,
            deliberation_cost: self.deliberation_cost,
            reward_scale: self.reward_scale(),
        }
    }
}

/// Summary of one collect-and-optimize iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    /// Mean unscaled return of episodes finished during collection.
    pub mean_return: f64,
    pub std_return: f64,
    pub episodes: usize,
    /// Fraction of finished episodes flagged successful.
    pub success_rate: f64,
    pub surrogate_loss: f64,
    pub option_loss: f64,
    pub value_loss: f64,
    pub termination_loss: f64,
    /// Mean of `log π_old − log π` over every minibatch.
    pub approx_kl: f64,
    pub usage: OptionUsage,
    pub wall_clock: Duration,
}

impl IterationReport {
    pub fn switch_rate(&self) -> f64 {
        self.usage.switch_rate
    }
}

/// Training signals gathered for a subset of transitions.
#[derive(Debug, Clone)]
pub struct Minibatch {
    /// `[B, observation_dim]`
    pub states: Tensor,
    /// `[B, observation_dim]`
    pub next_states: Tensor,
    /// `[B, action_dim]`, unclamped.
    pub actions: Tensor,
    pub options: Vec<usize>,
    pub log_prob_old: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Termination advantage including η.
    pub termination_advantages: Vec<f64>,
    /// 1 where the episode continues past the transition, else 0.
    pub termination_mask: Vec<f64>,
}

/// Frozen per-transition signals for a whole batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSignals {
    /// Normalized GAE advantages.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub termination: Vec<f64>,
}

impl TrainingSignals {
    pub fn compute(
        batch: &TrajectoryBatch,
        agent: &OptionAgent,
        config: &TrainerConfig,
    ) -> Result<Self, AgentError> {
        let raw = estimate(
            batch,
            agent,
            config.gamma,
            config.lambda,
            config.deliberation_cost,
        )?;
        Ok(Self {
            advantages: normalize_advantages(&raw.advantages),
            returns: raw.returns,
            termination: raw.termination,
        })
    }
}

impl Minibatch {
    pub fn gather(
        batch: &TrajectoryBatch,
        signals: &TrainingSignals,
        indices: &[usize],
    ) -> Result<Self, NnError> {
        let ts = &batch.transitions;
        let rows = |field: fn(&Transition) -> &Vec<f64>| {
            let r: Vec<&Vec<f64>> = indices.iter().map(|&i| field(&ts[i])).collect();
            Tensor::from_rows(&r)
        };
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(Self {
            states: rows(|t| &t.state)?,
            next_states: rows(|t| &t.next_state)?,
            actions: rows(|t| &t.action)?,
            options: indices.iter().map(|&i| ts[i].option).collect(),
            log_prob_old: indices.iter().map(|&i| ts[i].log_prob_old).collect(),
            advantages: pick(&signals.advantages),
            returns: pick(&signals.returns),
            termination_advantages: pick(&signals.termination),
            termination_mask: indices
                .iter()
                .map(|&i| if ts[i].episode_done() { 0.0 } else { 1.0 })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// `log π(a_t | s_t, o_t)` for every row, recorded on the tape.
pub fn action_log_probs(
    tape: &mut Tape,
    heads: &ActorHeads,
    mb: &Minibatch,
) -> Result<Var, NnError> {
    let d = mb.actions.rows_cols().1;
    let means = tape.pick_blocks(heads.means, &mb.options, d)?;
    let log_std = tape.gather_rows(heads.log_std, &mb.options)?;
    let actions = tape.constant(mb.actions.clone());
    tape.gaussian_log_prob(actions, means, log_std)
}

/// `−mean min(ρA, clip(ρ, 1−ε, 1+ε)A) − c·mean H[π(·|s, o)]`.
///
/// Also returns the recorded `log π` so callers can read the ratios.
pub fn clipped_surrogate(
    tape: &mut Tape,
    heads: &ActorHeads,
    mb: &Minibatch,
    clip_epsilon: f64,
    entropy_coef: f64,
) -> Result<(Var, Var), NnError> {
    let log_prob = action_log_probs(tape, heads, mb)?;
    let old = tape.constant(Tensor::vector(mb.log_prob_old.clone()));
    let log_ratio = tape.sub(log_prob, old)?;
    let ratio = tape.exp(log_ratio);
    let advantages = tape.constant(Tensor::vector(mb.advantages.clone()));
    let unclipped = tape.mul(ratio, advantages)?;
    let clipped_ratio = tape.clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    let clipped = tape.mul(clipped_ratio, advantages)?;
    let objective = tape.minimum(unclipped, clipped)?;
    let objective = tape.mean(objective);
    let mut loss = tape.scale(objective, -1.0);
    if entropy_coef != 0.0 {
        let log_std = tape.gather_rows(heads.log_std, &mb.options)?;
        let per_row = tape.sum_rows(log_std);
        let d = mb.actions.rows_cols().1 as f64;
        let mean_log_std = tape.mean(per_row);
        let entropy = tape.shift(mean_log_std, d * (0.5 + HALF_LN_TWO_PI));
        let bonus = tape.scale(entropy, -entropy_coef);
        loss = tape.add(loss, bonus)?;
    }
    Ok((loss, log_prob))
}

/// `−mean log μ(o_t | s_t) A_t`
pub fn option_policy_loss(
    tape: &mut Tape,
    heads: &ActorHeads,
    mb: &Minibatch,
) -> Result<Var, NnError> {
    let log_mu = tape.pick_columns(heads.option_log_probs, &mb.options)?;
    let advantages = tape.constant(Tensor::vector(mb.advantages.clone()));
    let weighted = tape.mul(log_mu, advantages)?;
    let mean = tape.mean(weighted);
    Ok(tape.scale(mean, -1.0))
}

/// `mean (G_t − Q(s_t, o_t))²`
pub fn value_loss(tape: &mut Tape, heads: &CriticHeads, mb: &Minibatch) -> Result<Var, NnError> {
    let q = tape.pick_columns(heads.q, &mb.options)?;
    let targets = tape.constant(Tensor::vector(mb.returns.clone()));
    let diff = tape.sub(q, targets)?;
    let sq = tape.square(diff);
    Ok(tape.mean(sq))
}

/// `Σ_t m_t β(s'_t, o_t)(A^β_t + η) / max(1, Σ_t m_t)`, where `heads` come
/// from the next states and `m` masks out episode ends.
pub fn termination_loss(
    tape: &mut Tape,
    next_heads: &CriticHeads,
    mb: &Minibatch,
) -> Result<Var, NnError> {
    let beta = tape.pick_columns(next_heads.termination, &mb.options)?;
    let active: f64 = mb.termination_mask.iter().sum();
    let weights: Vec<f64> = mb
        .termination_advantages
        .iter()
        .zip(&mb.termination_mask)
        .map(|(a, m)| a * m)
        .collect();
    let weights = tape.constant(Tensor::vector(weights));
    let weighted = tape.mul(beta, weights)?;
    let total = tape.sum(weighted);
    Ok(tape.scale(total, 1.0 / active.max(1.0)))
}

/// The four losses for one minibatch, recorded on one tape.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub surrogate: Var,
    pub option_policy: Var,
    pub value: Var,
    /// Absent for single-option agents, whose terminations change nothing.
    pub termination: Option<Var>,
    pub log_prob: Var,
}

impl LossVars {
    pub fn total(&self, tape: &mut Tape) -> Result<Var, NnError> {
        let actor = tape.add(self.surrogate, self.option_policy)?;
        let mut total = tape.add(actor, self.value)?;
        if let Some(t) = self.termination {
            total = tape.add(total, t)?;
        }
        Ok(total)
    }
}

pub fn record_losses(
    tape: &mut Tape,
    agent: &OptionAgent,
    mb: &Minibatch,
    clip_epsilon: f64,
    entropy_coef: f64,
) -> Result<LossVars, NnError> {
    let states = tape.constant(mb.states.clone());
    let actor = agent.actor_forward(tape, states)?;
    let critic = agent.critic_forward(tape, states)?;
    let (surrogate, log_prob) = clipped_surrogate(tape, &actor, mb, clip_epsilon, entropy_coef)?;
    let option_policy = option_policy_loss(tape, &actor, mb)?;
    let value = value_loss(tape, &critic, mb)?;
    let termination = if agent.n_options() > 1 {
        let next = tape.constant(mb.next_states.clone());
        let next_critic = agent.critic_forward(tape, next)?;
        Some(termination_loss(tape, &next_critic, mb)?)
    } else {
        None
    };
    Ok(LossVars {
        surrogate,
        option_policy,
        value,
        termination,
        log_prob,
    })
}

/// Minibatch index lists for one epoch: each option's transitions shuffled
/// and cut into chunks of the per-option size, options in index order.
pub fn epoch_minibatches<R: Rng + ?Sized>(
    batch: &TrajectoryBatch,
    chunk: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mut group in batch.option_indices() {
        group.shuffle(rng);
        out.extend(group.chunks(chunk).map(<[usize]>::to_vec));
    }
    out
}

#[derive(Debug, Default, Clone, Copy)]
struct LossTotals {
    surrogate: f64,
    option: f64,
    value: f64,
    termination: f64,
    kl: f64,
    count: usize,
}

/// Takes K epochs of minibatch steps on a collected batch with frozen
/// signals. Returns mean loss values over all minibatches.
pub fn optimize<R: Rng + ?Sized>(
    agent: &mut OptionAgent,
    batch: &TrajectoryBatch,
    signals: &TrainingSignals,
    config: &TrainerConfig,
    rng: &mut R,
) -> Result<(f64, f64, f64, f64, f64), TrainError> {
    let adam = Adam::default();
    let mut totals = LossTotals::default();
    let mut tape = Tape::new();
    for _ in 0..config.epochs {
        for indices in epoch_minibatches(batch, config.option_minibatch(), rng) {
            let mb = Minibatch::gather(batch, signals, &indices)?;
            tape.clear();
            let losses = record_losses(
                &mut tape,
                agent,
                &mb,
                config.clip_epsilon,
                config.entropy_coef,
            )?;
            let total = losses.total(&mut tape)?;
            agent.zero_grad();
            tape.backward(total, &mut agent.parameter_sets_mut())?;
            adam.step(agent.actor_mut(), config.actor_lr);
            adam.step(agent.critic_mut(), config.critic_lr);

            let scalar = |v: Var| tape.value(v).data()[0];
            totals.surrogate += scalar(losses.surrogate);
            totals.option += scalar(losses.option_policy);
            totals.value += scalar(losses.value);
            totals.termination += losses.termination.map_or(0.0, scalar);
            let new_lp = tape.value(losses.log_prob).data();
            totals.kl += mb
                .log_prob_old
                .iter()
                .zip(new_lp)
                .map(|(o, n)| o - n)
                .sum::<f64>()
                / mb.len() as f64;
            totals.count += 1;
        }
    }
    let n = totals.count.max(1) as f64;
    Ok((
        totals.surrogate / n,
        totals.option / n,
        totals.value / n,
        totals.termination / n,
        totals.kl / n,
    ))
}

/// Collects one batch and optimizes on it.
pub fn train_iteration(
    agent: &mut OptionAgent,
    env: &mut dyn Environment,
    config: &TrainerConfig,
    streams: &mut RunStreams,
) -> Result<IterationReport, TrainError> {
    config.validate()?;
    if agent.n_options() != config.n_options {
        return Err(TrainError::Config(format!(
            "agent has {} options, configuration says {}",
            agent.n_options(),
            config.n_options
        )));
    }
    let start = Instant::now();
    let batch = collect(
        agent,
        env,
        &config.collect_config(),
        &mut streams.env,
        &mut streams.policy,
    )?;
    let signals = TrainingSignals::compute(&batch, agent, config)?;
    let (surrogate_loss, option_loss, value_loss, termination_loss, approx_kl) =
        optimize(agent, &batch, &signals, config, &mut streams.minibatch)?;
    let episodes = batch.episode_returns.len();
    let successes = batch.episode_successes.iter().filter(|&&s| s).count();
    Ok(IterationReport {
        mean_return: batch.mean_episode_return(),
        std_return: batch.std_episode_return(),
        episodes,
        success_rate: if episodes == 0 {
            0.0
        } else {
            successes as f64 / episodes as f64
        },
        surrogate_loss,
        option_loss,
        value_loss,
        termination_loss,
        approx_kl,
        usage: option_usage_stats(&batch),
        wall_clock: start.elapsed(),
    })
}
