//! Returns, GAE advantages and termination advantages over option trajectories.

use crate::agent::{AgentError, OptionAgent};
use crate::nn::{softmax_in_place, Tape, Tensor};
use crate::rollout::{StepEnd, TrajectoryBatch};

/// Per-transition training signals, frozen at collection time.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageResult {
    /// GAE advantage of the taken option, used by the surrogate and `μ` losses.
    pub advantages: Vec<f64>,
    /// Regression targets for `Q(s_t, o_t)`.
    pub returns: Vec<f64>,
    /// `Q(s', o) − V(s') + η` at each transition's next state.
    pub termination: Vec<f64>,
}

/// Value of the state after step `t`, given the episode end marker.
fn next_value(t: usize, ends: &[StepEnd], values: &[f64], bootstrap: f64) -> f64 {
    match ends[t] {
        StepEnd::Terminal => 0.0,
        StepEnd::Truncated { bootstrap } => bootstrap,
        StepEnd::Continue if t + 1 < values.len() => values[t + 1],
        StepEnd::Continue => bootstrap,
    }
}

/// `G_t = r_t + γ G_{t+1}`, restarted at every episode end. Truncated steps
/// and the final step (if its episode continues) bootstrap from the given
/// values.
pub fn discounted_returns(
    rewards: &[f64],
    ends: &[StepEnd],
    bootstrap: f64,
    gamma: f64,
) -> Vec<f64> {
    assert_eq!(rewards.len(), ends.len());
    let mut out = vec![0.0; rewards.len()];
    let mut running = bootstrap;
    for t in (0..rewards.len()).rev() {
        running = match ends[t] {
            StepEnd::Terminal => 0.0,
            StepEnd::Truncated { bootstrap } => bootstrap,
            StepEnd::Continue => running,
        };
        running = rewards[t] + gamma * running;
        out[t] = running;
    }
    out
}

/// One-step TD residuals `δ_t = r_t + γ V̂_{t+1} − V̂_t`.
pub fn td_residuals(
    rewards: &[f64],
    values: &[f64],
    ends: &[StepEnd],
    bootstrap: f64,
    gamma: f64,
) -> Vec<f64> {
    (0..rewards.len())
        .map(|t| rewards[t] + gamma * next_value(t, ends, values, bootstrap) - values[t])
        .collect()
}

/// Generalized advantage estimates and the matching value targets
/// `G_t = A_t + V̂_t`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    ends: &[StepEnd],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    assert_eq!(rewards.len(), ends.len());
    let deltas = td_residuals(rewards, values, ends, bootstrap, gamma);
    let mut advantages = vec![0.0; rewards.len()];
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        if ends[t].is_done() {
            running = 0.0;
        }
        running = deltas[t] + gamma * lambda * running;
        advantages[t] = running;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// Zero mean, unit standard deviation. Sequences shorter than two are
/// returned as they are.
pub fn normalize_advantages(advantages: &[f64]) -> Vec<f64> {
    let n = advantages.len();
    if n < 2 {
        return advantages.to_vec();
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt() + 1e-8;
    advantages.iter().map(|a| (a - mean) / std).collect()
}

/// Critic `Q(s, ·)` and `μ(·|s)` for a stack of states, row-major `[n, n_options]`.
pub fn batch_heads(
    agent: &OptionAgent,
    states: &[&[f64]],
) -> Result<(Vec<f64>, Vec<f64>), AgentError> {
    let n_options = agent.n_options();
    if states.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let dim = agent.shape().observation_dim;
    if let Some(bad) = states.iter().find(|s| s.len() != dim) {
        return Err(AgentError::StateDim {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut tape = Tape::new();
    let s = tape.constant(Tensor::from_rows(states)?);
    let critic = agent.critic_forward(&mut tape, s)?;
    let q = tape.value(critic.q).data().to_vec();
    let mu = if n_options == 1 {
        vec![1.0; states.len()]
    } else {
        let actor = agent.actor_forward(&mut tape, s)?;
        let mut mu = tape.value(actor.option_log_probs).data().to_vec();
        for row in mu.chunks_exact_mut(n_options) {
            softmax_in_place(row);
        }
        mu
    };
    Ok((q, mu))
}

/// `Q(s_t, o_t)` for every transition.
pub fn option_values(batch: &TrajectoryBatch, agent: &OptionAgent) -> Result<Vec<f64>, AgentError> {
    let states: Vec<&[f64]> = batch
        .transitions
        .iter()
        .map(|t| t.state.as_slice())
        .collect();
    let n = agent.n_options();
    let (q, _) = batch_heads(agent, &states)?;
    Ok(batch
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| q[i * n + t.option])
        .collect())
}

/// `Q(s', o) − Σ_k μ(k|s') Q(s', k) + η` at each transition's next state,
/// using the agent's current critic and option policy.
pub fn termination_advantage(
    batch: &TrajectoryBatch,
    agent: &OptionAgent,
    eta: f64,
) -> Result<Vec<f64>, AgentError> {
    let states: Vec<&[f64]> = batch
        .transitions
        .iter()
        .map(|t| t.next_state.as_slice())
        .collect();
    let n = agent.n_options();
    let (q, mu) = batch_heads(agent, &states)?;
    Ok(batch
        .transitions
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let row = i * n..(i + 1) * n;
            if n == 1 {
                return eta;
            }
            let v: f64 = q[row.clone()]
                .iter()
                .zip(&mu[row])
                .map(|(q, m)| q * m)
                .sum();
            q[i * n + t.option] - v + eta
        })
        .collect())
}

/// Advantages, value targets and termination advantages for a batch.
pub fn estimate(
    batch: &TrajectoryBatch,
    agent: &OptionAgent,
    gamma: f64,
    lambda: f64,
    eta: f64,
) -> Result<AdvantageResult, AgentError> {
    let values = option_values(batch, agent)?;
    let (advantages, returns) = gae(
        &batch.adjusted_rewards(),
        &values,
        &batch.ends(),
        batch.final_bootstrap,
        gamma,
        lambda,
    );
    let termination = termination_advantage(batch, agent, eta)?;
    Ok(AdvantageResult {
        advantages,
        returns,
        termination,
    })
}
