//! On-policy trajectory collection under call-and-return option execution.

use rand::Rng;
use thiserror::Error;

use crate::agent::{ActorOutputs, AgentError, OptionAgent};
use crate::env::{EnvError, Environment};

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("horizon must be at least one step")]
    EmptyHorizon,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// How the episode stands after a transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepEnd {
    Continue,
    /// A genuine terminal state: nothing follows, bootstrap 0.
    Terminal,
    /// Cut off by the step limit; the return continues past `next_state`.
    Truncated {
        bootstrap: f64,
    },
}

impl StepEnd {
    pub fn is_done(self) -> bool {
        !matches!(self, StepEnd::Continue)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Option active when the action was taken.
    pub option: usize,
    /// Unclamped action.
    pub action: Vec<f64>,
    /// Unscaled environment reward.
    pub env_reward: f64,
    /// Scaled reward minus the deliberation cost charged on this step.
    pub adjusted_reward: f64,
    pub log_prob_old: f64,
    /// `μ(option | state)` at collection time.
    pub option_prob_old: f64,
    pub next_state: Vec<f64>,
    /// `β(next_state, option)` fired.
    pub terminated_option: bool,
    /// The option chosen after termination differs from `option`.
    pub switched: bool,
    pub end: StepEnd,
    pub episode_id: usize,
    /// `state` lies on ice.
    pub on_ice: bool,
}

impl Transition {
    pub fn episode_done(&self) -> bool {
        self.end.is_done()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub transitions: Vec<Transition>,
    /// `Q(s_T, o_T)` when the last transition does not end its episode, else 0.
    pub final_bootstrap: f64,
    /// Unscaled returns of episodes that finished inside the batch.
    pub episode_returns: Vec<f64>,
    /// Success flags of those episodes.
    pub episode_successes: Vec<bool>,
    /// Unscaled return accumulated by the unfinished trailing episode.
    pub partial_return: f64,
    pub n_options: usize,
    pub has_terrain: bool,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn adjusted_rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.adjusted_reward).collect()
    }

    pub fn ends(&self) -> Vec<StepEnd> {
        self.transitions.iter().map(|t| t.end).collect()
    }

    /// Transition indices grouped by active option; together they partition
    /// `0..len`.
    pub fn option_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_options];
        for (i, t) in self.transitions.iter().enumerate() {
            groups[t.option].push(i);
        }
        groups
    }

    /// `[start, end)` index ranges of the episodes (or episode fragments).
    pub fn episode_ranges(&self) -> Vec<(usize, usize)> {
        let mut ranges = Vec::new();
        let mut start = 0;
        for (i, t) in self.transitions.iter().enumerate() {
            if t.episode_done() || i + 1 == self.transitions.len() {
                ranges.push((start, i + 1));
                start = i + 1;
            }
        }
        ranges
    }

    /// Mean return of finished episodes, falling back to the trailing
    /// fragment's return when no episode finished.
    pub fn mean_episode_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            self.partial_return
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        }
    }

    pub fn std_episode_return(&self) -> f64 {
        let n = self.episode_returns.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_episode_return();
        let var = self
            .episode_returns
            .iter()
            .map(|r| (r - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        var.sqrt()
    }
}

/// Collection settings for one call of [`collect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectConfig {
    /// Transitions per batch (T).
    pub horizon: usize,
    /// η, in the same units as the scaled reward.
    pub deliberation_cost: f64,
    /// Multiplier applied to environment rewards before the cost.
    pub reward_scale: f64,
}

/// Runs the agent for exactly `config.horizon` steps, starting from a fresh
/// episode.
///
/// An option runs until its termination fires in the next state; a new
/// option is then drawn from `μ(·|s')` and `η` is charged on the transition
/// where termination happened. Episode ends reset the environment and draw
/// the first option without cost. A single-option agent is never charged.
pub fn collect<E, P>(
    agent: &OptionAgent,
    env: &mut dyn Environment,
    config: &CollectConfig,
    env_rng: &mut E,
    policy_rng: &mut P,
) -> Result<TrajectoryBatch, RolloutError>
where
    E: Rng,
    P: Rng,
{
    if config.horizon == 0 {
        return Err(RolloutError::EmptyHorizon);
    }
    let spec = env.spec().clone();
    let bounds = (spec.action_low.as_slice(), spec.action_high.as_slice());
    let cost = if agent.n_options() > 1 {
        config.deliberation_cost
    } else {
        0.0
    };

    let mut state = env.reset(env_rng);
    let mut on_ice = env.on_ice();
    let mut actor: ActorOutputs = agent.actor_outputs(&state)?;
    let mut option = actor.sample_option(policy_rng);

    let mut transitions = Vec::with_capacity(config.horizon);
    let mut episode_returns = Vec::new();
    let mut episode_successes = Vec::new();
    let mut episode_return = 0.0;
    let mut episode_id = 0;
    let mut final_bootstrap = 0.0;

    for t in 0..config.horizon {
        let current_episode = episode_id;
        let sample = actor.sample(option, bounds, policy_rng);
        let option_prob_old = actor.option_probs[option];
        let result = env.step(&sample.clamped)?;
        episode_return += result.reward;

        let next_state = result.observation;
        let mut terminated = false;
        let mut switched = false;
        let mut charged = 0.0;
        let end;
        let next_option;
        let mut resumed_state = None;
        if result.done {
            end = if result.info.truncated {
                let q = agent.critic_outputs(&next_state)?.q;
                StepEnd::Truncated {
                    bootstrap: q[option],
                }
            } else {
                StepEnd::Terminal
            };
            episode_returns.push(episode_return);
            episode_successes.push(result.info.success);
            episode_return = 0.0;
            episode_id += 1;

            let first = env.reset(env_rng);
            actor = agent.actor_outputs(&first)?;
            next_option = actor.sample_option(policy_rng);
            resumed_state = Some((first, env.on_ice()));
        } else {
            end = StepEnd::Continue;
            let critic = agent.critic_outputs(&next_state)?;
            terminated = policy_rng.random::<f64>() < critic.termination[option];
            actor = agent.actor_outputs(&next_state)?;
            next_option = if terminated {
                charged = cost;
                let chosen = actor.sample_option(policy_rng);
                switched = chosen != option;
                chosen
            } else {
                option
            };
            if t + 1 == config.horizon {
                final_bootstrap = critic.q[next_option];
            }
        }

        let (following, following_on_ice) =
            resumed_state.unwrap_or_else(|| (next_state.clone(), result.info.on_ice));
        transitions.push(Transition {
            state: std::mem::replace(&mut state, following),
            option,
            action: sample.raw,
            env_reward: result.reward,
            adjusted_reward: config.reward_scale * result.reward - charged,
            log_prob_old: sample.log_prob,
            option_prob_old,
            next_state,
            terminated_option: terminated,
            switched,
            end,
            episode_id: current_episode,
            on_ice: std::mem::replace(&mut on_ice, following_on_ice),
        });
        option = next_option;
    }

    Ok(TrajectoryBatch {
        transitions,
        final_bootstrap,
        episode_returns,
        episode_successes,
        partial_return: episode_return,
        n_options: agent.n_options(),
        has_terrain: spec.has_terrain,
    })
}

/// Option usage summary for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionUsage {
    /// Fraction of steps spent in each option.
    pub frequencies: Vec<f64>,
    /// Option switches per step. Every termination hands control back to
    /// `μ`, so this counts termination firings, including those where `μ`
    /// re-picks the same option.
    pub switch_rate: f64,
    /// Steps after which a different option took over, per step.
    pub change_rate: f64,
    /// Per-option frequencies over steps taken on ice, when any exist.
    pub on_ice: Option<Vec<f64>>,
    /// Per-option frequencies over steps taken off ice, when any exist.
    pub off_ice: Option<Vec<f64>>,
}

impl OptionUsage {
    /// Most frequently used option overall (lowest index on ties).
    pub fn dominant_option(&self) -> usize {
        argmax(&self.frequencies)
    }

    /// `|P(dominant | on ice) − P(dominant | off ice)|`, when both are defined.
    pub fn terrain_specialization(&self) -> Option<f64> {
        let dominant = self.dominant_option();
        match (&self.on_ice, &self.off_ice) {
            (Some(on), Some(off)) => Some((on[dominant] - off[dominant]).abs()),
            _ => None,
        }
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Counts how options were used. Terrain-conditional frequencies are only
/// reported for environments with terrain.
pub fn option_usage_stats(batch: &TrajectoryBatch) -> OptionUsage {
    usage_from_steps(
        batch.n_options,
        batch.has_terrain,
        batch
            .transitions
            .iter()
            .map(|t| (t.option, t.on_ice, t.terminated_option, t.switched)),
    )
}

/// Usage statistics from `(option, on_ice, terminated, switched)` step records.
pub fn usage_from_steps(
    n_options: usize,
    has_terrain: bool,
    steps: impl IntoIterator<Item = (usize, bool, bool, bool)>,
) -> OptionUsage {
    let mut counts = vec![0usize; n_options];
    let mut ice = vec![0usize; n_options];
    let mut ground = vec![0usize; n_options];
    let (mut total, mut switches, mut terminations) = (0usize, 0usize, 0usize);
    for (option, on_ice, terminated, switched) in steps {
        total += 1;
        counts[option] += 1;
        if on_ice {
            ice[option] += 1;
        } else {
            ground[option] += 1;
        }
        terminations += usize::from(terminated);
        switches += usize::from(switched);
    }
    let normalize = |c: &[usize]| -> Option<Vec<f64>> {
        let n: usize = c.iter().sum();
        (n > 0).then(|| c.iter().map(|&k| k as f64 / n as f64).collect())
    };
    let per_step = |k: usize| {
        if total == 0 {
            0.0
        } else {
            k as f64 / total as f64
        }
    };
    OptionUsage {
        frequencies: normalize(&counts).unwrap_or_else(|| vec![0.0; n_options]),
        switch_rate: per_step(terminations),
        change_rate: per_step(switches),
        on_ice: if has_terrain { normalize(&ice) } else { None },
        off_ice: if has_terrain {
            normalize(&ground)
        } else {
            None
        },
    }
}
