//! The two-network option agent.
//!
//! The actor maps a state to the softmax policy over options `μ(o|s)` and to
//! one Gaussian intra-option policy per option (state-dependent mean,
//! state-independent log standard deviation). The critic maps a state to the
//! option values `Q(s, o)` and the termination probabilities `β(s, o)`.
//! Both are two tanh hidden layers; they share no parameters.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::nn::{
    gaussian_entropy, softmax_in_place, NnError, ParamId, ParameterSet, Tape, Tensor, Var,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent shape: {0}")]
    InvalidShape(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error("state has {got} entries, agent expects {expected}")]
    StateDim { expected: usize, got: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Layer sizes of an [`OptionAgent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentShape {
    pub observation_dim: usize,
    pub action_dim: usize,
    pub n_options: usize,
    pub hidden: usize,
}

impl AgentShape {
    fn validate(&self) -> Result<(), AgentError> {
        for (name, value) in [
            ("observation_dim", self.observation_dim),
            ("action_dim", self.action_dim),
            ("n_options", self.n_options),
            ("hidden", self.hidden),
        ] {
            if value == 0 {
                return Err(AgentError::InvalidShape(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ActorParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub option_w: ParamId,
    pub option_b: ParamId,
    pub mean_w: ParamId,
    pub mean_b: ParamId,
    /// `[n_options, action_dim]`
    pub log_std: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub q_w: ParamId,
    pub q_b: ParamId,
    pub termination_w: ParamId,
    pub termination_b: ParamId,
}

/// Actor outputs recorded on a tape, for a `[batch, observation_dim]` input.
#[derive(Debug, Clone, Copy)]
pub struct ActorHeads {
    /// `[batch, n_options]`
    pub option_log_probs: Var,
    /// `[batch, n_options · action_dim]`, option-major blocks.
    pub means: Var,
    /// `[n_options, action_dim]`
    pub log_std: Var,
}

/// Critic outputs recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct CriticHeads {
    /// `[batch, n_options]`
    pub q: Var,
    /// `[batch, n_options]`, each in `(0, 1)`.
    pub termination: Var,
}

/// A sampled intra-option action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    /// Unclamped draw; log-probabilities always refer to this vector.
    pub raw: Vec<f64>,
    /// `raw` clamped into the environment's action bounds.
    pub clamped: Vec<f64>,
    pub log_prob: f64,
    pub option: usize,
}

#[derive(Debug, Clone)]
pub struct OptionAgent {
    shape: AgentShape,
    actor: ParameterSet,
    critic: ParameterSet,
    actor_ids: ActorParams,
    critic_ids: CriticParams,
}

impl OptionAgent {
    /// Builds an agent with Glorot-uniform weights, zero biases, policy-mean
    /// and option heads scaled down by 100, and unit standard deviations.
    pub fn new<R: Rng + ?Sized>(shape: AgentShape, rng: &mut R) -> Result<Self, AgentError> {
        shape.validate()?;
        let AgentShape {
            observation_dim: obs,
            action_dim: act,
            n_options: n,
            hidden: h,
        } = shape;
        let zeros = |len: usize| Tensor::zeros(&[len]);

        let mut actor = ParameterSet::new();
        let actor_ids = ActorParams {
            w1: actor.add_glorot("actor.w1", h, obs, 1.0, rng),
            b1: actor.add("actor.b1", zeros(h)),
            w2: actor.add_glorot("actor.w2", h, h, 1.0, rng),
            b2: actor.add("actor.b2", zeros(h)),
            option_w: actor.add_glorot("actor.option_w", n, h, 0.01, rng),
            option_b: actor.add("actor.option_b", zeros(n)),
            mean_w: actor.add_glorot("actor.mean_w", n * act, h, 0.01, rng),
            mean_b: actor.add("actor.mean_b", zeros(n * act)),
            log_std: actor.add("actor.log_std", Tensor::zeros(&[n, act])),
        };

        let mut critic = ParameterSet::new();
        let critic_ids = CriticParams {
            w1: critic.add_glorot("critic.w1", h, obs, 1.0, rng),
            b1: critic.add("critic.b1", zeros(h)),
            w2: critic.add_glorot("critic.w2", h, h, 1.0, rng),
            b2: critic.add("critic.b2", zeros(h)),
            q_w: critic.add_glorot("critic.q_w", n, h, 1.0, rng),
            q_b: critic.add("critic.q_b", zeros(n)),
            termination_w: critic.add_glorot("critic.termination_w", n, h, 1.0, rng),
            termination_b: critic.add("critic.termination_b", zeros(n)),
        };

        Ok(Self {
            shape,
            actor,
            critic,
            actor_ids,
            critic_ids,
        })
    }

    pub fn shape(&self) -> AgentShape {
        self.shape
    }

    pub fn n_options(&self) -> usize {
        self.shape.n_options
    }

    pub fn actor(&self) -> &ParameterSet {
        &self.actor
    }

    pub fn critic(&self) -> &ParameterSet {
        &self.critic
    }

    pub fn actor_mut(&mut self) -> &mut ParameterSet {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut ParameterSet {
        &mut self.critic
    }

    /// Both parameter sets, mutably, for `Tape::backward`.
    pub fn parameter_sets_mut(&mut self) -> [&mut ParameterSet; 2] {
        [&mut self.actor, &mut self.critic]
    }

    pub fn actor_params(&self) -> &ActorParams {
        &self.actor_ids
    }

    pub fn critic_params(&self) -> &CriticParams {
        &self.critic_ids
    }

    pub fn zero_grad(&mut self) {
        self.actor.zero_grad();
        self.critic.zero_grad();
    }

    pub fn actor_forward(&self, tape: &mut Tape, states: Var) -> Result<ActorHeads, NnError> {
        let p = &self.actor_ids;
        let set = &self.actor;
        let h = trunk(tape, set, [p.w1, p.b1, p.w2, p.b2], states)?;
        let (ow, ob) = (tape.param(set, p.option_w), tape.param(set, p.option_b));
        let logits = tape.affine(h, ow, ob)?;
        let option_log_probs = tape.log_softmax(logits);
        let (mw, mb) = (tape.param(set, p.mean_w), tape.param(set, p.mean_b));
        let means = tape.affine(h, mw, mb)?;
        let log_std = tape.param(set, p.log_std);
        Ok(ActorHeads {
            option_log_probs,
            means,
            log_std,
        })
    }

    pub fn critic_forward(&self, tape: &mut Tape, states: Var) -> Result<CriticHeads, NnError> {
        let p = &self.critic_ids;
        let set = &self.critic;
        let h = trunk(tape, set, [p.w1, p.b1, p.w2, p.b2], states)?;
        let (qw, qb) = (tape.param(set, p.q_w), tape.param(set, p.q_b));
        let q = tape.affine(h, qw, qb)?;
        let (tw, tb) = (
            tape.param(set, p.termination_w),
            tape.param(set, p.termination_b),
        );
        let logits = tape.affine(h, tw, tb)?;
        let termination = tape.sigmoid(logits);
        Ok(CriticHeads { q, termination })
    }

    fn state_row(&self, state: &[f64]) -> Result<Tensor, AgentError> {
        if state.len() != self.shape.observation_dim {
            return Err(AgentError::StateDim {
                expected: self.shape.observation_dim,
                got: state.len(),
            });
        }
        Ok(Tensor::matrix(1, state.len(), state.to_vec())?)
    }

    /// Evaluates the actor on a single state.
    pub fn actor_outputs(&self, state: &[f64]) -> Result<ActorOutputs, AgentError> {
        let mut tape = Tape::new();
        let s = tape.constant(self.state_row(state)?);
        let heads = self.actor_forward(&mut tape, s)?;
        let mut option_probs: Vec<f64> = tape.value(heads.option_log_probs).data().to_vec();
        softmax_in_place(&mut option_probs);
        Ok(ActorOutputs {
            option_probs,
            means: tape.value(heads.means).data().to_vec(),
            log_std: tape.value(heads.log_std).data().to_vec(),
            action_dim: self.shape.action_dim,
        })
    }

    /// Evaluates the critic on a single state.
    pub fn critic_outputs(&self, state: &[f64]) -> Result<CriticOutputs, AgentError> {
        let mut tape = Tape::new();
        let s = tape.constant(self.state_row(state)?);
        let heads = self.critic_forward(&mut tape, s)?;
        Ok(CriticOutputs {
            q: tape.value(heads.q).data().to_vec(),
            termination: tape.value(heads.termination).data().to_vec(),
        })
    }

    /// `μ(·|s)`
    pub fn option_distribution(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.actor_outputs(state)?.option_probs)
    }

    /// Draws `a = mean(s, o) + σ_o ⊙ z` with `z` standard normal.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        option: usize,
        bounds: (&[f64], &[f64]),
        rng: &mut R,
    ) -> Result<ActionSample, AgentError> {
        self.check_option(option)?;
        Ok(self.actor_outputs(state)?.sample(option, bounds, rng))
    }

    /// `log π(a | s, o)` for an unclamped action.
    pub fn action_log_prob(
        &self,
        state: &[f64],
        option: usize,
        raw_action: &[f64],
    ) -> Result<f64, AgentError> {
        self.check_option(option)?;
        Ok(self.actor_outputs(state)?.log_prob(option, raw_action))
    }

    /// `β(s, o)`
    pub fn termination_prob(&self, state: &[f64], option: usize) -> Result<f64, AgentError> {
        self.check_option(option)?;
        Ok(self.critic_outputs(state)?.termination[option])
    }

    /// `Q(s, ·)`
    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        Ok(self.critic_outputs(state)?.q)
    }

    /// `V(s) = Σ_o μ(o|s) Q(s, o)`.
    pub fn v_value(&self, state: &[f64]) -> Result<f64, AgentError> {
        let mu = self.option_distribution(state)?;
        Ok(expected_value(&mu, &self.q_values(state)?))
    }

    fn check_option(&self, option: usize) -> Result<(), AgentError> {
        if option >= self.shape.n_options {
            return Err(AgentError::InvalidShape(format!(
                "option {option} out of range for {} options",
                self.shape.n_options
            )));
        }
        Ok(())
    }

    fn ordered_params(&self) -> impl Iterator<Item = (&ParameterSet, ParamId)> {
        self.actor
            .ids()
            .map(|id| (&self.actor, id))
            .chain(self.critic.ids().map(|id| (&self.critic, id)))
    }

    /// Writes the checkpoint text format (see the crate README).
    pub fn save<W: Write>(&self, env_name: &str, out: &mut W) -> Result<(), AgentError> {
        let s = &self.shape;
        writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(out, "env {env_name}")?;
        writeln!(out, "observation_dim {}", s.observation_dim)?;
        writeln!(out, "action_dim {}", s.action_dim)?;
        writeln!(out, "n_options {}", s.n_options)?;
        writeln!(out, "hidden {}", s.hidden)?;
        for (set, id) in self.ordered_params() {
            let value = set.value(id);
            let dims: Vec<String> = value.shape().iter().map(|d| d.to_string()).collect();
            writeln!(out, "param {} {}", set.name(id), dims.join(" "))?;
            let values: Vec<String> = value.data().iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", values.join(" "))?;
        }
        writeln!(out, "end")?;
        Ok(())
    }

    /// Reads a checkpoint written by [`OptionAgent::save`]; returns the
    /// environment name recorded in it alongside the agent.
    pub fn load<R: BufRead>(input: R) -> Result<(String, Self), AgentError> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String), AgentError> {
            match lines.next() {
                Some((n, line)) => Ok((n, line?)),
                None => Err(AgentError::Checkpoint {
                    line: 0,
                    message: format!("unexpected end of file, expected {what}"),
                }),
            }
        };
        let bad = |line: usize, message: String| AgentError::Checkpoint { line, message };

        let (n, header) = next("header")?;
        if header != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(bad(n, format!("unrecognized header {header:?}")));
        }
        let mut field = |key: &str| -> Result<(usize, String), AgentError> {
            let (n, line) = next(key)?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.to_string())),
                _ => Err(bad(n, format!("expected `{key} <value>`, found {line:?}"))),
            }
        };
        let (_, env) = field("env")?;
        let mut dims = [0usize; 4];
        for (slot, key) in
            dims.iter_mut()
                .zip(["observation_dim", "action_dim", "n_options", "hidden"])
        {
            let (n, v) = field(key)?;
            *slot = v
                .parse()
                .map_err(|_| bad(n, format!("{key} is not an integer: {v:?}")))?;
        }
        let shape = AgentShape {
            observation_dim: dims[0],
            action_dim: dims[1],
            n_options: dims[2],
            hidden: dims[3],
        };
        // Every value is overwritten below; the generator only fixes shapes.
        let mut agent = Self::new(shape, &mut crate::rng::stream(0, 0))?;

        let expected: Vec<(bool, ParamId, String, Vec<usize>)> = agent
            .actor
            .ids()
            .map(|id| (true, id))
            .chain(agent.critic.ids().map(|id| (false, id)))
            .map(|(is_actor, id)| {
                let set = if is_actor {
                    &agent.actor
                } else {
                    &agent.critic
                };
                (
                    is_actor,
                    id,
                    set.name(id).to_string(),
                    set.value(id).shape().to_vec(),
                )
            })
            .collect();
        for (is_actor, id, name, shape) in expected {
            let (n, line) = next(&name)?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some("param") || parts.next() != Some(name.as_str()) {
                return Err(bad(n, format!("expected parameter {name}, found {line:?}")));
            }
            let found: Vec<usize> = parts.filter_map(|d| d.parse().ok()).collect();
            if found != shape {
                return Err(bad(
                    n,
                    format!("parameter {name} has shape {found:?}, expected {shape:?}"),
                ));
            }
            let (n, line) = next("parameter values")?;
            let values = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| bad(n, format!("bad value in {name}: {e}")))?;
            let tensor = Tensor::new(shape, values).map_err(|e| bad(n, format!("{name}: {e}")))?;
            let set = if is_actor {
                &mut agent.actor
            } else {
                &mut agent.critic
            };
            set.set_value(id, tensor)?;
        }
        let (n, line) = next("end")?;
        if line != "end" {
            return Err(bad(n, format!("expected `end`, found {line:?}")));
        }
        Ok((env, agent))
    }
}

pub const CHECKPOINT_MAGIC: &str = "ppoc-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn trunk(
    tape: &mut Tape,
    set: &ParameterSet,
    [w1, b1, w2, b2]: [ParamId; 4],
    states: Var,
) -> Result<Var, NnError> {
    let (w1, b1) = (tape.param(set, w1), tape.param(set, b1));
    let h = tape.affine(states, w1, b1)?;
    let h = tape.tanh(h);
    let (w2, b2) = (tape.param(set, w2), tape.param(set, b2));
    let h = tape.affine(h, w2, b2)?;
    Ok(tape.tanh(h))
}

/// `Σ_o μ(o) Q(o)`
pub fn expected_value(mu: &[f64], q: &[f64]) -> f64 {
    mu.iter().zip(q).map(|(m, q)| m * q).sum()
}

/// Actor outputs for one state, detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorOutputs {
    pub option_probs: Vec<f64>,
    pub means: Vec<f64>,
    pub log_std: Vec<f64>,
    action_dim: usize,
}

impl ActorOutputs {
    pub fn mean(&self, option: usize) -> &[f64] {
        &self.means[option * self.action_dim..(option + 1) * self.action_dim]
    }

    pub fn log_std(&self, option: usize) -> &[f64] {
        &self.log_std[option * self.action_dim..(option + 1) * self.action_dim]
    }

    pub fn log_prob(&self, option: usize, raw_action: &[f64]) -> f64 {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(raw_action.to_vec()));
        let m = tape.constant(Tensor::vector(self.mean(option).to_vec()));
        let s = tape.constant(Tensor::vector(self.log_std(option).to_vec()));
        let lp = tape
            .gaussian_log_prob(a, m, s)
            .expect("action, mean and log_std share the action dimension");
        tape.value(lp).data()[0]
    }

    pub fn entropy(&self, option: usize) -> f64 {
        gaussian_entropy(self.log_std(option))
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        option: usize,
        (low, high): (&[f64], &[f64]),
        rng: &mut R,
    ) -> ActionSample {
        let raw: Vec<f64> = self
            .mean(option)
            .iter()
            .zip(self.log_std(option))
            .map(|(&m, &s)| {
                let z: f64 = rng.sample(StandardNormal);
                m + s.exp() * z
            })
            .collect();
        let clamped = raw
            .iter()
            .zip(low.iter().zip(high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect();
        let log_prob = self.log_prob(option, &raw);
        ActionSample {
            raw,
            clamped,
            log_prob,
            option,
        }
    }

    /// Draws an option index from `μ(·|s)`.
    pub fn sample_option<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.option_probs, rng)
    }
}

/// Critic outputs for one state, detached from any tape.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticOutputs {
    pub q: Vec<f64>,
    pub termination: Vec<f64>,
}

/// Inverse-CDF draw from a probability vector. Always consumes one uniform.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests;
