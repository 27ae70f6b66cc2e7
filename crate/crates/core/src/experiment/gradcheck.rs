//! Finite-difference audit of every training-loss gradient.
//!
//! Analytic gradients come from the trainer's taped losses; the numeric side
//! re-evaluates the same losses with plain arithmetic on per-state network
//! outputs, so a wrong sign or factor in either path shows up as a mismatch.

use rand::Rng;
use rand_distr::StandardNormal;

use super::ExperimentError;
use crate::agent::{AgentShape, OptionAgent};
use crate::nn::{ParamId, Tape, Tensor, HALF_LN_TWO_PI};
use crate::rng::{stream, StreamRng};
use crate::trainer::{record_losses, Minibatch};

pub const LOSS_NAMES: [&str; 5] = [
    "clipped_surrogate",
    "termination",
    "option_policy",
    "value",
    "total",
];
pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const ABSOLUTE_FLOOR: f64 = 1e-6;
const CLIP: f64 = 0.2;
const ROWS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub seeds: usize,
    /// Largest relative error per entry of [`LOSS_NAMES`], over all seeds.
    pub max_errors: [f64; 5],
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_errors.iter().all(|&e| e < TOLERANCE)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "gradient check over {} seeds (step {STEP:e}, tolerance {TOLERANCE:e}, absolute floor {ABSOLUTE_FLOOR:e})\n",
            self.seeds
        );
        for (name, err) in LOSS_NAMES.iter().zip(self.max_errors) {
            let verdict = if err < TOLERANCE { "ok" } else { "FAIL" };
            out += &format!("{name:<18} max relative error {err:.3e}  {verdict}\n");
        }
        out += if self.passed() { "PASS\n" } else { "FAIL\n" };
        out
    }
}

struct Case {
    agent: OptionAgent,
    mb: Minibatch,
    entropy_coef: f64,
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Importance ratios kept at least 0.05 away from the clip edges.
fn ratio(rng: &mut StreamRng) -> f64 {
    let ranges = [(0.5, 0.75), (0.85, 1.15), (1.25, 1.6)];
    let (lo, hi) = ranges[rng.random_range(0..ranges.len())];
    rng.random_range(lo..hi)
}

fn random_case(seed: u64) -> Result<Case, ExperimentError> {
    let mut rng = stream(seed, 0);
    let shape = AgentShape {
        observation_dim: rng.random_range(1..=3),
        action_dim: rng.random_range(1..=2),
        n_options: rng.random_range(2..=3),
        hidden: rng.random_range(3..=5),
    };
    let mut agent = OptionAgent::new(shape, &mut rng)?;
    // Move away from the small-head initialization so every term matters.
    for set in agent.parameter_sets_mut() {
        let ids: Vec<ParamId> = set.ids().collect();
        for id in ids {
            for x in set.value_mut(id).data_mut() {
                *x += 0.3 * normal(&mut rng);
            }
        }
    }
    let matrix = |cols: usize, rng: &mut StreamRng| -> Result<Tensor, ExperimentError> {
        Ok(Tensor::matrix(
            ROWS,
            cols,
            (0..ROWS * cols).map(|_| normal(rng)).collect(),
        )?)
    };
    let states = matrix(shape.observation_dim, &mut rng)?;
    let next_states = matrix(shape.observation_dim, &mut rng)?;
    let actions = matrix(shape.action_dim, &mut rng)?;
    let options: Vec<usize> = (0..ROWS)
        .map(|_| rng.random_range(0..shape.n_options))
        .collect();
    let column = |rng: &mut StreamRng| (0..ROWS).map(|_| normal(rng)).collect::<Vec<f64>>();
    let advantages = column(&mut rng);
    let returns = column(&mut rng);
    let termination_advantages = column(&mut rng);
    let mut termination_mask: Vec<f64> = (0..ROWS)
        .map(|_| if rng.random::<f64>() < 0.8 { 1.0 } else { 0.0 })
        .collect();
    termination_mask[0] = 1.0;
    let log_prob_old = (0..ROWS)
        .map(|i| {
            let lp = agent.action_log_prob(states.row(i), options[i], actions.row(i))?;
            Ok(lp - ratio(&mut rng).ln())
        })
        .collect::<Result<Vec<f64>, ExperimentError>>()?;
    Ok(Case {
        agent,
        mb: Minibatch {
            states,
            next_states,
            actions,
            options,
            log_prob_old,
            advantages,
            returns,
            termination_advantages,
            termination_mask,
        },
        entropy_coef: if seed % 2 == 1 { 0.01 } else { 0.0 },
    })
}

/// The five losses evaluated from per-state outputs with plain arithmetic.
fn reference_losses(case: &Case) -> Result<[f64; 5], ExperimentError> {
    let mb = &case.mb;
    let n = mb.len() as f64;
    let (mut surrogate, mut entropy, mut option, mut value) = (0.0, 0.0, 0.0, 0.0);
    let (mut termination, mut active) = (0.0, 0.0);
    for i in 0..mb.len() {
        let o = mb.options[i];
        let actor = case.agent.actor_outputs(mb.states.row(i))?;
        let log_prob: f64 = mb
            .actions
            .row(i)
            .iter()
            .zip(actor.mean(o).iter().zip(actor.log_std(o)))
            .map(|(&a, (&m, &s))| {
                let z = (a - m) / s.exp();
                -s - HALF_LN_TWO_PI - 0.5 * z * z
            })
            .sum();
        let rho = (log_prob - mb.log_prob_old[i]).exp();
        let adv = mb.advantages[i];
        surrogate += (rho * adv).min(rho.clamp(1.0 - CLIP, 1.0 + CLIP) * adv);
        entropy += actor
            .log_std(o)
            .iter()
            .map(|s| s + 0.5 + HALF_LN_TWO_PI)
            .sum::<f64>();
        option += actor.option_probs[o].ln() * adv;

        let critic = case.agent.critic_outputs(mb.states.row(i))?;
        value += (mb.returns[i] - critic.q[o]).powi(2);
        let next = case.agent.critic_outputs(mb.next_states.row(i))?;
        termination += mb.termination_mask[i] * next.termination[o] * mb.termination_advantages[i];
        active += mb.termination_mask[i];
    }
    let surrogate = -surrogate / n - case.entropy_coef * entropy / n;
    let option = -option / n;
    let value = value / n;
    let termination = termination / active.max(1.0);
    Ok([
        surrogate,
        termination,
        option,
        value,
        surrogate + termination + option + value,
    ])
}

/// Flattened analytic gradients (actor then critic) of each loss.
fn analytic_gradients(
    case: &mut Case,
    flip_termination: bool,
) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let mut out = Vec::with_capacity(5);
    for k in 0..5 {
        let mut tape = Tape::new();
        let losses = record_losses(&mut tape, &case.agent, &case.mb, CLIP, case.entropy_coef)?;
        let mut termination = losses
            .termination
            .expect("gradcheck agents have several options");
        if flip_termination {
            termination = tape.scale(termination, -1.0);
        }
        let target = match k {
            0 => losses.surrogate,
            1 => termination,
            2 => losses.option_policy,
            3 => losses.value,
            _ => {
                let a = tape.add(losses.surrogate, termination)?;
                let b = tape.add(a, losses.option_policy)?;
                tape.add(b, losses.value)?
            }
        };
        case.agent.zero_grad();
        tape.backward(target, &mut case.agent.parameter_sets_mut())?;
        let mut flat = Vec::new();
        for set in [case.agent.actor(), case.agent.critic()] {
            for id in set.ids() {
                flat.extend_from_slice(set.grad(id).data());
            }
        }
        out.push(flat);
    }
    Ok(out)
}

/// Central differences of all five reference losses, flattened like
/// [`analytic_gradients`].
fn numeric_gradients(case: &mut Case) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let mut out = vec![Vec::new(); 5];
    for which in 0..2 {
        let ids: Vec<ParamId> = case.agent.parameter_sets_mut()[which].ids().collect();
        for id in ids {
            let len = case.agent.parameter_sets_mut()[which].value(id).len();
            for j in 0..len {
                let eval = |delta: f64, case: &mut Case| -> Result<[f64; 5], ExperimentError> {
                    let original = case.agent.parameter_sets_mut()[which].value(id).data()[j];
                    case.agent.parameter_sets_mut()[which]
                        .value_mut(id)
                        .data_mut()[j] = original + delta;
                    let losses = reference_losses(case);
                    case.agent.parameter_sets_mut()[which]
                        .value_mut(id)
                        .data_mut()[j] = original;
                    losses
                };
                let up = eval(STEP, case)?;
                let down = eval(-STEP, case)?;
                for k in 0..5 {
                    out[k].push((up[k] - down[k]) / (2.0 * STEP));
                }
            }
        }
    }
    Ok(out)
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over all coordinates.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(ABSOLUTE_FLOOR))
        .fold(0.0, f64::max)
}

/// Checks all loss gradients on `seeds` random small agents and batches.
/// `flip_termination` negates the analytic termination loss, a deliberate
/// bug the check must catch.
pub fn gradcheck(seeds: usize, flip_termination: bool) -> Result<GradcheckReport, ExperimentError> {
    let mut max_errors = [0.0f64; 5];
    for seed in 0..seeds as u64 {
        let mut case = random_case(seed)?;
        let analytic = analytic_gradients(&mut case, flip_termination)?;
        let numeric = numeric_gradients(&mut case)?;
        for k in 0..5 {
            max_errors[k] = max_errors[k].max(relative_error(&analytic[k], &numeric[k]));
        }
    }
    Ok(GradcheckReport { seeds, max_errors })
}
