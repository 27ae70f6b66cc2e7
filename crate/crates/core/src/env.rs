//! Continuous-action control tasks.
//!
//! * `pointmass1d`: drive a damped-free point mass to `p = 1` and hold it.
//! * `icecorridor`: run down a length-10 corridor containing two frictionless
//!   ice blocks; crossing ice only works with momentum carried in from normal
//!   terrain, and stalling on ice ends the episode.
//!
//! Both tasks are deterministic given the reset stream and the actions.

use rand::{Rng, RngCore};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("unknown environment {0:?} (expected \"pointmass1d\" or \"icecorridor\")")]
    UnknownEnvironment(String),
    #[error("step called on an episode that has finished or was never reset")]
    EpisodeNotActive,
    #[error("action has {got} dimensions, environment expects {expected}")]
    ActionDim { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub name: &'static str,
    pub observation_dim: usize,
    pub action_dim: usize,
    pub max_episode_steps: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    /// Whether [`StepInfo::on_ice`] carries meaning for this task.
    pub has_terrain: bool,
}

impl EnvironmentSpec {
    /// Clamps each action component into the environment's bounds.
    pub fn clamp_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepInfo {
    /// The task's goal was reached.
    pub success: bool,
    /// The new state lies on ice.
    pub on_ice: bool,
    /// The episode ended only because the step limit was hit.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvironmentSpec;

    /// Starts a new episode and returns the first observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Advances one step. Actions are clamped into bounds before use.
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;

    /// Whether the current state lies on special terrain.
    fn on_ice(&self) -> bool {
        false
    }
}

pub const POINTMASS: &str = "pointmass1d";
pub const ICE_CORRIDOR: &str = "icecorridor";

/// Builds an environment from its configuration name.
pub fn make(name: &str) -> Result<Box<dyn Environment>, EnvError> {
    match name {
        POINTMASS => Ok(Box::new(PointMass::new())),
        ICE_CORRIDOR => Ok(Box::new(IceCorridor::new())),
        other => Err(EnvError::UnknownEnvironment(other.to_string())),
    }
}

fn scalar_action(spec: &EnvironmentSpec, action: &[f64]) -> Result<f64, EnvError> {
    if action.len() != spec.action_dim {
        return Err(EnvError::ActionDim {
            expected: spec.action_dim,
            got: action.len(),
        });
    }
    Ok(action[0].clamp(spec.action_low[0], spec.action_high[0]))
}

/// One-dimensional point mass; observation `[p, v]`.
#[derive(Debug, Clone)]
pub struct PointMass {
    spec: EnvironmentSpec,
    position: f64,
    velocity: f64,
    steps: usize,
    active: bool,
}

impl PointMass {
    pub const GOAL: f64 = 1.0;
    pub const MAX_STEPS: usize = 200;

    pub fn new() -> Self {
        Self {
            spec: EnvironmentSpec {
                name: POINTMASS,
                observation_dim: 2,
                action_dim: 1,
                max_episode_steps: Self::MAX_STEPS,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                has_terrain: false,
            },
            position: 0.0,
            velocity: 0.0,
            steps: 0,
            active: false,
        }
    }

    /// Places the mass at `(position, velocity)` and starts a fresh episode.
    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.active = true;
    }

    pub fn state(&self) -> (f64, f64) {
        (self.position, self.velocity)
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let u: f64 = rng.random();
        // Uniform on [-1.2, -0.8); u = 0.5 lands exactly on -1.
        self.set_state(-1.0 + 0.4 * (u - 0.5), 0.0);
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.active {
            return Err(EnvError::EpisodeNotActive);
        }
        let a = scalar_action(&self.spec, action)?;
        self.velocity = (self.velocity + 0.1 * a).clamp(-1.0, 1.0);
        self.position = (self.position + 0.1 * self.velocity).clamp(-2.0, 2.0);
        self.steps += 1;
        let reward = -(self.position - Self::GOAL).abs() - 0.001 * a * a;
        let done = self.steps >= Self::MAX_STEPS;
        self.active = !done;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done,
            info: StepInfo {
                success: false,
                on_ice: false,
                truncated: done,
            },
        })
    }
}

/// Corridor with ice blocks on `[3, 4)` and `[7, 8)`.
///
/// Observation: `[p / 10, v, min(max(d, 0), 2) / 2, on_ice]` where `d` is the
/// distance to the start of the next ice block at or ahead of `p` (2 when no
/// block remains).
#[derive(Debug, Clone)]
pub struct IceCorridor {
    spec: EnvironmentSpec,
    position: f64,
    velocity: f64,
    steps: usize,
    active: bool,
}

impl IceCorridor {
    pub const LENGTH: f64 = 10.0;
    pub const ICE: [(f64, f64); 2] = [(3.0, 4.0), (7.0, 8.0)];
    pub const MAX_STEPS: usize = 400;
    pub const STUCK_SPEED: f64 = 0.05;
    pub const STUCK_PENALTY: f64 = -1.0;
    pub const GOAL_BONUS: f64 = 10.0;
    /// Sensing range of the distance-to-ice feature.
    pub const LOOKAHEAD: f64 = 2.0;

    pub fn new() -> Self {
        Self {
            spec: EnvironmentSpec {
                name: ICE_CORRIDOR,
                observation_dim: 4,
                action_dim: 1,
                max_episode_steps: Self::MAX_STEPS,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                has_terrain: true,
            },
            position: 0.0,
            velocity: 0.0,
            steps: 0,
            active: false,
        }
    }

    /// Whether `position` lies inside a half-open ice interval.
    pub fn is_ice(position: f64) -> bool {
        Self::ICE
            .iter()
            .any(|&(start, end)| position >= start && position < end)
    }

    fn distance_to_next_ice(position: f64) -> f64 {
        Self::ICE
            .iter()
            .map(|&(start, _)| start)
            .find(|&start| start >= position)
            .map_or(Self::LOOKAHEAD, |start| start - position)
            .clamp(0.0, Self::LOOKAHEAD)
    }

    /// Observation for an arbitrary `(position, velocity)`.
    pub fn observe(position: f64, velocity: f64) -> Vec<f64> {
        vec![
            position / Self::LENGTH,
            velocity,
            Self::distance_to_next_ice(position) / Self::LOOKAHEAD,
            if Self::is_ice(position) { 1.0 } else { 0.0 },
        ]
    }

    /// Places the runner at `(position, velocity)` and starts a fresh episode.
    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.active = true;
    }

    pub fn state(&self) -> (f64, f64) {
        (self.position, self.velocity)
    }
}

impl Default for IceCorridor {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for IceCorridor {
    fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.set_state(0.0, 0.0);
        Self::observe(0.0, 0.0)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.active {
            return Err(EnvError::EpisodeNotActive);
        }
        let a = scalar_action(&self.spec, action)?;
        if Self::is_ice(self.position) {
            self.velocity += 0.01 * a;
        } else {
            self.velocity = 0.9 * self.velocity + 0.1 * a;
        }
        let previous = self.position;
        self.position += 0.1 * self.velocity;
        self.steps += 1;

        let mut reward = self.position - previous - 0.01 * a * a;
        let on_ice = Self::is_ice(self.position);
        let mut info = StepInfo {
            on_ice,
            ..StepInfo::default()
        };
        let done = if self.position >= Self::LENGTH {
            reward += Self::GOAL_BONUS;
            info.success = true;
            true
        } else if on_ice && self.velocity.abs() < Self::STUCK_SPEED {
            reward += Self::STUCK_PENALTY;
            true
        } else if self.steps >= Self::MAX_STEPS {
            info.truncated = true;
            true
        } else {
            false
        };
        self.active = !done;
        Ok(StepResult {
            observation: Self::observe(self.position, self.velocity),
            reward,
            done,
            info,
        })
    }

    fn on_ice(&self) -> bool {
        Self::is_ice(self.position)
    }
}

/// Hand-written controllers that solve each task; their returns set the
/// reference scores used to judge learned policies.
pub mod scripted {
    use rand::RngCore;

    use super::{make, EnvError, PointMass, ICE_CORRIDOR, POINTMASS};

    /// PD controller toward the goal on `[p, v]` observations.
    pub fn pointmass_action(observation: &[f64]) -> f64 {
        let (p, v) = (observation[0], observation[1]);
        (10.0 * (PointMass::GOAL - p) - 5.0 * v).clamp(-1.0, 1.0)
    }

    /// Builds speed to about 0.8 on normal terrain and coasts over ice.
    pub fn icecorridor_action(observation: &[f64]) -> f64 {
        let (v, on_ice) = (observation[1], observation[3] > 0.5);
        if on_ice {
            0.0
        } else if v < 0.8 {
            1.0
        } else {
            0.8
        }
    }

    pub fn action(env_name: &str, observation: &[f64]) -> Result<f64, EnvError> {
        match env_name {
            POINTMASS => Ok(pointmass_action(observation)),
            ICE_CORRIDOR => Ok(icecorridor_action(observation)),
            other => Err(EnvError::UnknownEnvironment(other.to_string())),
        }
    }

    /// Outcome of one scripted episode.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Episode {
        pub total_reward: f64,
        pub steps: usize,
        pub success: bool,
    }

    pub fn run_episode(env_name: &str, rng: &mut dyn RngCore) -> Result<Episode, EnvError> {
        let mut env = make(env_name)?;
        let mut obs = env.reset(rng);
        let mut episode = Episode {
            total_reward: 0.0,
            steps: 0,
            success: false,
        };
        loop {
            let result = env.step(&[action(env_name, &obs)?])?;
            episode.total_reward += result.reward;
            episode.steps += 1;
            obs = result.observation;
            if result.done {
                episode.success = result.info.success;
                return Ok(episode);
            }
        }
    }

    /// Mean scripted return over `episodes` resets drawn from `rng`.
    pub fn mean_return(
        env_name: &str,
        episodes: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64, EnvError> {
        let mut total = 0.0;
        for _ in 0..episodes {
            total += run_episode(env_name, rng)?.total_reward;
        }
        Ok(total / episodes.max(1) as f64)
    }
}
