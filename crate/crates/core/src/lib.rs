//! Proximal policy option-critic.
//!
//! Options (intra-option Gaussian policies plus learned terminations) and a
//! softmax policy over options, trained with the clipped PPO surrogate and a
//! deliberation cost on option termination. Everything numeric runs on the
//! small tape-based autodiff in [`nn`].

pub mod advantage;
pub mod agent;
pub mod env;
pub mod experiment;
pub mod nn;
pub mod rng;
pub mod rollout;
pub mod trainer;
