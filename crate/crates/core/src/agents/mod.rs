//! Learning agents: classical PS and the hybrid amplitude-amplification agent.

mod classical;
mod hybrid;

use rand::Rng;
use thiserror::Error;

use crate::amplification::AaError;
use crate::env::{Action, EnvError, GridLayout, RewardRoute};
use crate::ps::PsError;

pub use classical::ClassicalAgent;
pub use hybrid::HybridAgent;

/// Growth factor of the ramp-up parameter after an unrewarded iteration.
pub const LAMBDA: f64 = 5.0 / 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Ps(#[from] PsError),
    #[error(transparent)]
    Amplification(#[from] AaError),
    #[error("oracle disagrees with the environment on sequence {sequence:?}")]
    OracleMismatch { sequence: Vec<Action> },
    #[error("q_est must be positive, got {0}")]
    NonPositiveEstimate(f64),
}

/// The environment as the harness currently presents it.
#[derive(Debug, Clone, Copy)]
pub struct ActiveEnv<'a> {
    pub layout: &'a GridLayout,
    pub route: &'a RewardRoute,
}

/// Outcome of one agent iteration: a single classical episode, or a hybrid
/// iteration of `2k + 1` episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: u32,
    pub episodes_cost: u32,
    /// Ramp-up parameter the iteration drew `k` from (hybrid only).
    pub m: Option<f64>,
    pub sequence: Vec<Action>,
    pub reward_step: Option<usize>,
    pub q_true_before: f64,
    pub q_true_after: f64,
    pub q_est_before: Option<f64>,
    pub q_est_after: Option<f64>,
    /// Truncated sequences dropped from the found-reward set.
    pub purged: Vec<Vec<Action>>,
}

impl IterationRecord {
    pub fn rewarded(&self) -> bool {
        self.reward_step.is_some()
    }
}

/// Uniform integer in `{0, .., ceil(m) - 1}`.
pub fn next_k<R: Rng + ?Sized>(m: f64, rng: &mut R) -> u32 {
    debug_assert!(m >= 1.0);
    let upper = m.ceil().max(1.0) as u32;
    rng.random_range(0..upper)
}

/// `min(LAMBDA * m, q_est^(-1/2))`.
pub fn update_m(m: f64, q_est: f64) -> Result<f64, AgentError> {
    if q_est.is_nan() || q_est <= 0.0 {
        return Err(AgentError::NonPositiveEstimate(q_est));
    }
    Ok((LAMBDA * m).min(q_est.powf(-0.5)))
}
