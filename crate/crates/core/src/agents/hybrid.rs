use std::collections::BTreeSet;

use rand::Rng;

use super::{next_k, update_m, ActiveEnv, AgentError, IterationRecord};
use crate::amplification::{Branch, OracleSet, PreparedState};
use crate::env::{run_episode, Action, Cell, NUM_ACTIONS};
use crate::ps::{Ecm, PsParams};

/// Hybrid agent with found-reward bookkeeping and optional purging.
///
/// Each iteration draws `k` from the ramp-up parameter, measures the
/// amplified sequence distribution, and tests the measured sequence in one
/// classical episode. The iteration is charged `2k + 1` episodes and the
/// policy update dissipates accordingly.
#[derive(Debug, Clone)]
pub struct HybridAgent {
    ecm: Ecm,
    params: PsParams,
    start: Cell,
    horizon: usize,
    m: f64,
    q_est: f64,
    r_found: BTreeSet<Vec<Action>>,
    purging: bool,
    episodes_consumed: u64,
    prepared: PreparedState,
}

impl HybridAgent {
    /// `purging` enables removal of contradicted sequences from the
    /// found-reward set; stationary scenarios run without it.
    pub fn new(params: PsParams, start: Cell, horizon: usize, purging: bool) -> Self {
        let ecm = Ecm::new();
        let prepared = PreparedState::prepare(&ecm, &params, start, horizon);
        Self {
            ecm,
            params,
            start,
            horizon,
            m: 1.0,
            q_est: fallback_estimate(horizon),
            r_found: BTreeSet::new(),
            purging,
            episodes_consumed: 0,
            prepared,
        }
    }

    pub fn ecm(&self) -> &Ecm {
        &self.ecm
    }

    pub fn params(&self) -> &PsParams {
        &self.params
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn q_est(&self) -> f64 {
        self.q_est
    }

    pub fn r_found(&self) -> &BTreeSet<Vec<Action>> {
        &self.r_found
    }

    pub fn episodes_consumed(&self) -> u64 {
        self.episodes_consumed
    }

    pub fn prepared(&self) -> &PreparedState {
        &self.prepared
    }

    /// One full iteration. `max_episodes` caps the cost `2k + 1` when the
    /// harness has a fixed episode budget left.
    pub fn iterate<R: Rng + ?Sized>(
        &mut self,
        env: ActiveEnv<'_>,
        oracle: &OracleSet,
        rng: &mut R,
        max_episodes: Option<u32>,
    ) -> Result<IterationRecord, AgentError> {
        let m_before = self.m;
        let q_est_before = self.q_est;
        let mut k = next_k(self.m, rng);
        if let Some(budget) = max_episodes {
            k = k.min(budget.saturating_sub(1) / 2);
        }
        let measured = self.prepared.measure(oracle, k, rng)?;
        let traj = run_episode(env.layout, env.route, &measured.sequence)?;
        if traj.rewarded() != (measured.branch == Branch::Rewarded) {
            return Err(AgentError::OracleMismatch {
                sequence: measured.sequence,
            });
        }
        let cost = 2 * k + 1;
        self.episodes_consumed += u64::from(cost);

        self.ecm.policy_update(
            &self.params,
            traj.executed_actions(),
            &traj.percepts,
            traj.rewarded(),
            cost,
        )?;
        if traj.rewarded() {
            self.r_found.insert(traj.executed_actions().to_vec());
        }
        let purged = self.update_q_est(&measured.sequence, traj.rewarded());
        if traj.rewarded() {
            self.m = 1.0;
        } else {
            self.m = update_m(self.m, self.q_est)?;
        }
        self.prepared = PreparedState::prepare(&self.ecm, &self.params, self.start, self.horizon);

        Ok(IterationRecord {
            k,
            episodes_cost: cost,
            m: Some(m_before),
            sequence: measured.sequence,
            reward_step: traj.reward_step,
            q_true_before: measured.q,
            q_true_after: self.prepared.success_prob(oracle)?,
            q_est_before: Some(q_est_before),
            q_est_after: Some(self.q_est),
            purged,
        })
    }

    /// Purges found sequences contradicted by an unrewarded `last_sequence`
    /// (when purging is enabled), then re-estimates the success probability
    /// from the current policy, capped at 1. Returns what was purged.
    pub fn update_q_est(&mut self, last_sequence: &[Action], rewarded: bool) -> Vec<Vec<Action>> {
        let mut purged = Vec::new();
        if !rewarded && self.purging {
            self.r_found.retain(|b| {
                let contradicted = last_sequence.starts_with(b);
                if contradicted {
                    purged.push(b.clone());
                }
                !contradicted
            });
        }
        // After a route switch a stale prefix and a fresh extension of it can
        // both be present, so the sum may count some mass twice.
        self.q_est = if self.r_found.is_empty() {
            fallback_estimate(self.horizon)
        } else {
            self.r_found
                .iter()
                .map(|b| self.ecm.sequence_prob(&self.params, self.start, b))
                .sum::<f64>()
                .min(1.0)
        };
        purged
    }

    #[cfg(test)]
    pub(crate) fn insert_found(&mut self, seq: Vec<Action>) {
        self.r_found.insert(seq);
    }
}

/// `|A|^-T`: one rewarded sequence among all equally likely ones.
fn fallback_estimate(horizon: usize) -> f64 {
    (NUM_ACTIONS as f64).powi(-(horizon as i32))
}
