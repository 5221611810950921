use rand::Rng;

use super::{ActiveEnv, AgentError, IterationRecord};
use crate::amplification::{OracleSet, PreparedState};
use crate::env::{run_episode, Action, Cell};
use crate::ps::{Ecm, PsParams};

/// Plain PS agent: one episode, one policy update.
#[derive(Debug, Clone)]
pub struct ClassicalAgent {
    ecm: Ecm,
    params: PsParams,
    start: Cell,
    episodes_consumed: u64,
    prepared: PreparedState,
}

impl ClassicalAgent {
    pub fn new(params: PsParams, start: Cell, horizon: usize) -> Self {
        let ecm = Ecm::new();
        let prepared = PreparedState::prepare(&ecm, &params, start, horizon);
        Self {
            ecm,
            params,
            start,
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

    pub fn episodes_consumed(&self) -> u64 {
        self.episodes_consumed
    }

    /// Sequence distribution of the current policy.
    pub fn prepared(&self) -> &PreparedState {
        &self.prepared
    }

    /// Plays one episode, sampling each action at the percept actually
    /// reached, then updates the policy. `oracle` is only read to report the
    /// true success probability.
    pub fn play_episode<R: Rng + ?Sized>(
        &mut self,
        env: ActiveEnv<'_>,
        oracle: &OracleSet,
        rng: &mut R,
    ) -> Result<IterationRecord, AgentError> {
        let horizon = env.route.episode_len();
        let q_true_before = self.prepared.success_prob(oracle)?;

        let mut pos = self.start;
        let mut actions = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let action = sample_action(&self.ecm.action_probs(&self.params, pos), rng);
            pos = env.layout.step(pos, action)?;
            actions.push(action);
        }
        let traj = run_episode(env.layout, env.route, &actions)?;
        self.ecm.policy_update(
            &self.params,
            traj.executed_actions(),
            &traj.percepts,
            traj.rewarded(),
            1,
        )?;
        self.episodes_consumed += 1;
        self.prepared = PreparedState::prepare(&self.ecm, &self.params, self.start, horizon);

        Ok(IterationRecord {
            k: 0,
            episodes_cost: 1,
            m: None,
            sequence: actions,
            reward_step: traj.reward_step,
            q_true_before,
            q_true_after: self.prepared.success_prob(oracle)?,
            q_est_before: None,
            q_est_after: None,
            purged: Vec::new(),
        })
    }
}

fn sample_action<R: Rng + ?Sized>(probs: &[f64; 5], rng: &mut R) -> Action {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    for (action, &p) in Action::ALL.iter().zip(probs) {
        acc += p;
        if u < acc {
            return *action;
        }
    }
    Action::DoNothing
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_rewarded, GridLayout, RewardRoute, DEFAULT_ENUMERATION_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn toy() -> GridLayout {
        let c = Cell::new;
        GridLayout::new(
            "toy",
            3,
            3,
            BTreeSet::new(),
            c(2, 0),
            vec![RewardRoute::new(vec![c(0, 0), c(0, 1), c(1, 1), c(1, 2)]).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn h_values_never_decrease_without_dissipation() {
        let layout = toy();
        let route = &layout.routes()[0];
        let oracle = enumerate_rewarded(&layout, route, DEFAULT_ENUMERATION_CAP).unwrap();
        let mut agent = ClassicalAgent::new(PsParams::default(), layout.start(), 3);
        let env = ActiveEnv {
            layout: &layout,
            route,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rewards = 0;
        for i in 0..300 {
            let before: Vec<_> = agent.ecm().h_entries().collect();
            let rec = agent.play_episode(env, &oracle, &mut rng).unwrap();
            rewards += rec.rewarded() as usize;
            for (s, a, h) in before {
                assert!(agent.ecm().h(s, a) >= h);
            }
            assert_eq!(agent.episodes_consumed(), i + 1);
            assert_eq!(rec.episodes_cost, 1);
        }
        assert!(rewards > 0);
    }

    #[test]
    fn sampler_follows_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probs = [0.5, 0.0, 0.25, 0.25, 0.0];
        let n = 20_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[sample_action(&probs, &mut rng).index()] += 1;
        }
        assert_eq!(counts[1], 0);
        assert_eq!(counts[4], 0);
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((counts[0] as f64 / n as f64 - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
        assert!((counts[2] as f64 / n as f64 - 0.25).abs() < 4.0 * se);
    }
}
