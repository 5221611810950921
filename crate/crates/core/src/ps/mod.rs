//! Projective Simulation memory with mapping, glow and dissipation.
//!
//! The ECM holds one h-value per (percept, action) edge, the glow of the most
//! recent update, and the learned deterministic transition map that lets the
//! agent price whole action sequences.

mod snapshot;
mod weights;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::env::{Action, Cell, NUM_ACTIONS};

pub use snapshot::{parse_snapshot, write_snapshot, SnapshotError};
pub use weights::SequenceWeights;

pub const UNIFORM_PROB: f64 = 1.0 / NUM_ACTIONS as f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsError {
    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("map already sends {from} --{action}--> {existing}, refusing {new}")]
    MapConflict {
        from: Cell,
        action: Action,
        existing: Cell,
        new: Cell,
    },
    #[error("trajectory has {actions} actions but {percepts} percepts")]
    ShapeMismatch { actions: usize, percepts: usize },
    #[error("policy update needs at least one episode")]
    ZeroEpisodes,
}

/// Softmax temperature `beta`, dissipation `gamma`, glow decay `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsParams {
    beta: f64,
    gamma: f64,
    eta: f64,
}

impl PsParams {
    pub const DEFAULT_BETA: f64 = 1.0;
    pub const DEFAULT_ETA: f64 = 0.05;

    pub fn new(beta: f64, gamma: f64, eta: f64) -> Result<Self, PsError> {
        check_range("beta", beta, 0.0, f64::INFINITY)?;
        check_range("gamma", gamma, 0.0, 1.0)?;
        check_range("eta", eta, 0.0, 1.0)?;
        Ok(Self { beta, gamma, eta })
    }

    pub fn with_gamma(gamma: f64) -> Result<Self, PsError> {
        Self::new(Self::DEFAULT_BETA, gamma, Self::DEFAULT_ETA)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl Default for PsParams {
    fn default() -> Self {
        Self {
            beta: Self::DEFAULT_BETA,
            gamma: 0.0,
            eta: Self::DEFAULT_ETA,
        }
    }
}

fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<(), PsError> {
    if value.is_nan() || value < min || value > max {
        Err(PsError::OutOfRange {
            name,
            value,
            min,
            max,
        })
    } else {
        Ok(())
    }
}

type Edge = (Cell, Action);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ecm {
    h: BTreeMap<Edge, f64>,
    glow: BTreeMap<Edge, f64>,
    map: BTreeMap<Edge, Cell>,
}

impl Ecm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn h(&self, percept: Cell, action: Action) -> f64 {
        self.h.get(&(percept, action)).copied().unwrap_or(1.0)
    }

    pub fn glow(&self, percept: Cell, action: Action) -> f64 {
        self.glow.get(&(percept, action)).copied().unwrap_or(0.0)
    }

    pub fn successor(&self, percept: Cell, action: Action) -> Option<Cell> {
        self.map.get(&(percept, action)).copied()
    }

    pub fn set_h(&mut self, percept: Cell, action: Action, value: f64) {
        self.h.insert((percept, action), value);
    }

    /// Every edge with an explicit h-value, in canonical order.
    pub fn h_entries(&self) -> impl Iterator<Item = (Cell, Action, f64)> + '_ {
        self.h.iter().map(|(&(s, a), &h)| (s, a, h))
    }

    pub fn glow_entries(&self) -> impl Iterator<Item = (Cell, Action, f64)> + '_ {
        self.glow.iter().map(|(&(s, a), &g)| (s, a, g))
    }

    pub fn map_entries(&self) -> impl Iterator<Item = (Cell, Action, Cell)> + '_ {
        self.map.iter().map(|(&(s, a), &n)| (s, a, n))
    }

    pub fn map_len(&self) -> usize {
        self.map.len()
    }

    /// Softmax policy at `percept`.
    pub fn action_probs(&self, params: &PsParams, percept: Cell) -> [f64; NUM_ACTIONS] {
        let logits = Action::ALL.map(|a| params.beta * self.h(percept, a));
        softmax(logits)
    }

    /// Probability of emitting `actions` from `start`.
    ///
    /// The walk follows the learned map and multiplies the softmax factor of
    /// each known percept. Once a step leads off the map the successor is
    /// unknown, so every later step is priced at the uniform `1/|A|`.
    pub fn sequence_prob(&self, params: &PsParams, start: Cell, actions: &[Action]) -> f64 {
        let mut prob = 1.0;
        let mut state = start;
        for (i, &action) in actions.iter().enumerate() {
            prob *= self.action_probs(params, state)[action.index()];
            match self.successor(state, action) {
                Some(next) => state = next,
                None => return prob * UNIFORM_PROB.powi((actions.len() - i - 1) as i32),
            }
        }
        prob
    }

    /// Records each executed transition in the map. Also registers the edge in
    /// the h-table (at its current value) so dissipation sees it.
    pub fn update_map(&mut self, percepts: &[Cell], actions: &[Action]) -> Result<(), PsError> {
        if percepts.len() != actions.len() + 1 {
            return Err(PsError::ShapeMismatch {
                actions: actions.len(),
                percepts: percepts.len(),
            });
        }
        for (i, &action) in actions.iter().enumerate() {
            let from = percepts[i];
            let to = percepts[i + 1];
            if let Some(&existing) = self.map.get(&(from, action)) {
                if existing != to {
                    return Err(PsError::MapConflict {
                        from,
                        action,
                        existing,
                        new: to,
                    });
                }
            }
        }
        for (i, &action) in actions.iter().enumerate() {
            self.map.insert((percepts[i], action), percepts[i + 1]);
            self.h.entry((percepts[i], action)).or_insert(1.0);
        }
        Ok(())
    }

    /// End-of-episode PS update covering `n_episodes` episodes, of which only
    /// the last may carry the reward.
    ///
    /// `actions`/`percepts` are the executed part of the final episode (the
    /// truncated sequence when rewarded). Every known edge receives
    /// `h <- (h - 1) (1 - gamma)^n + 1 + g r`.
    pub fn policy_update(
        &mut self,
        params: &PsParams,
        actions: &[Action],
        percepts: &[Cell],
        rewarded: bool,
        n_episodes: u32,
    ) -> Result<(), PsError> {
        if n_episodes == 0 {
            return Err(PsError::ZeroEpisodes);
        }
        self.update_map(percepts, actions)?;

        self.glow.clear();
        if rewarded {
            let decay = 1.0 - params.eta;
            for (i, &action) in actions.iter().enumerate() {
                for g in self.glow.values_mut() {
                    *g *= decay;
                }
                self.glow.insert((percepts[i], action), 1.0);
            }
        }

        let reward = if rewarded { 1.0 } else { 0.0 };
        let contraction = (1.0 - params.gamma).powi(n_episodes as i32);
        for (edge, h) in self.h.iter_mut() {
            let g = self.glow.get(edge).copied().unwrap_or(0.0);
            *h = (*h - 1.0) * contraction + 1.0 + g * reward;
        }
        Ok(())
    }
}

pub(crate) fn softmax(logits: [f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp = logits.map(|l| (l - max).exp());
    let sum: f64 = exp.iter().sum();
    exp.map(|e| e / sum)
}

/// Final glow of each step's edge after one rewarded episode of `length`
/// steps; assumes every step excites a distinct edge.
pub fn glow_trace(length: usize, eta: f64) -> Vec<f64> {
    (0..length)
        .map(|i| (1.0 - eta).powi((length - 1 - i) as i32))
        .collect()
}

/// One-episode dissipation update of a single h-value.
pub fn dissipate_once(h: f64, gamma: f64, reward: f64) -> f64 {
    h + reward - gamma * (h - 1.0)
}

/// Closed form of `n - 1` unrewarded episodes followed by one episode with
/// `reward`.
pub fn dissipate_episodes(h: f64, gamma: f64, n: u32, reward: f64) -> f64 {
    (h - 1.0) * (1.0 - gamma).powi(n as i32) + 1.0 + reward
}
