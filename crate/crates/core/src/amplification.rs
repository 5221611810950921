//! Classical emulation of amplitude amplification over action sequences.
//!
//! The Grover operator built from the prepared policy state and the reward
//! oracle only rotates within the plane spanned by the normalized rewarded
//! and unrewarded components of the state. After `k` rounds a measurement
//! therefore lands in the rewarded set with probability
//! `sin^2((2k+1) asin(sqrt(Q)))` and, within either set, picks a sequence in
//! proportion to its original weight. [`PreparedState::measure`] samples
//! exactly that law.

use rand::Rng;
use thiserror::Error;

use crate::env::{Action, Cell};
use crate::ps::{Ecm, PsParams, SequenceWeights};
use crate::sequence::{self, sequence_count};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AaError {
    #[error("success probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("oracle entries must be sorted and unique (index {0})")]
    Unsorted(usize),
    #[error("reward step {step} of sequence {index} is outside [1, {horizon}]")]
    BadRewardStep {
        index: usize,
        step: usize,
        horizon: usize,
    },
    #[error("sequence {index} is rewarded at step {step} but its completions are not")]
    PrefixInconsistent { index: usize, step: usize },
    #[error("oracle horizon {oracle} does not match state horizon {state}")]
    HorizonMismatch { oracle: usize, state: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleEntry {
    /// Dense sequence index, see [`crate::sequence`].
    pub index: usize,
    pub reward_step: usize,
}

/// Exact set of rewarded full-length sequences for one route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSet {
    horizon: usize,
    entries: Vec<OracleEntry>,
    // reward step per sequence index, 0 when unrewarded
    marks: Vec<u8>,
}

impl OracleSet {
    pub fn from_entries(horizon: usize, entries: Vec<OracleEntry>) -> Result<Self, AaError> {
        for pair in entries.windows(2) {
            if pair[0].index >= pair[1].index {
                return Err(AaError::Unsorted(pair[1].index));
            }
        }
        let total = sequence_count(horizon).unwrap_or(usize::MAX);
        for e in &entries {
            if e.reward_step == 0 || e.reward_step > horizon || e.index >= total {
                return Err(AaError::BadRewardStep {
                    index: e.index,
                    step: e.reward_step,
                    horizon,
                });
            }
        }
        let set = Self::from_sorted_unchecked(horizon, entries);
        set.check_prefix_consistency()?;
        Ok(set)
    }

    pub(crate) fn from_sorted_unchecked(horizon: usize, entries: Vec<OracleEntry>) -> Self {
        let total = sequence_count(horizon).expect("horizon checked by caller");
        let mut marks = vec![0u8; total];
        for e in &entries {
            marks[e.index] = e.reward_step as u8;
        }
        Self {
            horizon,
            entries,
            marks,
        }
    }

    /// A sequence rewarded at step `t` forces every sequence sharing its first
    /// `t` actions to be rewarded at `t` as well.
    pub(crate) fn check_prefix_consistency(&self) -> Result<(), AaError> {
        let mut i = 0;
        while i < self.entries.len() {
            let e = self.entries[i];
            let prefix = &sequence::decode(e.index, self.horizon)[..e.reward_step];
            let block = sequence::prefix_block(prefix, self.horizon);
            if block.clone().any(|j| self.marks[j] as usize != e.reward_step) {
                return Err(AaError::PrefixInconsistent {
                    index: e.index,
                    step: e.reward_step,
                });
            }
            i += block.len();
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[OracleEntry] {
        &self.entries
    }

    /// Number of full-length sequences, `|A|^T`.
    pub fn total_sequences(&self) -> usize {
        self.marks.len()
    }

    /// Success probability of the uniform policy.
    pub fn uniform_success_prob(&self) -> f64 {
        self.len() as f64 / self.total_sequences() as f64
    }

    pub fn reward_step_of_index(&self, index: usize) -> Option<usize> {
        match self.marks.get(index) {
            Some(&0) | None => None,
            Some(&s) => Some(s as usize),
        }
    }

    pub fn reward_step(&self, actions: &[Action]) -> Option<usize> {
        if actions.len() != self.horizon {
            return None;
        }
        self.reward_step_of_index(sequence::encode(actions))
    }

    /// Earliest reward step over all rewarded sequences.
    pub fn shortest_reward_step(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.reward_step).min()
    }

    pub fn is_disjoint(&self, other: &OracleSet) -> bool {
        self.horizon != other.horizon
            || !self
                .entries
                .iter()
                .any(|e| other.marks[e.index] != 0)
    }
}

/// `sin^2((2k+1) asin(sqrt(q)))`, clamped to `[0, 1]`.
pub fn grover_success_prob(q: f64, k: u32) -> Result<f64, AaError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(AaError::InvalidProbability(q));
    }
    let theta = q.sqrt().asin();
    let p = ((2 * k + 1) as f64 * theta).sin().powi(2);
    Ok(p.clamp(0.0, 1.0))
}

/// Policy mass `Q` on the oracle's rewarded sequences under the agent's own
/// sequence distribution.
pub fn true_success_prob(ecm: &Ecm, params: &PsParams, start: Cell, oracle: &OracleSet) -> f64 {
    PreparedState::prepare(ecm, params, start, oracle.horizon())
        .success_prob(oracle)
        .expect("state prepared at the oracle's horizon")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Rewarded,
    Unrewarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementResult {
    pub sequence: Vec<Action>,
    pub branch: Branch,
    pub k_used: u32,
    pub p_aa: f64,
    pub q: f64,
}

/// The policy-weighted superposition over all full-length sequences, stored
/// as its measurement probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedState {
    weights: SequenceWeights,
}

impl PreparedState {
    pub fn prepare(ecm: &Ecm, params: &PsParams, start: Cell, horizon: usize) -> Self {
        Self {
            weights: SequenceWeights::compute(ecm, params, start, horizon),
        }
    }

    pub fn from_weights(weights: SequenceWeights) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &SequenceWeights {
        &self.weights
    }

    pub fn horizon(&self) -> usize {
        self.weights.horizon()
    }

    fn check(&self, oracle: &OracleSet) -> Result<(), AaError> {
        if oracle.horizon() != self.horizon() {
            return Err(AaError::HorizonMismatch {
                oracle: oracle.horizon(),
                state: self.horizon(),
            });
        }
        Ok(())
    }

    /// Policy mass on the rewarded sequences.
    pub fn success_prob(&self, oracle: &OracleSet) -> Result<f64, AaError> {
        self.check(oracle)?;
        let q: f64 = oracle
            .entries()
            .iter()
            .map(|e| self.weights.get(e.index))
            .sum();
        Ok(q.clamp(0.0, 1.0))
    }

    /// Samples the measurement outcome after `k` Grover rounds.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        oracle: &OracleSet,
        k: u32,
        rng: &mut R,
    ) -> Result<MeasurementResult, AaError> {
        let q = self.success_prob(oracle)?;
        let p_aa = grover_success_prob(q, k)?;
        let w = self.weights.as_slice();
        let unmarked_mass: f64 = w
            .iter()
            .enumerate()
            .filter(|&(i, _)| oracle.marks[i] == 0)
            .map(|(_, x)| x)
            .sum();

        let branch = if oracle.is_empty() || q == 0.0 {
            Branch::Unrewarded
        } else if unmarked_mass <= 0.0 || rng.random::<f64>() < p_aa {
            Branch::Rewarded
        } else {
            Branch::Unrewarded
        };

        let index = match branch {
            Branch::Rewarded => sample(
                oracle.entries().iter().map(|e| (e.index, w[e.index])),
                q,
                rng,
            ),
            Branch::Unrewarded => sample(
                w.iter()
                    .enumerate()
                    .filter(|&(i, _)| oracle.marks[i] == 0)
                    .map(|(i, &x)| (i, x)),
                unmarked_mass,
                rng,
            ),
        };
        Ok(MeasurementResult {
            sequence: sequence::decode(index, self.horizon()),
            branch,
            k_used: k,
            p_aa,
            q,
        })
    }
}

/// Categorical draw over `(index, weight)` pairs whose weights sum to `mass`.
fn sample<R: Rng + ?Sized, I: Iterator<Item = (usize, f64)>>(
    items: I,
    mass: f64,
    rng: &mut R,
) -> usize {
    let target = rng.random::<f64>() * mass;
    let mut acc = 0.0;
    let mut last = None;
    for (index, weight) in items {
        if weight <= 0.0 {
            continue;
        }
        acc += weight;
        last = Some(index);
        if target < acc {
            return index;
        }
    }
    last.expect("branch with positive mass has a positive-weight sequence")
}
