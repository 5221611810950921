use std::collections::HashMap;

use super::{Ecm, PsParams, UNIFORM_PROB};
use crate::env::{Action, Cell, NUM_ACTIONS};
use crate::sequence::sequence_count;

/// `pi_hat` for every full-length sequence, indexed as in [`crate::sequence`].
///
/// Built by depth-first product expansion over the learned map. Each percept's
/// softmax is evaluated once; after an unmapped step the remaining steps are
/// uniform, so that subtree fills a contiguous block of leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWeights {
    horizon: usize,
    weights: Vec<f64>,
}

struct Node {
    probs: [f64; NUM_ACTIONS],
    next: [Option<usize>; NUM_ACTIONS],
}

impl SequenceWeights {
    /// Panics if `|A|^horizon` overflows `usize`; callers size the horizon
    /// through the enumeration budget first.
    pub fn compute(ecm: &Ecm, params: &PsParams, start: Cell, horizon: usize) -> Self {
        let total = sequence_count(horizon).expect("sequence count overflows usize");
        let nodes = build_nodes(ecm, params, start);
        let mut weights = vec![0.0; total];
        let mut block = vec![1usize; horizon + 1];
        for d in 1..=horizon {
            block[d] = block[d - 1] * NUM_ACTIONS;
        }
        expand(&nodes, &block, 0, horizon, 1.0, 0, &mut weights);
        Self { horizon, weights }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn build_nodes(ecm: &Ecm, params: &PsParams, start: Cell) -> Vec<Node> {
    let mut ids: HashMap<Cell, usize> = HashMap::new();
    let mut cells = vec![start];
    ids.insert(start, 0);
    let mut nodes = Vec::new();
    let mut i = 0;
    while i < cells.len() {
        let cell = cells[i];
        let mut next = [None; NUM_ACTIONS];
        for action in Action::ALL {
            if let Some(succ) = ecm.successor(cell, action) {
                let id = *ids.entry(succ).or_insert_with(|| {
                    cells.push(succ);
                    cells.len() - 1
                });
                next[action.index()] = Some(id);
            }
        }
        nodes.push(Node {
            probs: ecm.action_probs(params, cell),
            next,
        });
        i += 1;
    }
    nodes
}

fn expand(
    nodes: &[Node],
    block: &[usize],
    node: usize,
    remaining: usize,
    prefix: f64,
    base: usize,
    out: &mut [f64],
) {
    if remaining == 0 {
        out[base] = prefix;
        return;
    }
    let width = block[remaining - 1];
    let node_ref = &nodes[node];
    for a in 0..NUM_ACTIONS {
        let child_base = base + a * width;
        let child_prefix = prefix * node_ref.probs[a];
        match node_ref.next[a] {
            Some(child) => expand(
                nodes,
                block,
                child,
                remaining - 1,
                child_prefix,
                child_base,
                out,
            ),
            None => {
                let w = child_prefix * UNIFORM_PROB.powi(remaining as i32 - 1);
                out[child_base..child_base + width].fill(w);
            }
        }
    }
}
