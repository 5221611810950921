//! Dense indexing of full-length action sequences.
//!
//! A sequence `(a_0, .., a_{T-1})` maps to the base-5 number whose most
//! significant digit is `a_0`, so lexicographic order over sequences equals
//! numeric order over indices and every shared prefix owns a contiguous block.

use crate::env::{Action, NUM_ACTIONS};

/// `|A|^len`, or `None` on overflow.
pub fn sequence_count(len: usize) -> Option<usize> {
    u32::try_from(len)
        .ok()
        .and_then(|len| NUM_ACTIONS.checked_pow(len))
}

pub fn encode(actions: &[Action]) -> usize {
    actions
        .iter()
        .fold(0, |acc, a| acc * NUM_ACTIONS + a.index())
}

pub fn decode(mut index: usize, len: usize) -> Vec<Action> {
    let mut out = vec![Action::Up; len];
    for slot in out.iter_mut().rev() {
        *slot = Action::ALL[index % NUM_ACTIONS];
        index /= NUM_ACTIONS;
    }
    out
}

/// Index range of all full-length sequences starting with `prefix`.
pub fn prefix_block(prefix: &[Action], horizon: usize) -> std::ops::Range<usize> {
    debug_assert!(prefix.len() <= horizon);
    let width = NUM_ACTIONS.pow((horizon - prefix.len()) as u32);
    let base = encode(prefix) * width;
    base..base + width
}
