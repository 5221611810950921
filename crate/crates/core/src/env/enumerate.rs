use super::{Action, Cell, EnvError, GridLayout, RewardRoute};
use crate::amplification::{OracleEntry, OracleSet};
use crate::sequence::{self, sequence_count};

/// Largest number of full-length sequences `enumerate_rewarded` accepts by
/// default (`5^9`).
pub const DEFAULT_ENUMERATION_CAP: usize = 1_953_125;

/// Brute-force ground truth: every full-length action sequence rewarded under
/// `route`, with the step at which its reward lands.
///
/// The search walks prefixes depth first; once a prefix is rewarded, all of
/// its completions share that reward step and are emitted as one block.
pub fn enumerate_rewarded(
    layout: &GridLayout,
    route: &RewardRoute,
    cap: usize,
) -> Result<OracleSet, EnvError> {
    let horizon = route.episode_len();
    let total = sequence_count(horizon)
        .filter(|&n| n <= cap)
        .ok_or(EnvError::BudgetExceeded { horizon, cap })?;

    let mut entries = Vec::new();
    let mut prefix = Vec::with_capacity(horizon);
    walk(layout, route, layout.start(), &mut prefix, &mut entries);
    debug_assert!(entries.len() <= total);
    let oracle = OracleSet::from_sorted_unchecked(horizon, entries);
    debug_assert!(oracle.check_prefix_consistency().is_ok());
    Ok(oracle)
}

fn walk(
    layout: &GridLayout,
    route: &RewardRoute,
    pos: Cell,
    prefix: &mut Vec<Action>,
    out: &mut Vec<OracleEntry>,
) {
    let horizon = route.episode_len();
    if prefix.len() == horizon {
        return;
    }
    for action in Action::ALL {
        let next = layout.step_unchecked(pos, action);
        prefix.push(action);
        let t = prefix.len();
        if next == route.target_at(t) {
            out.extend(
                sequence::prefix_block(prefix, horizon).map(|index| OracleEntry {
                    index,
                    reward_step: t,
                }),
            );
        } else {
            walk(layout, route, next, prefix, out);
        }
        prefix.pop();
    }
}
