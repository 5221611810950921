//! JSON run summaries.

use std::io::{self, Write};

use serde::Serialize;

use super::config::RawConfig;
use crate::experiments::{Scenario, SummaryStats};

#[derive(Debug, Clone, Serialize)]
pub struct RouteInfo {
    pub route: usize,
    pub rewarded: usize,
    pub sequences: usize,
    pub initial_success_prob: f64,
    pub shortest_reward_step: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayoutInfo {
    pub name: String,
    pub episode_length: usize,
    pub routes: Vec<RouteInfo>,
    /// Consecutive phases use routes with disjoint rewarded sets.
    pub phase_routes_disjoint: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryDocument<'a> {
    pub config: &'a RawConfig,
    pub seed: u64,
    pub layout: LayoutInfo,
    #[serde(flatten)]
    pub stats: &'a SummaryStats,
}

pub fn route_infos(scenario: &Scenario) -> Vec<RouteInfo> {
    (0..scenario.layout().routes().len())
        .map(|route| {
            let oracle = scenario.oracle(route);
            RouteInfo {
                route,
                rewarded: oracle.len(),
                sequences: oracle.total_sequences(),
                initial_success_prob: oracle.uniform_success_prob(),
                shortest_reward_step: oracle.shortest_reward_step(),
            }
        })
        .collect()
}

pub fn layout_info(scenario: &Scenario) -> LayoutInfo {
    LayoutInfo {
        name: scenario.layout().name().to_string(),
        episode_length: scenario.layout().episode_len(),
        routes: route_infos(scenario),
        phase_routes_disjoint: scenario.phases_disjoint(),
    }
}

pub fn write_summary<W: Write>(
    out: &mut W,
    raw: &RawConfig,
    scenario: &Scenario,
    stats: &SummaryStats,
) -> io::Result<()> {
    let doc = SummaryDocument {
        config: raw,
        seed: scenario.config().seed,
        layout: layout_info(scenario),
        stats,
    };
    serde_json::to_writer_pretty(&mut *out, &doc)?;
    out.write_all(b"\n")
}
