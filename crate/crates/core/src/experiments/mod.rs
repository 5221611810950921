//! Scenario orchestration: phases, stopping criteria, route switching and
//! per-episode recording, plus cross-run statistics.

mod stats;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::agents::{ActiveEnv, AgentError, ClassicalAgent, HybridAgent, IterationRecord};
use crate::amplification::OracleSet;
use crate::env::{enumerate_rewarded, Action, EnvError, GridLayout, DEFAULT_ENUMERATION_CAP};
use crate::ps::PsParams;

pub use stats::{
    aggregate, curve_of, run_metrics, CurveField, CurvePoint, MetricStats, StatsError,
    SummaryStats, Z_95,
};

/// Episodes after which a run that has not met its stopping criterion is
/// abandoned and reported as non-terminating.
pub const DEFAULT_HARD_CAP: u64 = 100_000;

/// True success probability that counts as the "20 %" learning event.
pub const THRESHOLD_Q: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Classical,
    Hybrid,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Classical => "classical",
            AgentKind::Hybrid => "hybrid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "classical" => Some(AgentKind::Classical),
            "hybrid" => Some(AgentKind::Hybrid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingCriterion {
    /// At least `k` rewarded outcomes among the last `n` iterations.
    KOutOfN { k: u32, n: u32 },
    FixedEpisodes(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhaseSpec {
    pub route: usize,
    pub stopping: StoppingCriterion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub agent: AgentKind,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub phases: Vec<PhaseSpec>,
    pub runs: usize,
    pub seed: u64,
    pub hard_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("scenario has no phases")]
    NoPhases,
    #[error("phase {phase}: route {route} does not exist (layout has {available})")]
    UnknownRoute {
        phase: usize,
        route: usize,
        available: usize,
    },
    #[error("phase {phase}: k_out_of_n needs 1 <= k <= n, got k={k}, n={n}")]
    BadKOutOfN { phase: usize, k: u32, n: u32 },
    #[error("phase {phase}: fixed_episodes must be at least 1")]
    EmptyPhase { phase: usize },
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("hard_cap must be at least 1")]
    NoHardCap,
    #[error("invalid learning parameters: {0}")]
    Params(#[from] crate::ps::PsError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("run {run}: {source}")]
    Agent { run: usize, source: AgentError },
}

/// One row of the per-episode trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Counted from 1 across the whole run.
    pub episode: u64,
    pub phase: usize,
    pub true_q: f64,
    pub est_q: Option<f64>,
    /// Outcome of the iteration this episode belongs to.
    pub rewarded: bool,
    /// Ramp-up parameter of the owning iteration (hybrid only).
    pub m: Option<f64>,
    pub k: u32,
}

/// State right after a policy update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdatePoint {
    pub episode: u64,
    pub phase: usize,
    pub k: u32,
    pub rewarded: bool,
    pub true_q: f64,
    pub est_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurgeRecord {
    pub episode: u64,
    pub phase: usize,
    /// Route that was active when the sequence was dropped.
    pub route: usize,
    pub sequence: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub route: usize,
    /// Episodes spent in this phase.
    pub episodes: u64,
    /// Whether the stopping criterion fired (false only when the hard cap hit).
    pub completed: bool,
    /// Absolute episode of the first rewarded iteration in this phase.
    pub first_reward: Option<u64>,
    /// Absolute episode of the first update reaching `THRESHOLD_Q`.
    pub threshold: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub run_id: usize,
    /// Success probability and estimate before the first episode.
    pub initial_true_q: f64,
    pub initial_est_q: Option<f64>,
    pub records: Vec<EpisodeRecord>,
    pub updates: Vec<UpdatePoint>,
    pub purges: Vec<PurgeRecord>,
    pub phases: Vec<PhaseOutcome>,
    /// False when the hard cap cut the run short.
    pub terminated: bool,
}

impl RunTrace {
    pub fn episodes(&self) -> u64 {
        self.records.len() as u64
    }

    /// Episode at which the last phase's criterion fired.
    pub fn completion(&self) -> Option<u64> {
        self.terminated.then(|| self.episodes())
    }

    pub fn first_reward(&self) -> Option<u64> {
        self.phases.iter().find_map(|p| p.first_reward)
    }
}

/// A validated scenario with its oracles enumerated once for all runs.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    params: PsParams,
    layout: GridLayout,
    oracles: Vec<OracleSet>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, layout: GridLayout) -> Result<Self, ExperimentError> {
        validate(&config, &layout)?;
        let params = PsParams::new(config.beta, config.gamma, config.eta)?;
        let oracles = layout
            .routes()
            .iter()
            .map(|r| enumerate_rewarded(&layout, r, DEFAULT_ENUMERATION_CAP))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            config,
            params,
            layout,
            oracles,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn params(&self) -> &PsParams {
        &self.params
    }

    pub fn oracle(&self, route: usize) -> &OracleSet {
        &self.oracles[route]
    }

    /// Whether every pair of consecutive phases uses routes with disjoint
    /// rewarded-sequence sets.
    pub fn phases_disjoint(&self) -> bool {
        self.config.phases.windows(2).all(|w| {
            w[0].route == w[1].route || self.oracles[w[0].route].is_disjoint(&self.oracles[w[1].route])
        })
    }

    /// Purging only matters once the reward can move.
    pub fn purging(&self) -> bool {
        self.config.phases.len() > 1
    }

    pub fn run(&self, run_id: usize) -> Result<RunTrace, ExperimentError> {
        run_scenario(self, run_id)
    }

    /// Executes all configured runs on `workers` threads. Results come back in
    /// run order and do not depend on the worker count.
    pub fn run_all(&self, workers: usize) -> Result<Vec<RunTrace>, ExperimentError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .expect("thread pool construction");
        pool.install(|| {
            (0..self.config.runs)
                .into_par_iter()
                .map(|i| self.run(i))
                .collect()
        })
    }
}

fn validate(config: &ScenarioConfig, layout: &GridLayout) -> Result<(), ExperimentError> {
    if config.phases.is_empty() {
        return Err(ExperimentError::NoPhases);
    }
    if config.runs == 0 {
        return Err(ExperimentError::NoRuns);
    }
    if config.hard_cap == 0 {
        return Err(ExperimentError::NoHardCap);
    }
    for (i, phase) in config.phases.iter().enumerate() {
        if phase.route >= layout.routes().len() {
            return Err(ExperimentError::UnknownRoute {
                phase: i,
                route: phase.route,
                available: layout.routes().len(),
            });
        }
        match phase.stopping {
            StoppingCriterion::KOutOfN { k, n } if k == 0 || k > n => {
                return Err(ExperimentError::BadKOutOfN { phase: i, k, n });
            }
            StoppingCriterion::FixedEpisodes(0) => {
                return Err(ExperimentError::EmptyPhase { phase: i });
            }
            _ => {}
        }
    }
    Ok(())
}

/// RNG stream of one run: the scenario seed selects the key, the run index
/// the stream, so runs are independent of each other and of scheduling.
pub fn run_rng(seed: u64, run_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id as u64);
    rng
}

/// Seed for the `index`-th derived scenario (one per gamma in a sweep).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// True iff the window holds at least `n` outcomes and `k` of the last `n`
/// are rewarded.
pub fn check_k_of_n(history: &[bool], k: u32, n: u32) -> bool {
    let n = n as usize;
    if history.len() < n {
        return false;
    }
    history[history.len() - n..].iter().filter(|&&r| r).count() >= k as usize
}

enum Agent {
    Classical(ClassicalAgent),
    Hybrid(HybridAgent),
}

impl Agent {
    fn snapshot(&self, oracle: &OracleSet) -> Result<(f64, Option<f64>), AgentError> {
        Ok(match self {
            Agent::Classical(a) => (a.prepared().success_prob(oracle)?, None),
            Agent::Hybrid(a) => (a.prepared().success_prob(oracle)?, Some(a.q_est())),
        })
    }

    fn iterate(
        &mut self,
        env: ActiveEnv<'_>,
        oracle: &OracleSet,
        rng: &mut ChaCha8Rng,
        budget: u64,
    ) -> Result<IterationRecord, AgentError> {
        match self {
            Agent::Classical(a) => a.play_episode(env, oracle, rng),
            Agent::Hybrid(a) => {
                let cap = u32::try_from(budget).unwrap_or(u32::MAX);
                a.iterate(env, oracle, rng, Some(cap))
            }
        }
    }
}

/// Plays one run of the scenario.
///
/// The agent is never told about phase changes: the harness swaps route and
/// oracle underneath it and resets only its own criterion window.
pub fn run_scenario(scenario: &Scenario, run_id: usize) -> Result<RunTrace, ExperimentError> {
    let config = &scenario.config;
    let layout = &scenario.layout;
    let horizon = layout.episode_len();
    let mut rng = run_rng(config.seed, run_id);
    let mut agent = match config.agent {
        AgentKind::Classical => {
            Agent::Classical(ClassicalAgent::new(scenario.params, layout.start(), horizon))
        }
        AgentKind::Hybrid => Agent::Hybrid(HybridAgent::new(
            scenario.params,
            layout.start(),
            horizon,
            scenario.purging(),
        )),
    };

    let agent_err = |source| ExperimentError::Agent {
        run: run_id,
        source,
    };
    let (initial_true_q, initial_est_q) = agent
        .snapshot(&scenario.oracles[config.phases[0].route])
        .map_err(agent_err)?;
    let mut trace = RunTrace {
        run_id,
        initial_true_q,
        initial_est_q,
        records: Vec::new(),
        updates: Vec::new(),
        purges: Vec::new(),
        phases: Vec::new(),
        terminated: true,
    };
    let mut episode = 0u64;

    for (phase_idx, phase) in config.phases.iter().enumerate() {
        let env = ActiveEnv {
            layout,
            route: &layout.routes()[phase.route],
        };
        let oracle = &scenario.oracles[phase.route];
        let mut outcome = PhaseOutcome {
            route: phase.route,
            episodes: 0,
            completed: false,
            first_reward: None,
            threshold: None,
        };
        let mut window: VecDeque<bool> = VecDeque::new();

        loop {
            let cap_left = config.hard_cap - episode;
            let budget = match phase.stopping {
                StoppingCriterion::FixedEpisodes(n) => (n - outcome.episodes).min(cap_left),
                StoppingCriterion::KOutOfN { .. } => cap_left,
            };
            if budget == 0 {
                break;
            }
            let rec = agent
                .iterate(env, oracle, &mut rng, budget)
                .map_err(agent_err)?;

            let cost = u64::from(rec.episodes_cost);
            for i in 0..cost {
                episode += 1;
                let last = i + 1 == cost;
                trace.records.push(EpisodeRecord {
                    episode,
                    phase: phase_idx,
                    true_q: if last { rec.q_true_after } else { rec.q_true_before },
                    est_q: if last { rec.q_est_after } else { rec.q_est_before },
                    rewarded: rec.rewarded(),
                    m: rec.m,
                    k: rec.k,
                });
            }
            outcome.episodes += cost;
            trace.updates.push(UpdatePoint {
                episode,
                phase: phase_idx,
                k: rec.k,
                rewarded: rec.rewarded(),
                true_q: rec.q_true_after,
                est_q: rec.q_est_after,
            });
            trace
                .purges
                .extend(rec.purged.iter().map(|seq| PurgeRecord {
                    episode,
                    phase: phase_idx,
                    route: phase.route,
                    sequence: seq.clone(),
                }));
            if rec.rewarded() && outcome.first_reward.is_none() {
                outcome.first_reward = Some(episode);
            }
            if rec.q_true_after >= THRESHOLD_Q && outcome.threshold.is_none() {
                outcome.threshold = Some(episode);
            }

            let done = match phase.stopping {
                StoppingCriterion::FixedEpisodes(n) => outcome.episodes >= n,
                StoppingCriterion::KOutOfN { k, n } => {
                    window.push_back(rec.rewarded());
                    if window.len() > n as usize {
                        window.pop_front();
                    }
                    check_k_of_n(window.make_contiguous(), k, n)
                }
            };
            if done {
                outcome.completed = true;
                break;
            }
        }

        let completed = outcome.completed;
        trace.phases.push(outcome);
        if !completed {
            trace.terminated = false;
            break;
        }
    }
    Ok(trace)
}
