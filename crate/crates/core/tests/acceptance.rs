//! Acceptance suite. Each criterion prints PASS or FAIL with its evidence;
//! the process exits nonzero if any criterion fails.
//!
//! Run a subset by passing criterion numbers:
//! `cargo test --test acceptance -- 3 4`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use qrl_core::agents::{ActiveEnv, ClassicalAgent, HybridAgent};
use qrl_core::amplification::{grover_success_prob, Branch, OracleSet, PreparedState};
use qrl_core::env::{
    enumerate_rewarded, run_episode, Action, Cell, GridLayout, RewardRoute,
    DEFAULT_ENUMERATION_CAP, NUM_ACTIONS,
};
use qrl_core::experiments::{MetricStats, RunTrace, Scenario};
use qrl_core::io::config::{load_config, read_layout, Overrides};
use qrl_core::ps::{dissipate_episodes, dissipate_once, parse_snapshot, write_snapshot, PsParams};
use qrl_core::sequence::{decode, sequence_count};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn config_path(name: &str) -> PathBuf {
    manifest_dir().join("configs").join(name)
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn scenario(config: &str, overrides: Overrides) -> Scenario {
    load_config(&config_path(config), &overrides)
        .unwrap_or_else(|e| panic!("{config}: {e}"))
        .scenario
}

fn run(config: &str, overrides: Overrides) -> (Scenario, Vec<RunTrace>) {
    let s = scenario(config, overrides);
    let traces = s.run_all(workers()).expect("runs succeed");
    (s, traces)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

// 1. Closed-form multi-episode dissipation equals iterated single updates.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let h = rng.random_range(1.0..=10.0);
        let gamma = loop {
            let g: f64 = rng.random();
            if g > 0.0 {
                break g;
            }
        };
        let n = rng.random_range(1..=10u32);
        let r = f64::from(rng.random_range(0..=1u8));
        let mut iterated = h;
        for _ in 0..n - 1 {
            iterated = dissipate_once(iterated, gamma, 0.0);
        }
        iterated = dissipate_once(iterated, gamma, r);
        let closed = dissipate_episodes(h, gamma, n, r);
        worst = worst.max((closed - iterated).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max |closed - iterated| = {worst:.2e} over 1000 tuples in {elapsed:?}"),
    )
}

// 3-step toy gridworld trained for a few episodes so the policy is not
// uniform.
fn toy_state() -> (GridLayout, OracleSet, PreparedState) {
    let c = Cell::new;
    let layout = GridLayout::new(
        "toy",
        3,
        3,
        BTreeSet::new(),
        c(2, 0),
        vec![RewardRoute::new(vec![c(0, 0), c(0, 1), c(1, 1), c(1, 2)]).unwrap()],
    )
    .unwrap();
    let oracle = enumerate_rewarded(&layout, &layout.routes()[0], DEFAULT_ENUMERATION_CAP).unwrap();
    let env = ActiveEnv {
        layout: &layout,
        route: &layout.routes()[0],
    };
    let params = PsParams::with_gamma(0.3).unwrap();
    let mut agent = ClassicalAgent::new(params, layout.start(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..4 {
        agent.play_episode(env, &oracle, &mut rng).unwrap();
    }
    let state = agent.prepared().clone();
    (layout, oracle, state)
}

// Chi-square goodness of fit, pooling cells with expected count below 5.
// Returns (statistic, critical value at alpha = 0.01, degrees of freedom).
fn chi_square(observed: &[(f64, usize)], total: usize) -> (f64, f64, usize) {
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for &(p, o) in observed {
        let e = p * total as f64;
        if e < 5.0 {
            pool.0 += e;
            pool.1 += o as f64;
        } else {
            cells.push((e, o as f64));
        }
    }
    if pool.0 > 0.0 {
        cells.push(pool);
    }
    let stat = cells.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let df = cells.len() - 1;
    let critical = ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99);
    (stat, critical, df)
}

// 2. The emulated measurement follows the Grover law, and within a branch
// follows the policy weights.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (_, oracle, state) = toy_state();
    let q = state.success_prob(&oracle).unwrap();
    let w = state.weights().as_slice().to_vec();
    let draws = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut lines = vec![format!("Q = {q:.5}")];
    let mut ok = true;
    let mut counts: BTreeMap<(bool, usize), usize> = BTreeMap::new();
    for k in 0..=3u32 {
        let p = grover_success_prob(q, k).unwrap();
        let mut hits = 0;
        for _ in 0..draws {
            let m = state.measure(&oracle, k, &mut rng).unwrap();
            let rewarded = m.branch == Branch::Rewarded;
            assert_eq!(rewarded, oracle.reward_step(&m.sequence).is_some());
            hits += usize::from(rewarded);
            let idx = qrl_core::sequence::encode(&m.sequence);
            *counts.entry((rewarded, idx)).or_default() += 1;
        }
        let freq = hits as f64 / draws as f64;
        let se = binomial_se(p, draws);
        let pass = (freq - p).abs() <= 3.0 * se;
        ok &= pass;
        lines.push(format!("k={k}: freq {freq:.4} vs law {p:.4} (3 SE = {:.4})", 3.0 * se));
    }
    for rewarded in [true, false] {
        let members: Vec<usize> = (0..w.len())
            .filter(|&i| oracle.reward_step_of_index(i).is_some() == rewarded)
            .collect();
        let mass: f64 = members.iter().map(|&i| w[i]).sum();
        let total: usize = members.iter().map(|&i| counts.get(&(rewarded, i)).copied().unwrap_or(0)).sum();
        let observed: Vec<(f64, usize)> = members
            .iter()
            .map(|&i| (w[i] / mass, counts.get(&(rewarded, i)).copied().unwrap_or(0)))
            .collect();
        let (stat, critical, df) = chi_square(&observed, total);
        ok &= stat <= critical;
        lines.push(format!(
            "{} branch: chi2 {stat:.1} <= {critical:.1} (df {df}, {total} draws)",
            if rewarded { "rewarded" } else { "unrewarded" }
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(10);
    lines.push(format!("{elapsed:?}"));
    check(ok, lines.join("; "))
}

fn first_rewards(traces: &[RunTrace]) -> Vec<f64> {
    traces
        .iter()
        .map(|t| t.first_reward().expect("every run finds a reward") as f64)
        .collect()
}

fn agent_override(agent: &str, runs: usize) -> Overrides {
    Overrides {
        agent: Some(agent.into()),
        runs: Some(runs),
        ..Overrides::default()
    }
}

// 3. The classical agent's first reward follows the geometric law.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (s, traces) = run("scenario_a1.toml", agent_override("classical", 500));
    let p = s.oracle(0).uniform_success_prob();
    let stats = MetricStats::from_values(&first_rewards(&traces)).unwrap();
    let target = 1.0 / p;
    let exact_layout = s.oracle(0).len() == 1330 && s.oracle(0).total_sequences() == 78125;
    let within = (stats.mean - target).abs() <= 3.0 * stats.se;
    let brackets_published = !exact_layout || (stats.mean - 58.4).abs() <= 3.0 * stats.se;
    let elapsed = start.elapsed();
    check(
        within && brackets_published && elapsed < Duration::from_secs(120),
        format!(
            "p_init = {}/{} ; mean first reward {:.2} +- {:.2} (n={}) vs 1/p = {target:.2}; published 58.4 within 3 SE: {brackets_published}; {elapsed:?}",
            s.oracle(0).len(),
            s.oracle(0).total_sequences(),
            stats.mean,
            stats.se,
            stats.n
        ),
    )
}

// 4. The hybrid agent's first reward respects the quadratic-speedup bound
// and beats the classical agent at 99 % confidence.
fn criterion_4() -> Outcome {
    let (s, hybrid) = run("scenario_a1.toml", agent_override("hybrid", 500));
    let (_, classical) = run("scenario_a1.toml", agent_override("classical", 500));
    let p = s.oracle(0).uniform_success_prob();
    let h = MetricStats::from_values(&first_rewards(&hybrid)).unwrap();
    let c = MetricStats::from_values(&first_rewards(&classical)).unwrap();
    let bound = 4.5 * (1.0 / p).sqrt();
    // one-sided test of mean_h < mean_c, z quantile 0.99
    let z = (c.mean - h.mean) / (c.se.powi(2) + h.se.powi(2)).sqrt();
    check(
        h.mean <= bound && z > 2.326,
        format!(
            "hybrid {:.2} +- {:.2} <= bound {bound:.2}; classical {:.2} +- {:.2}; z = {z:.1} > 2.326",
            h.mean, h.se, c.mean, c.se
        ),
    )
}

// 5. In stationary runs q_est never exceeds the true success probability
// once a reward has been found.
fn criterion_5() -> Outcome {
    let mut checked = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::new();
    for config in ["scenario_a1.toml", "scenario_a2.toml"] {
        let (_, traces) = run(config, agent_override("hybrid", 100));
        for t in &traces {
            let Some(first) = t.first_reward() else { continue };
            for u in t.updates.iter().filter(|u| u.episode >= first) {
                worst = worst.max(u.est_q.unwrap() - u.true_q);
                checked += 1;
            }
        }
        lines.push(format!("{config}: 100 runs"));
    }
    check(
        worst <= 1e-12,
        format!("{}; {checked} update points, max(q_est - Q) = {worst:.3e}", lines.join(", ")),
    )
}

// Whether the first `prefix.len()` steps of `prefix` collect the reward on
// `route`.
fn prefix_rewarded(layout: &GridLayout, route: &RewardRoute, prefix: &[Action]) -> bool {
    let mut full = prefix.to_vec();
    full.resize(route.episode_len(), Action::DoNothing);
    let traj = run_episode(layout, route, &full).unwrap();
    traj.reward_step.is_some_and(|s| s <= prefix.len())
}

// 6. Purged sequences are never rewarded on the active route, and after a
// switch q_est drops below Q within 30 update points and stays there.
fn criterion_6() -> Outcome {
    let mut purged = 0usize;
    let mut unsound = 0usize;
    let mut worst_recovery = 0usize;
    let mut slow_runs = 0usize;
    for config in ["scenario_b1.toml", "scenario_b2.toml"] {
        let (s, traces) = run(config, agent_override("hybrid", 100));
        for t in &traces {
            for p in &t.purges {
                purged += 1;
                let route = s.layout().route(p.route).unwrap();
                unsound += usize::from(prefix_rewarded(s.layout(), route, &p.sequence));
            }
            if config == "scenario_b2.toml" {
                let after: Vec<_> = t.updates.iter().filter(|u| u.phase == 1).collect();
                let recovery = after
                    .iter()
                    .rposition(|u| u.est_q.unwrap() > u.true_q + 1e-12)
                    .map_or(0, |i| i + 1);
                worst_recovery = worst_recovery.max(recovery);
                slow_runs += usize::from(recovery > 30);
            }
        }
    }
    check(
        purged > 0 && unsound == 0 && slow_runs == 0,
        format!(
            "{purged} purged sequences, {unsound} rewarded on replay; B.2: q_est <= Q from update {worst_recovery} after the switch onward in the slowest run, {slow_runs} run(s) beyond 30"
        ),
    )
}

// 7. B.2 post-switch ordering: hybrid beats classical at gamma 0.05, and
// gamma 0.05 beats gamma 0.01 for both agents.
fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut after = BTreeMap::new();
    for agent in ["hybrid", "classical"] {
        for gamma in [0.05, 0.01] {
            let overrides = Overrides {
                gamma: Some(gamma),
                ..agent_override(agent, 30)
            };
            let (_, traces) = run("scenario_b2.toml", overrides);
            let stats = qrl_core::experiments::aggregate(&traces).unwrap();
            let m = stats.metrics["avg_q_after_switch"];
            after.insert((agent, (gamma * 100.0) as u32), m);
        }
    }
    let get = |a: &'static str, g: u32| after[&(a, g)];
    let ok = get("hybrid", 5).mean > get("classical", 5).mean
        && get("hybrid", 5).mean > get("hybrid", 1).mean
        && get("classical", 5).mean > get("classical", 1).mean;
    let elapsed = start.elapsed();
    let fmt = |m: MetricStats| format!("{:.1} +- {:.1}", 100.0 * m.mean, 100.0 * m.se);
    check(
        ok && elapsed < Duration::from_secs(600),
        format!(
            "avg Q after switch [%]: hybrid 0.05 {}, classical 0.05 {}, hybrid 0.01 {}, classical 0.01 {}; {elapsed:?}",
            fmt(get("hybrid", 5)),
            fmt(get("classical", 5)),
            fmt(get("hybrid", 1)),
            fmt(get("classical", 1))
        ),
    )
}

fn qrl(args: &[&str], workers: usize) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qrl"))
        .args(args)
        .env("QRL_WORKERS", workers.to_string())
        .output()
        .expect("qrl binary runs")
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

// 8. `run` output is byte-identical across repeated executions and worker
// counts.
fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for (config, runs) in [("scenario_b2.toml", "12"), ("scenario_a1.toml", "40")] {
        let cfg = config_path(config);
        let mut outputs = Vec::new();
        for (i, workers) in [1usize, 4, 4].into_iter().enumerate() {
            let out = tmp.path().join(format!("{config}-{i}"));
            let res = qrl(
                &["run", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--runs", runs, "--seed", "77"],
                workers,
            );
            if !res.status.success() {
                return Err(format!("{config}: exit {:?}: {}", res.status.code(), String::from_utf8_lossy(&res.stderr)));
            }
            outputs.push(dir_contents(&out));
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]);
        ok &= same && outputs[0].contains_key("trace.csv") && outputs[0].contains_key("summary.json");
        lines.push(format!(
            "{config}: files {:?} identical over workers 1/4/4: {same}",
            outputs[0].keys().collect::<Vec<_>>()
        ));
    }
    check(ok, lines.join("; "))
}

// 9. The sequence distribution of a trained, mid-run memory sums to one.
fn criterion_9() -> Outcome {
    let layout = read_layout(&manifest_dir().join("layouts/layout_b.txt")).unwrap();
    let oracles: Vec<OracleSet> = layout
        .routes()
        .iter()
        .map(|r| enumerate_rewarded(&layout, r, DEFAULT_ENUMERATION_CAP).unwrap())
        .collect();
    let params = PsParams::with_gamma(0.05).unwrap();
    let mut agent = HybridAgent::new(params, layout.start(), layout.episode_len(), true);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut episodes = 0u64;
    // 80 episodes on route 0, then 40 on route 1: mid-run after the switch
    while episodes < 120 {
        let route = usize::from(episodes >= 80);
        let env = ActiveEnv {
            layout: &layout,
            route: &layout.routes()[route],
        };
        let rec = agent.iterate(env, &oracles[route], &mut rng, None).unwrap();
        episodes += u64::from(rec.episodes_cost);
    }
    let snapshot = write_snapshot(agent.ecm());
    let ecm = parse_snapshot(&snapshot).unwrap();
    assert_eq!(&ecm, agent.ecm());
    let horizon = layout.episode_len();
    let n = sequence_count(horizon).unwrap();
    let total: f64 = (0..n)
        .map(|i| ecm.sequence_prob(&params, layout.start(), &decode(i, horizon)))
        .sum();
    let non_default = ecm.h_entries().filter(|&(_, _, h)| (h - 1.0).abs() > 1e-6).count();
    check(
        (total - 1.0).abs() <= 1e-9 && non_default > 0,
        format!(
            "sum over {n} = {NUM_ACTIONS}^{horizon} sequences = {total:.15} ({} map entries, {non_default} trained h-values, {episodes} episodes)",
            ecm.map_len()
        ),
    )
}

// 10. `enumerate` agrees with Monte-Carlo uniform play for every shipped
// layout and route.
fn criterion_10() -> Outcome {
    let mut layouts: Vec<PathBuf> = std::fs::read_dir(manifest_dir().join("layouts"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    layouts.sort();
    let mut lines = Vec::new();
    let mut ok = !layouts.is_empty();
    let episodes = 100_000;
    for path in &layouts {
        let res = qrl(&["enumerate", "--layout", path.to_str().unwrap()], 1);
        if !res.status.success() {
            return Err(format!("enumerate {} failed", path.display()));
        }
        let layout = read_layout(path).unwrap();
        let stdout = String::from_utf8(res.stdout).unwrap();
        for (row, line) in stdout.lines().skip(1).enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            let route_idx: usize = fields[0].parse().unwrap();
            let count: f64 = fields[1].parse().unwrap();
            let total: f64 = fields[2].parse().unwrap();
            assert_eq!(route_idx, row);
            let p = count / total;
            let route = layout.route(route_idx).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + row as u64);
            let hits = (0..episodes)
                .filter(|_| {
                    let actions: Vec<Action> = (0..route.episode_len())
                        .map(|_| Action::ALL[rng.random_range(0..NUM_ACTIONS)])
                        .collect();
                    run_episode(&layout, route, &actions).unwrap().rewarded()
                })
                .count();
            let freq = hits as f64 / episodes as f64;
            let se = binomial_se(p, episodes);
            let pass = (freq - p).abs() <= 3.0 * se;
            ok &= pass;
            lines.push(format!(
                "{} route {route_idx}: {count}/{total} = {p:.5}, MC {freq:.5} (3 SE {:.5})",
                path.file_name().unwrap().to_string_lossy(),
                3.0 * se
            ));
        }
    }
    check(ok, lines.join("; "))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (id, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2}: PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                println!("criterion {id:>2}: FAIL [{secs:.1}s] {detail}");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
