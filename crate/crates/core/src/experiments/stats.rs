use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::RunTrace;

/// z-value of the two-sided 95 % normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single value.
    pub se: f64,
    pub ci95: f64,
    pub n: usize,
}

impl MetricStats {
    /// `None` for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            se,
            ci95: Z_95 * se,
            n,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub runs: usize,
    pub non_terminating: usize,
    /// Computed over terminating runs only; a metric absent from some runs
    /// (an event that never happened) reports the smaller `n`.
    pub metrics: BTreeMap<String, MetricStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("no traces to aggregate")]
    Empty,
    #[error("run {run} has {got} episodes, expected {expected}; curves need a fixed episode budget")]
    Ragged {
        run: usize,
        got: usize,
        expected: usize,
    },
    #[error("run {run} episode {episode} carries no estimate")]
    MissingEstimate { run: usize, episode: u64 },
}

/// Per-run event and average metrics, keyed by summary name.
///
/// A single phase yields `first_reward`, `threshold_20pct`, `completion` and
/// `avg_q`. Two phases yield the before/after-switch breakdown; more phases
/// are numbered.
pub fn run_metrics(trace: &RunTrace) -> Vec<(String, Option<f64>)> {
    let n_phases = trace.phases.len();
    let ep = |e: Option<u64>| e.map(|v| v as f64);
    let mut out = Vec::new();
    let phase_avg = |phase: usize| {
        let qs: Vec<f64> = trace
            .records
            .iter()
            .filter(|r| r.phase == phase)
            .map(|r| r.true_q)
            .collect();
        (!qs.is_empty()).then(|| qs.iter().sum::<f64>() / qs.len() as f64)
    };
    let total_avg = (!trace.records.is_empty())
        .then(|| trace.records.iter().map(|r| r.true_q).sum::<f64>() / trace.records.len() as f64);

    match n_phases {
        0 => {}
        1 => {
            let p = &trace.phases[0];
            out.push(("first_reward".into(), ep(p.first_reward)));
            out.push(("threshold_20pct".into(), ep(p.threshold)));
            out.push(("completion".into(), ep(trace.completion())));
            out.push(("avg_q".into(), total_avg));
        }
        _ => {
            let start = |i: usize| -> u64 { trace.phases[..i].iter().map(|p| p.episodes).sum() };
            let named = n_phases == 2;
            for (i, p) in trace.phases.iter().enumerate() {
                let rel = |e: Option<u64>| e.map(|v| (v - start(i)) as f64);
                let suffix = if named {
                    if i == 0 { "before_switch".to_string() } else { "after_switch".to_string() }
                } else {
                    format!("phase{i}")
                };
                out.push((format!("episodes_{suffix}"), Some(p.episodes as f64)));
                out.push((format!("avg_q_{suffix}"), phase_avg(i)));
                out.push((format!("first_reward_{suffix}"), rel(p.first_reward)));
                out.push((format!("threshold_20pct_{suffix}"), rel(p.threshold)));
            }
            out.push(("episodes_total".into(), Some(trace.episodes() as f64)));
            out.push(("avg_q_total".into(), total_avg));
        }
    }
    out
}

/// Cross-run statistics for every metric of [`run_metrics`]. Runs cut off by
/// the hard cap are counted but excluded.
pub fn aggregate(traces: &[RunTrace]) -> Result<SummaryStats, StatsError> {
    if traces.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for trace in traces.iter().filter(|t| t.terminated) {
        for (name, value) in run_metrics(trace) {
            let slot = samples.entry(name).or_default();
            if let Some(v) = value {
                slot.push(v);
            }
        }
    }
    let metrics = samples
        .into_iter()
        .filter_map(|(name, values)| MetricStats::from_values(&values).map(|s| (name, s)))
        .collect();
    Ok(SummaryStats {
        runs: traces.len(),
        non_terminating: traces.iter().filter(|t| !t.terminated).count(),
        metrics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveField {
    TrueQ,
    EstQ,
}

impl CurveField {
    pub fn name(self) -> &'static str {
        match self {
            CurveField::TrueQ => "true_q",
            CurveField::EstQ => "est_q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: u64,
    pub stats: MetricStats,
}

/// Pointwise mean and band over runs, starting with the untrained state at
/// episode 0. All traces must have the same length, which only fixed-budget
/// scenarios guarantee.
pub fn curve_of(traces: &[RunTrace], field: CurveField) -> Result<Vec<CurvePoint>, StatsError> {
    let first = traces.first().ok_or(StatsError::Empty)?;
    let len = first.records.len();
    for t in traces {
        if t.records.len() != len {
            return Err(StatsError::Ragged {
                run: t.run_id,
                got: t.records.len(),
                expected: len,
            });
        }
    }
    let mut points = Vec::with_capacity(len + 1);
    let mut column = Vec::with_capacity(traces.len());
    for t in traces {
        column.push(match field {
            CurveField::TrueQ => t.initial_true_q,
            CurveField::EstQ => t.initial_est_q.ok_or(StatsError::MissingEstimate {
                run: t.run_id,
                episode: 0,
            })?,
        });
    }
    points.push(CurvePoint {
        episode: 0,
        stats: MetricStats::from_values(&column).expect("nonempty column"),
    });
    for i in 0..len {
        column.clear();
        for t in traces {
            let r = &t.records[i];
            let v = match field {
                CurveField::TrueQ => r.true_q,
                CurveField::EstQ => r.est_q.ok_or(StatsError::MissingEstimate {
                    run: t.run_id,
                    episode: r.episode,
                })?,
            };
            column.push(v);
        }
        points.push(CurvePoint {
            episode: first.records[i].episode,
            stats: MetricStats::from_values(&column).expect("nonempty column"),
        });
    }
    Ok(points)
}
