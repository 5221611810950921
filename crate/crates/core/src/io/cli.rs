//! The `qrl` command line.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{load_config, read_layout, ConfigError, LoadedConfig, Overrides};
use super::summary::write_summary;
use super::trace::{format_sig10, write_curve_csv, write_trace_csv};
use crate::env::{enumerate_rewarded, DEFAULT_ENUMERATION_CAP};
use crate::experiments::{
    aggregate, child_seed, curve_of, AgentKind, CurveField, RunTrace, StoppingCriterion,
};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "QRL_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_TERMINATING: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qrl", version, about = "Hybrid and classical PS agents in moving-target gridworlds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct OverrideArgs {
    /// Replace the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the config's run count.
    #[arg(long)]
    runs: Option<usize>,
    /// Replace the config's agent (classical or hybrid).
    #[arg(long)]
    agent: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write trace.csv, summary.json and curve files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Replace the config's dissipation parameter.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Print rewarded-sequence statistics for every route of a layout.
    Enumerate {
        #[arg(long)]
        layout: PathBuf,
    },
    /// Run the scenario once per gamma, each in its own subdirectory.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Check a config and its layout without writing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Other(anyhow::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        }
        Err(CliError::Other(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run {
            config,
            out_dir,
            overrides,
            gamma,
        } => {
            let overrides = to_overrides(overrides, gamma)?;
            let workers = workers()?;
            let loaded = load_config(&config, &overrides)?;
            run_to_dir(&loaded, &out_dir, workers)
        }
        Command::Enumerate { layout } => {
            enumerate(&layout)?;
            Ok(EXIT_OK)
        }
        Command::Sweep {
            config,
            gammas,
            out_dir,
            overrides,
        } => {
            let workers = workers()?;
            let base = to_overrides(overrides, None)?;
            // validate every point before running any of them
            let seed = load_config(&config, &base)?.raw.seed;
            let mut loaded = Vec::new();
            for (i, &g) in gammas.iter().enumerate() {
                let point = Overrides {
                    seed: Some(child_seed(seed, i as u64)),
                    gamma: Some(g),
                    ..base.clone()
                };
                loaded.push((g, load_config(&config, &point)?));
            }
            let mut code = EXIT_OK;
            for (g, cfg) in &loaded {
                let dir = out_dir.join(format!("gamma_{g}"));
                code = code.max(run_to_dir(cfg, &dir, workers)?);
            }
            Ok(code)
        }
        Command::Validate { config } => {
            let loaded = load_config(&config, &Overrides::default())?;
            let s = &loaded.scenario;
            println!(
                "ok: {} agent, {} phase(s), {} run(s), layout {} ({} route(s), episode length {})",
                s.config().agent.name(),
                s.config().phases.len(),
                s.config().runs,
                loaded.layout_path.display(),
                s.layout().routes().len(),
                s.layout().episode_len()
            );
            if !s.phases_disjoint() {
                println!("note: consecutive phases use routes with overlapping rewarded sets");
            }
            Ok(EXIT_OK)
        }
    }
}

fn to_overrides(args: OverrideArgs, gamma: Option<f64>) -> Result<Overrides, CliError> {
    if let Some(agent) = &args.agent {
        if AgentKind::from_name(agent).is_none() {
            return Err(ConfigError::Field {
                field: "--agent".into(),
                message: format!("unknown agent {agent:?}, expected classical or hybrid"),
            }
            .into());
        }
    }
    Ok(Overrides {
        seed: args.seed,
        runs: args.runs,
        agent: args.agent,
        gamma,
    })
}

fn workers() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(ConfigError::Field {
                field: WORKERS_ENV.into(),
                message: format!("expected a positive integer, got {v:?}"),
            }
            .into()),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn enumerate(path: &Path) -> Result<(), CliError> {
    let layout = read_layout(path)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "route,rewarded,sequences,initial_success_prob,shortest_reward_step")?;
    for (i, route) in layout.routes().iter().enumerate() {
        let oracle = enumerate_rewarded(&layout, route, DEFAULT_ENUMERATION_CAP)
            .map_err(|e| CliError::Other(e.into()))?;
        writeln!(
            out,
            "{},{},{},{},{}",
            i,
            oracle.len(),
            oracle.total_sequences(),
            format_sig10(oracle.uniform_success_prob()),
            oracle.shortest_reward_step().map(|s| s.to_string()).unwrap_or_default()
        )?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run_to_dir(loaded: &LoadedConfig, out_dir: &Path, workers: usize) -> Result<i32, CliError> {
    let scenario = &loaded.scenario;
    let traces: Vec<RunTrace> = scenario
        .run_all(workers)
        .map_err(|e| CliError::Other(e.into()))?;
    let stats = aggregate(&traces).map_err(|e| CliError::Other(e.into()))?;

    fs::create_dir_all(out_dir)?;
    let mut f = create(&out_dir.join("trace.csv"))?;
    write_trace_csv(&mut f, &traces)?;
    f.flush()?;
    let mut f = create(&out_dir.join("summary.json"))?;
    write_summary(&mut f, &loaded.raw, scenario, &stats)?;
    f.flush()?;

    let finished: Vec<RunTrace> = traces.iter().filter(|t| t.terminated).cloned().collect();
    let fields: &[CurveField] = match scenario.config().agent {
        AgentKind::Classical => &[CurveField::TrueQ],
        AgentKind::Hybrid => &[CurveField::TrueQ, CurveField::EstQ],
    };
    let fixed_budget = scenario
        .config()
        .phases
        .iter()
        .all(|p| matches!(p.stopping, StoppingCriterion::FixedEpisodes(_)));
    if fixed_budget && !finished.is_empty() {
        for &field in fields {
            let curve = curve_of(&finished, field).map_err(|e| CliError::Other(e.into()))?;
            let mut f = create(&out_dir.join(format!("curve_{}.csv", field.name())))?;
            write_curve_csv(&mut f, &curve)?;
            f.flush()?;
        }
    }

    if stats.non_terminating > 0 {
        eprintln!(
            "warning: {} of {} run(s) hit the hard cap of {} episodes and were excluded",
            stats.non_terminating,
            stats.runs,
            scenario.config().hard_cap
        );
    }
    let fraction = stats.non_terminating as f64 / stats.runs as f64;
    Ok(if fraction > loaded.max_non_terminating() {
        EXIT_NON_TERMINATING
    } else {
        EXIT_OK
    })
}
