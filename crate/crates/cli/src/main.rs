//! `evhc`: hosting-capacity sweeps, single solves, scenario sampling, and
//! report regeneration for residential EV charging coordination.
//!
//! Exit codes: 0 success, 1 finished with failed cells or no schedule,
//! 2 usage or configuration error, 3 solver backend unavailable, 4 I/O or
//! data error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evhc::hosting::{FleetKind, SearchStrategy};
use evhc::model::Formulation;
use evhc::par::ExecMode;
use evhc::solver::BackendKind;

use crate::config::{RunConfig, UsageError};

#[derive(Debug, Parser)]
#[command(
    name = "evhc",
    version,
    about = "EV hosting capacity under weekly work schedules"
)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. A `--config` file overrides them.
#[derive(Debug, Args)]
struct Common {
    /// TOML file whose keys override the flags below.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Cap on parallel workers (0 uses every core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Feeder CSV with a metadata sidecar.
    #[arg(long, global = true, value_name = "FILE")]
    feeder: Option<PathBuf>,

    /// Use a synthetic feeder with N transformers.
    #[arg(long, global = true, value_name = "N")]
    synth: Option<usize>,

    /// Comma-separated fleets, or `all`.
    #[arg(long, global = true, value_delimiter = ',')]
    arrangements: Option<Vec<String>>,

    /// Comma-separated formulations (`robust`, `cc`).
    #[arg(long, global = true, value_delimiter = ',')]
    formulations: Option<Vec<Formulation>>,

    /// Chance-constraint risk level.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Sampled scenarios per chance-constrained problem.
    #[arg(long, global = true)]
    scenarios: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Per-solve time limit in seconds.
    #[arg(long, global = true)]
    time_limit: Option<f64>,

    /// Largest fleet size the capacity search tries.
    #[arg(long, global = true)]
    max_ev: Option<usize>,

    #[arg(long, global = true)]
    strategy: Option<SearchStrategy>,

    /// Solver backend; defaults to `EVHC_SOLVER` or HiGHS.
    #[arg(long, global = true)]
    backend: Option<BackendKind>,

    /// Run every cell on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hosting-capacity sweep over transformers, fleets, and formulations.
    Hc,
    /// Solve one coordination problem and write the schedule and its report.
    Solve(ProblemArgs),
    /// Draw a scenario set and write it as CSV.
    Sample {
        #[arg(long, default_value_t = 8)]
        evs: usize,
        /// Output file (defaults to `<out>/scenarios.csv`).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Rebuild a loading report from a saved schedule.
    Report {
        #[arg(long, value_name = "FILE")]
        schedule: PathBuf,
    },
    /// Write a synthetic feeder CSV and its metadata sidecar.
    Synth {
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Output file (defaults to `<out>/feeder.csv`).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Solve every fleet at one EV count and compare transformer loading.
    Compare {
        #[arg(long)]
        transformer: Option<String>,
        #[arg(long, default_value_t = 4)]
        evs: usize,
        #[arg(long, default_value = "robust")]
        formulation: Formulation,
        /// Also search each fleet's hosting capacity.
        #[arg(long)]
        hc: bool,
    },
    /// Write one problem as a CPLEX LP file.
    ExportLp {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Export the full slot-level model instead of the compact one.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Clone)]
struct ProblemArgs {
    /// Transformer id (defaults to the first one in the feeder).
    #[arg(long)]
    transformer: Option<String>,
    #[arg(long, default_value = "hybrid")]
    arrangement: FleetKind,
    #[arg(long, default_value = "robust")]
    formulation: Formulation,
    #[arg(long, default_value_t = 4)]
    evs: usize,
    /// Stop at the first feasible schedule instead of minimising cost.
    #[arg(long)]
    feasibility: bool,
}

fn parse_fleets(items: &[String]) -> anyhow::Result<Vec<FleetKind>> {
    let mut fleets = Vec::new();
    for s in items {
        if s.trim().eq_ignore_ascii_case("all") {
            fleets.extend(FleetKind::ALL);
        } else {
            fleets.push(
                s.parse::<FleetKind>()
                    .map_err(|e| config::usage(e.to_string()))?,
            );
        }
    }
    fleets.sort();
    fleets.dedup();
    Ok(fleets)
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Ok(kind) = std::env::var(evhc::solver::SOLVER_ENV) {
            if !kind.trim().is_empty() {
                cfg.hosting.backend = kind.parse()?;
            }
        }
        cfg.feeder = self.feeder.clone();
        cfg.synth = self.synth;
        if let Some(a) = &self.arrangements {
            cfg.arrangements = parse_fleets(a)?;
        }
        if let Some(f) = &self.formulations {
            let mut forms = f.clone();
            forms.sort();
            forms.dedup();
            cfg.formulations = forms;
        }
        if let Some(x) = self.eps {
            cfg.hosting.epsilon = x;
        }
        if let Some(x) = self.scenarios {
            cfg.hosting.scenario_count = x;
        }
        if let Some(x) = self.seed {
            cfg.hosting.master_seed = x;
        }
        if let Some(x) = self.time_limit {
            cfg.hosting.limits.time_limit_s = x;
        }
        if let Some(x) = self.max_ev {
            cfg.search.max_ev = x;
        }
        if let Some(x) = self.strategy {
            cfg.search.strategy = x;
        }
        if let Some(x) = self.backend {
            cfg.hosting.backend = x;
        }
        if self.sequential {
            cfg.exec = ExecMode::Sequential;
        }
        if let Some(x) = self.jobs {
            cfg.jobs = x;
        }
        if let Some(x) = &self.out {
            cfg.out = x.clone();
        }
        match &self.config {
            Some(path) => cfg.overlay_file(path),
            None => Ok(cfg),
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<evhc::error::Error>() {
            use evhc::error::Error as E;
            return match e {
                E::Config(_) => 2,
                E::Environment(_) => 3,
                E::Io { .. } | E::Parse { .. } | E::Csv(_) | E::Json(_) | E::Dimension(_) => 4,
                E::Solver(_) | E::OracleGuard(_) => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    1
}

/// The error chain on one line, skipping causes the outer message repeats.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli
        .common
        .resolve()
        .and_then(|cfg| evhc::par::with_jobs(cfg.jobs, || commands::run(&cli.command, &cfg)));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
