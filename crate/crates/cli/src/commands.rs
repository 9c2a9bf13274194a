use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context as _;
use evhc::analysis::{
    artifact_stem, compare_arrangements, plot_hc_bars, write_comparison, write_report,
    CompareConfig, ScheduleRecord,
};
use evhc::hosting::{build_problem, feeder_sweep, scenario_seed, write_sweep, ScenarioPool};
use evhc::ingest::{save_feeder, synth_feeder, FeederDataset, SynthSpec};
use evhc::model::compact::compact;
use evhc::model::lp::write_lp;
use evhc::model::{CoordinationProblem, TransformerCase};
use evhc::scenario::{sample_scenarios_with, save_scenarios};
use evhc::solver::{check_schedule, solve_with};
use serde_json::{json, Value};

use crate::config::{usage, RunConfig};
use crate::{Command, ProblemArgs};

pub fn run(command: &Command, cfg: &RunConfig) -> anyhow::Result<u8> {
    match command {
        Command::Hc => cmd_hc(cfg),
        Command::Solve(args) => cmd_solve(cfg, args),
        Command::Sample { evs, file } => cmd_sample(cfg, *evs, file.as_deref()),
        Command::Report { schedule } => cmd_report(cfg, schedule),
        Command::Synth { count, file } => cmd_synth(cfg, *count, file.as_deref()),
        Command::Compare {
            transformer,
            evs,
            formulation,
            hc,
        } => {
            cfg.validate(true)?;
            let feeder = cfg.load_feeder()?;
            let case = pick(&feeder, transformer.as_deref())?;
            let compare = CompareConfig {
                hosting: cfg.hosting.clone(),
                ev_count: *evs,
                formulation: *formulation,
                limits: cfg.hosting.limits.clone(),
                hc_search: hc.then_some(cfg.search),
            };
            let cmp = compare_arrangements(case, &compare)?;
            let grid = cfg.hosting.schedule.build_grid()?;
            write_comparison(&cfg.out, &cmp, &grid)?;
            write_echo(&cfg.out, "compare", cfg)?;
            println!(
                "{:<10} {:>8} {:>12} {:>12} {:>10}",
                "fleet", "status", "reverse_kwh", "weekday_kwh", "peak_kw"
            );
            println!(
                "{:<10} {:>8} {:>12.2} {:>12.2} {:>10.2}",
                "base",
                "-",
                cmp.base.reverse_flow_energy_kwh,
                cmp.base.weekday_reverse_flow_kwh(),
                cmp.base.peak_kw
            );
            let mut failed = false;
            for cell in &cmp.cells {
                match &cell.report {
                    Some(r) => println!(
                        "{:<10} {:>8} {:>12.2} {:>12.2} {:>10.2}",
                        cell.fleet.label(),
                        cell.status.map_or("-", |s| s.label()),
                        r.reverse_flow_energy_kwh,
                        r.weekday_reverse_flow_kwh(),
                        r.peak_kw
                    ),
                    None => {
                        failed = true;
                        println!(
                            "{:<10} {:>8} {}",
                            cell.fleet.label(),
                            cell.status.map_or("error", |s| s.label()),
                            cell.error.as_deref().unwrap_or("no schedule")
                        );
                    }
                }
            }
            Ok(failed as u8)
        }
        Command::ExportLp {
            problem,
            full,
            file,
        } => {
            cfg.validate(true)?;
            let p = problem_from(cfg, problem)?;
            let milp = if *full {
                p.milp()
            } else {
                compact(&p, true)?.milp
            };
            let path = match file {
                Some(f) => f.clone(),
                None => {
                    std::fs::create_dir_all(&cfg.out)
                        .with_context(|| format!("creating {}", cfg.out.display()))?;
                    let case_id = p
                        .transformer
                        .as_ref()
                        .map_or("case", |c| c.transformer_id.as_str());
                    cfg.out.join(format!(
                        "{}.lp",
                        artifact_stem(case_id, problem.arrangement.label(), problem.formulation)
                    ))
                }
            };
            write_lp(&path, &milp)?;
            println!(
                "wrote {} ({} columns, {} rows)",
                path.display(),
                milp.vars.len(),
                milp.rows.len()
            );
            Ok(0)
        }
    }
}

/// Metadata written next to every output: the command and resolved settings.
pub fn echo(command: &str, cfg: &RunConfig) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": std::env::args().skip(1).collect::<Vec<_>>(),
        "config": cfg,
    })
}

fn write_echo(dir: &Path, command: &str, cfg: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&echo(command, cfg))?)
        .with_context(|| format!("writing {}", path.display()))
}

fn pick<'a>(feeder: &'a FeederDataset, id: Option<&str>) -> anyhow::Result<&'a TransformerCase> {
    match id {
        Some(id) => feeder.get(id).ok_or_else(|| {
            let known: Vec<&str> = feeder
                .transformers
                .iter()
                .map(|t| t.transformer_id.as_str())
                .collect();
            usage(format!(
                "unknown transformer `{id}` (feeder has {})",
                known.join(", ")
            ))
            .into()
        }),
        None => feeder
            .transformers
            .first()
            .ok_or_else(|| usage("the feeder has no transformers").into()),
    }
}

fn problem_from(cfg: &RunConfig, args: &ProblemArgs) -> anyhow::Result<CoordinationProblem> {
    if args.evs == 0 {
        return Err(usage("--evs must be at least 1").into());
    }
    let feeder = cfg.load_feeder()?;
    let case = pick(&feeder, args.transformer.as_deref())?;
    let grid = Arc::new(cfg.hosting.schedule.build_grid()?);
    let seed = scenario_seed(cfg.hosting.master_seed, &case.transformer_id);
    let pool = ScenarioPool::new(&cfg.hosting, args.formulation, args.evs, seed);
    Ok(build_problem(
        &grid,
        case,
        args.arrangement,
        &pool,
        args.evs,
        &cfg.hosting,
    )?)
}

fn cmd_hc(cfg: &RunConfig) -> anyhow::Result<u8> {
    cfg.validate(true)?;
    let feeder = cfg.load_feeder()?;
    let results = feeder_sweep(
        &feeder.transformers,
        &cfg.arrangements,
        &cfg.formulations,
        &cfg.hosting,
        &cfg.search,
        cfg.exec,
    )?;
    write_sweep(&cfg.out, &results, &echo("hc", cfg))?;
    for &f in &cfg.formulations {
        let subset: Vec<_> = results
            .iter()
            .filter(|r| r.formulation == f)
            .cloned()
            .collect();
        plot_hc_bars(
            &cfg.out.join(format!("hc_{}.svg", f.label())),
            &format!("Hosting capacity ({})", f.label()),
            &subset,
        )?;
    }
    println!(
        "{:<12} {:<10} {:<7} {:>4}  status",
        "transformer", "fleet", "form", "hc"
    );
    for r in &results {
        println!(
            "{:<12} {:<10} {:<7} {:>4}  {}",
            r.transformer_id,
            r.arrangement.label(),
            r.formulation.label(),
            r.hc,
            r.status_label()
        );
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| r.is_failure())
        .map(|r| format!("{}/{}/{}", r.transformer_id, r.arrangement, r.formulation))
        .collect();
    println!("results written to {}", cfg.out.display());
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("{} failed cells: {}", failed.len(), failed.join(", "));
        Ok(1)
    }
}

fn cmd_solve(cfg: &RunConfig, args: &ProblemArgs) -> anyhow::Result<u8> {
    cfg.validate(true)?;
    let problem = problem_from(cfg, args)?;
    let mut limits = cfg.hosting.limits.clone();
    limits.feasibility_only = args.feasibility;
    let outcome = solve_with(cfg.hosting.backend, &problem, &limits)?;
    let case = problem
        .transformer
        .as_ref()
        .expect("assembled problems carry their transformer");
    let stem = artifact_stem(
        &case.transformer_id,
        args.arrangement.label(),
        args.formulation,
    );
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write_echo(&cfg.out, "solve", cfg)?;
    println!(
        "{} {} {} evs={} status={} objective={:.6} backend={}",
        case.transformer_id,
        args.arrangement,
        args.formulation,
        args.evs,
        outcome.status,
        outcome.objective_value,
        outcome.backend
    );
    let Some(schedule) = &outcome.schedule else {
        if let Some(d) = &outcome.diagnostic {
            println!("diagnostic: {d}");
        }
        return Ok(1);
    };
    let report = check_schedule(schedule, &problem);
    if !report.is_feasible() {
        anyhow::bail!(evhc::error::Error::Solver(format!(
            "returned schedule fails the checker: {report}"
        )));
    }
    let record = ScheduleRecord::new(
        &problem,
        schedule,
        args.arrangement,
        outcome.status,
        outcome.objective_value,
        &cfg.hosting.schedule,
    );
    let schedule_path = cfg.out.join(format!("{stem}.schedule.json"));
    record.save(&schedule_path)?;
    let loading = record.evaluate(case)?;
    write_report(&cfg.out, &stem, &loading, &problem.grid)?;
    println!(
        "peak {:.2} kW ({:.0}% of rating), reverse flow {:.2} kWh, cost {:.2}",
        loading.peak_kw,
        100.0 * loading.peak_utilization,
        loading.reverse_flow_energy_kwh,
        loading.tariff_cost
    );
    println!("schedule written to {}", schedule_path.display());
    Ok(0)
}

fn cmd_sample(cfg: &RunConfig, evs: usize, file: Option<&Path>) -> anyhow::Result<u8> {
    cfg.validate(false)?;
    if evs == 0 {
        return Err(usage("--evs must be at least 1").into());
    }
    let scenarios = sample_scenarios_with(
        cfg.exec,
        &cfg.hosting.uncertainty,
        evs,
        cfg.hosting.scenario_count,
        cfg.hosting.master_seed,
    );
    let path = out_file(cfg, file, "scenarios.csv")?;
    save_scenarios(&path, &scenarios)?;
    write_echo(path.parent().unwrap_or(Path::new(".")), "sample", cfg)?;
    println!(
        "wrote {} records to {}",
        scenarios.len() * evs,
        path.display()
    );
    Ok(0)
}

fn cmd_report(cfg: &RunConfig, schedule: &Path) -> anyhow::Result<u8> {
    let record = ScheduleRecord::load(schedule)?;
    let feeder = cfg.load_feeder_for_report()?;
    let case = pick(&feeder, Some(&record.transformer_id))?;
    let loading = record.evaluate(case)?;
    let grid = record.grid()?;
    let stem = artifact_stem(
        &record.transformer_id,
        record.fleet.label(),
        record.formulation,
    );
    let written = write_report(&cfg.out, &stem, &loading, &grid)?;
    write_echo(&cfg.out, "report", cfg)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(0)
}

fn cmd_synth(cfg: &RunConfig, count: usize, file: Option<&Path>) -> anyhow::Result<u8> {
    let spec = SynthSpec {
        transformer_count: cfg.synth.unwrap_or(count),
        ..cfg.synth_spec.clone()
    };
    let feeder = synth_feeder(&spec)?;
    let path = out_file(cfg, file, "feeder.csv")?;
    save_feeder(&feeder, &path)?;
    println!(
        "wrote {} transformers to {}",
        feeder.transformers.len(),
        path.display()
    );
    Ok(0)
}

fn out_file(cfg: &RunConfig, file: Option<&Path>, default: &str) -> anyhow::Result<PathBuf> {
    let path = file.map_or_else(|| cfg.out.join(default), Path::to_path_buf);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(path)
}

impl RunConfig {
    /// The feeder a saved schedule is evaluated on; a report needs one source.
    fn load_feeder_for_report(&self) -> anyhow::Result<FeederDataset> {
        self.validate(true)?;
        self.load_feeder()
    }
}
