//! Per-transformer EV hosting capacity search and feeder sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    assemble, CoordinationProblem, EvProfile, Formulation, ModelParams, ProblemInputs,
    TransformerCase,
};
use crate::par::{map_indexed, ExecMode};
use crate::scenario::{robust_extremes, sample_scenarios, Scenario, UncertaintyConfig};
use crate::solver::{solve_with_hint, BackendKind, SolveLimits, SolveOutcome, SolveStatus};
use crate::timegrid::{ArrangementKind, ScheduleConfig, TimeGrid, WorkArrangement};

/// Work arrangement of a whole fleet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FleetKind {
    InPerson,
    Hybrid,
    Remote,
    Mixed,
}

impl FleetKind {
    pub const ALL: [FleetKind; 4] = [
        FleetKind::InPerson,
        FleetKind::Hybrid,
        FleetKind::Remote,
        FleetKind::Mixed,
    ];
    pub const UNIFORM: [FleetKind; 3] = [FleetKind::InPerson, FleetKind::Hybrid, FleetKind::Remote];

    pub fn label(self) -> &'static str {
        match self {
            FleetKind::InPerson => "in-person",
            FleetKind::Hybrid => "hybrid",
            FleetKind::Remote => "remote",
            FleetKind::Mixed => "mixed",
        }
    }

    pub fn uniform(self) -> Option<ArrangementKind> {
        match self {
            FleetKind::InPerson => Some(ArrangementKind::InPerson),
            FleetKind::Hybrid => Some(ArrangementKind::Hybrid),
            FleetKind::Remote => Some(ArrangementKind::Remote),
            FleetKind::Mixed => None,
        }
    }
}

impl fmt::Display for FleetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FleetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "in-person" | "inperson" => Ok(FleetKind::InPerson),
            "hybrid" => Ok(FleetKind::Hybrid),
            "remote" => Ok(FleetKind::Remote),
            "mixed" => Ok(FleetKind::Mixed),
            other => Err(Error::config(format!("unknown arrangement `{other}`"))),
        }
    }
}

/// Shares of in-person, hybrid, and remote EVs in a mixed fleet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixedSplit {
    pub in_person: f64,
    pub hybrid: f64,
    pub remote: f64,
}

impl Default for MixedSplit {
    fn default() -> Self {
        MixedSplit {
            in_person: 0.60,
            hybrid: 0.27,
            remote: 0.13,
        }
    }
}

impl MixedSplit {
    /// Largest-remainder apportionment of `n` EVs; ties go to the earlier kind.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let shares = [self.in_person, self.hybrid, self.remote];
        let total: f64 = shares.iter().sum();
        let quotas: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
        let mut counts: [usize; 3] = [0; 3];
        for k in 0..3 {
            counts[k] = quotas[k].floor() as usize;
        }
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        let mut left = n - counts.iter().sum::<usize>();
        for k in order {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        counts
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    #[default]
    Linear,
    Bisect,
}

impl FromStr for SearchStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(SearchStrategy::Linear),
            "bisect" => Ok(SearchStrategy::Bisect),
            other => Err(Error::config(format!("unknown search strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_ev: usize,
    pub strategy: SearchStrategy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_ev: 30,
            strategy: SearchStrategy::Linear,
        }
    }
}

/// Everything a hosting-capacity search needs besides the transformer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HostingConfig {
    pub schedule: ScheduleConfig,
    pub uncertainty: UncertaintyConfig,
    pub params: ModelParams,
    pub epsilon: f64,
    pub scenario_count: usize,
    /// Adds the robust extreme to every chance-constrained scenario set.
    pub append_robust_extreme: bool,
    pub master_seed: u64,
    pub limits: SolveLimits,
    pub backend: BackendKind,
    pub mixed: MixedSplit,
}

impl Default for HostingConfig {
    fn default() -> Self {
        let uncertainty = UncertaintyConfig::default();
        HostingConfig {
            schedule: ScheduleConfig::default(),
            params: ModelParams::from_uncertainty(&uncertainty),
            uncertainty,
            epsilon: 0.05,
            scenario_count: 50,
            append_robust_extreme: true,
            master_seed: 1,
            limits: SolveLimits {
                time_limit_s: 30.0,
                feasibility_only: true,
                ..SolveLimits::default()
            },
            backend: BackendKind::Highs,
            mixed: MixedSplit::default(),
        }
    }
}

impl HostingConfig {
    pub fn validate(&self) -> Result<()> {
        self.uncertainty.validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.scenario_count == 0 {
            return Err(Error::config("scenario count must be at least 1"));
        }
        Ok(())
    }
}

/// Deterministic 64-bit seed for a named sub-stream of `master`.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    // FNV-1a over the key, then a splitmix64 finalizer mixed with the master.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for byte in p.bytes().chain([0x1f]) {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the scenario set shared by every cell of one transformer.
pub fn scenario_seed(master: u64, transformer_id: &str) -> u64 {
    derive_seed(master, &["scenarios", transformer_id])
}

/// Arrangements of the first `n` EVs of a fleet.
pub fn fleet_arrangements(
    kind: FleetKind,
    n: usize,
    schedule: &ScheduleConfig,
    split: &MixedSplit,
    seed: u64,
) -> Vec<WorkArrangement> {
    if let Some(uniform) = kind.uniform() {
        return vec![schedule.arrangement(uniform); n];
    }
    let counts = split.counts(n);
    let mut labels: Vec<ArrangementKind> = ArrangementKind::ALL
        .iter()
        .zip(counts)
        .flat_map(|(k, c)| std::iter::repeat_n(*k, c))
        .collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ n as u64);
    labels.shuffle(&mut rng);
    labels
        .into_iter()
        .map(|k| schedule.arrangement(k))
        .collect()
}

/// Scenario inputs for one transformer, sized for the largest fleet.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPool {
    pub formulation: Formulation,
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
}

impl ScenarioPool {
    pub fn new(cfg: &HostingConfig, formulation: Formulation, max_ev: usize, seed: u64) -> Self {
        let scenarios = match formulation {
            Formulation::Robust => vec![robust_extremes(&cfg.uncertainty, max_ev)],
            Formulation::ChanceConstrained => {
                let mut s = sample_scenarios(&cfg.uncertainty, max_ev, cfg.scenario_count, seed);
                if cfg.append_robust_extreme {
                    let mut extreme = robust_extremes(&cfg.uncertainty, max_ev);
                    extreme.scenario_id = s.len();
                    s.push(extreme);
                }
                s
            }
        };
        ScenarioPool {
            formulation,
            scenarios,
            seed,
        }
    }

    pub fn for_count(&self, n: usize) -> Vec<Scenario> {
        self.scenarios.iter().map(|s| s.truncated(n)).collect()
    }
}

/// Builds the fully assembled problem for `n` EVs of a fleet.
pub fn build_problem(
    grid: &Arc<TimeGrid>,
    case: &TransformerCase,
    kind: FleetKind,
    pool: &ScenarioPool,
    n: usize,
    cfg: &HostingConfig,
) -> Result<CoordinationProblem> {
    let mixed_seed = derive_seed(cfg.master_seed, &["mixed", &case.transformer_id]);
    let evs = fleet_arrangements(kind, n, &cfg.schedule, &cfg.mixed, mixed_seed)
        .iter()
        .map(|a| EvProfile::new(grid, a, &cfg.schedule.weights))
        .collect::<Result<Vec<_>>>()?;
    assemble(ProblemInputs {
        grid: grid.clone(),
        params: cfg.params.clone(),
        evs,
        case: case.clone(),
        formulation: pool.formulation,
        scenarios: pool.for_count(n),
        epsilon: cfg.epsilon,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostingCapacityResult {
    pub transformer_id: String,
    pub has_pv: bool,
    pub customer_count: usize,
    pub arrangement: FleetKind,
    pub formulation: Formulation,
    pub hc: usize,
    pub per_count_status: BTreeMap<usize, SolveStatus>,
    pub seed: u64,
    pub epsilon: f64,
    pub scenario_count: usize,
    /// Search stopped on a solve that ended without an answer.
    pub terminated: bool,
    /// Every count up to the search cap was feasible.
    pub capped: bool,
    pub diagnostic: Option<String>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

impl HostingCapacityResult {
    pub fn status_label(&self) -> &'static str {
        if self.error.is_some() {
            "error"
        } else if self.diagnostic.is_some() && self.hc == 0 && self.per_count_status.is_empty() {
            "base_infeasible"
        } else if self.terminated {
            "terminated"
        } else if self.capped {
            "capped"
        } else {
            "ok"
        }
    }

    pub fn is_failure(&self) -> bool {
        self.error.is_some()
    }

    /// Feasible counts never follow an infeasible one in the trace.
    pub fn trace_is_monotone(&self) -> bool {
        let mut seen_infeasible = false;
        for status in self.per_count_status.values() {
            let feasible = matches!(status, SolveStatus::Optimal | SolveStatus::Feasible);
            if feasible && seen_infeasible {
                return false;
            }
            if *status == SolveStatus::Infeasible {
                seen_infeasible = true;
            }
        }
        true
    }
}

/// Hosting capacity of one transformer for one fleet and formulation.
pub fn hosting_capacity(
    case: &TransformerCase,
    kind: FleetKind,
    formulation: Formulation,
    cfg: &HostingConfig,
    search: &SearchConfig,
) -> Result<HostingCapacityResult> {
    let grid = Arc::new(cfg.schedule.build_grid()?);
    let seed = scenario_seed(cfg.master_seed, &case.transformer_id);
    let pool = ScenarioPool::new(cfg, formulation, search.max_ev.max(1), seed);
    hosting_capacity_with(&grid, case, kind, &pool, cfg, search)
}

pub fn hosting_capacity_with(
    grid: &Arc<TimeGrid>,
    case: &TransformerCase,
    kind: FleetKind,
    pool: &ScenarioPool,
    cfg: &HostingConfig,
    search: &SearchConfig,
) -> Result<HostingCapacityResult> {
    let started = Instant::now();
    if search.max_ev == 0 {
        return Err(Error::config("max_ev must be at least 1"));
    }
    cfg.validate()?;
    case.validate(grid.slot_count())?;
    let mut result = HostingCapacityResult {
        transformer_id: case.transformer_id.clone(),
        has_pv: case.has_pv,
        customer_count: case.customer_count,
        arrangement: kind,
        formulation: pool.formulation,
        hc: 0,
        per_count_status: BTreeMap::new(),
        seed: pool.seed,
        epsilon: cfg.epsilon,
        scenario_count: pool.scenarios.len(),
        terminated: false,
        capped: false,
        diagnostic: None,
        error: None,
        wall_time_s: 0.0,
    };
    if let Some(t) = case.base_overload() {
        result.diagnostic = Some(format!(
            "household load {:.3} kW exceeds the {:.3} kVA rating at slot {t} with no EVs",
            case.household_load_kw[t], case.rated_kva
        ));
        result.wall_time_s = started.elapsed().as_secs_f64();
        return Ok(result);
    }

    // Uniform fleets of n EVs extend the fleet of n - 1, so the last answer
    // seeds the next constructive start.
    let mut last: Vec<Vec<bool>> = Vec::new();
    let mut probe = |n: usize, result: &mut HostingCapacityResult| -> Result<Option<bool>> {
        let problem = build_problem(grid, case, kind, pool, n, cfg)?;
        let prefix: &[Vec<bool>] = if kind.uniform().is_some() && last.len() + 1 == n {
            &last
        } else {
            &[]
        };
        let out: SolveOutcome = solve_with_hint(cfg.backend, &problem, &cfg.limits, prefix)?;
        if let Some(s) = &out.schedule {
            last = s.b.clone();
        }
        result.per_count_status.insert(n, out.status);
        Ok(match out.status {
            SolveStatus::Optimal | SolveStatus::Feasible => Some(true),
            SolveStatus::Infeasible => Some(false),
            SolveStatus::TimedOut if out.is_feasible() => Some(true),
            SolveStatus::TimedOut => None,
        })
    };

    match search.strategy {
        SearchStrategy::Linear => {
            for n in 1..=search.max_ev {
                match probe(n, &mut result)? {
                    Some(true) => result.hc = n,
                    Some(false) => break,
                    None => {
                        result.terminated = true;
                        break;
                    }
                }
            }
        }
        SearchStrategy::Bisect => {
            let (mut lo, mut hi) = (0usize, search.max_ev + 1);
            while lo + 1 < hi {
                let mid = lo + (hi - lo) / 2;
                match probe(mid, &mut result)? {
                    Some(true) => lo = mid,
                    Some(false) => hi = mid,
                    None => {
                        result.terminated = true;
                        hi = mid;
                    }
                }
            }
            result.hc = lo;
        }
    }
    result.capped = !result.terminated && result.hc == search.max_ev;
    result.wall_time_s = started.elapsed().as_secs_f64();
    Ok(result)
}

/// Full cross product of transformers, fleets, and formulations.
///
/// Cells run through [`map_indexed`]; a failing cell is recorded with its
/// error and the sweep continues. Output order is transformer, fleet,
/// formulation regardless of execution mode.
pub fn feeder_sweep(
    cases: &[TransformerCase],
    fleets: &[FleetKind],
    formulations: &[Formulation],
    cfg: &HostingConfig,
    search: &SearchConfig,
    mode: ExecMode,
) -> Result<Vec<HostingCapacityResult>> {
    if cases.is_empty() {
        return Err(Error::config("the sweep needs at least one transformer"));
    }
    if fleets.is_empty() {
        return Err(Error::config("the sweep needs at least one arrangement"));
    }
    if formulations.is_empty() {
        return Err(Error::config("the sweep needs at least one formulation"));
    }
    cfg.validate()?;
    let grid = Arc::new(cfg.schedule.build_grid()?);
    let max_ev = search.max_ev.max(1);
    let pools: Vec<Vec<ScenarioPool>> = cases
        .iter()
        .map(|c| {
            let seed = scenario_seed(cfg.master_seed, &c.transformer_id);
            formulations
                .iter()
                .map(|&f| ScenarioPool::new(cfg, f, max_ev, seed))
                .collect()
        })
        .collect();
    let cells: Vec<(usize, usize, usize)> = (0..cases.len())
        .flat_map(|c| {
            (0..fleets.len()).flat_map(move |a| (0..formulations.len()).map(move |f| (c, a, f)))
        })
        .collect();
    let results = map_indexed(mode, cells.len(), |i| {
        let (c, a, f) = cells[i];
        let case = &cases[c];
        hosting_capacity_with(&grid, case, fleets[a], &pools[c][f], cfg, search).unwrap_or_else(
            |e| HostingCapacityResult {
                transformer_id: case.transformer_id.clone(),
                has_pv: case.has_pv,
                customer_count: case.customer_count,
                arrangement: fleets[a],
                formulation: formulations[f],
                hc: 0,
                per_count_status: BTreeMap::new(),
                seed: pools[c][f].seed,
                epsilon: cfg.epsilon,
                scenario_count: pools[c][f].scenarios.len(),
                terminated: false,
                capped: false,
                diagnostic: None,
                error: Some(e.to_string()),
                wall_time_s: 0.0,
            },
        )
    });
    Ok(results)
}

/// Looks up one cell of a sweep.
pub fn find_cell<'a>(
    results: &'a [HostingCapacityResult],
    transformer_id: &str,
    arrangement: FleetKind,
    formulation: Formulation,
) -> Option<&'a HostingCapacityResult> {
    results.iter().find(|r| {
        r.transformer_id == transformer_id
            && r.arrangement == arrangement
            && r.formulation == formulation
    })
}

const TABLE_HEADER: &str =
    "transformer_id,has_pv,customer_count,arrangement,formulation,epsilon,scenarios,hc,status,solves,seed";

/// Result table as CSV text. Wall times are kept out so reruns compare
/// byte for byte; see [`timings_csv`].
pub fn results_csv(results: &[HostingCapacityResult]) -> String {
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for r in results {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.transformer_id,
            r.has_pv,
            r.customer_count,
            r.arrangement,
            r.formulation,
            r.epsilon,
            r.scenario_count,
            r.hc,
            r.status_label(),
            r.per_count_status.len(),
            r.seed
        ));
    }
    s
}

pub fn timings_csv(results: &[HostingCapacityResult]) -> String {
    let mut s = String::from("transformer_id,arrangement,formulation,wall_time_s\n");
    for r in results {
        s.push_str(&format!(
            "{},{},{},{:.3}\n",
            r.transformer_id, r.arrangement, r.formulation, r.wall_time_s
        ));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub arrangement: FleetKind,
    pub formulation: Formulation,
    pub cells: usize,
    pub mean_hc: f64,
    pub min_hc: usize,
    pub max_hc: usize,
    pub mean_hc_pv: Option<f64>,
    pub mean_hc_non_pv: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub failed_cells: Vec<String>,
    pub terminated_cells: Vec<String>,
    pub groups: Vec<GroupSummary>,
}

fn mean(xs: impl Iterator<Item = usize>) -> Option<f64> {
    let v: Vec<usize> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64)
}

pub fn summarize(results: &[HostingCapacityResult]) -> SweepSummary {
    let mut keys: Vec<(FleetKind, Formulation)> = results
        .iter()
        .map(|r| (r.arrangement, r.formulation))
        .collect();
    keys.sort();
    keys.dedup();
    let cell_name = |r: &HostingCapacityResult| {
        format!("{}/{}/{}", r.transformer_id, r.arrangement, r.formulation)
    };
    let groups = keys
        .into_iter()
        .map(|(a, f)| {
            let rs: Vec<&HostingCapacityResult> = results
                .iter()
                .filter(|r| r.arrangement == a && r.formulation == f)
                .collect();
            GroupSummary {
                arrangement: a,
                formulation: f,
                cells: rs.len(),
                mean_hc: mean(rs.iter().map(|r| r.hc)).unwrap_or(0.0),
                min_hc: rs.iter().map(|r| r.hc).min().unwrap_or(0),
                max_hc: rs.iter().map(|r| r.hc).max().unwrap_or(0),
                mean_hc_pv: mean(rs.iter().filter(|r| r.has_pv).map(|r| r.hc)),
                mean_hc_non_pv: mean(rs.iter().filter(|r| !r.has_pv).map(|r| r.hc)),
            }
        })
        .collect();
    SweepSummary {
        cells: results.len(),
        failed_cells: results
            .iter()
            .filter(|r| r.is_failure())
            .map(cell_name)
            .collect(),
        terminated_cells: results
            .iter()
            .filter(|r| r.terminated)
            .map(cell_name)
            .collect(),
        groups,
    }
}

/// Writes `results.csv`, `timings.csv`, and `summary.json` into `dir`.
pub fn write_sweep(
    dir: &Path,
    results: &[HostingCapacityResult],
    echo: &serde_json::Value,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(text.as_bytes())
            .map_err(|e| Error::io(&path, e))
    };
    write("results.csv", &results_csv(results))?;
    write("timings.csv", &timings_csv(results))?;
    let doc = serde_json::json!({
        "run": echo,
        "summary": summarize(results),
        "cells": results.iter().map(|r| serde_json::json!({
            "transformer_id": r.transformer_id,
            "arrangement": r.arrangement,
            "formulation": r.formulation,
            "hc": r.hc,
            "status": r.status_label(),
            "per_count_status": r.per_count_status.iter().map(|(k, v)| (k.to_string(), v.label())).collect::<BTreeMap<_, _>>(),
            "seed": r.seed,
            "diagnostic": r.diagnostic,
            "error": r.error,
        })).collect::<Vec<_>>(),
    });
    write("summary.json", &serde_json::to_string_pretty(&doc)?)
}
