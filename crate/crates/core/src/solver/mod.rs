//! Solving coordination problems through a pluggable MIP backend.
//!
//! The backend is chosen with the `EVHC_SOLVER` environment variable
//! (`highs` or `enumerate`). HiGHS is the default when the crate is built
//! with the `highs` feature; the enumeration backend only handles mini-grid
//! instances and exists for verification.

pub mod check;
pub mod greedy;
#[cfg(feature = "highs")]
pub mod highs;
mod lns;
pub mod oracle;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::compact::compact;
use crate::model::{CoordinationProblem, Formulation, Milp, VarRole};

pub use check::{check_schedule, Violation, ViolationReport};
pub use greedy::{greedy_schedule, greedy_schedule_from};
pub use oracle::{oracle_enumerate, ORACLE_GUARD};

/// Share of a feasibility solve's time limit spent completing a partial
/// constructive schedule before the full model is handed to the backend.
const LNS_SHARE: f64 = 0.85;

pub const SOLVER_ENV: &str = "EVHC_SOLVER";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    TimedOut,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimedOut => "timed_out",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveLimits {
    pub time_limit_s: f64,
    /// Relative optimality gap accepted as optimal.
    pub gap_tol: f64,
    /// Worker threads handed to the backend.
    pub threads: usize,
    /// Stop at the first feasible schedule instead of proving optimality.
    pub feasibility_only: bool,
    pub random_seed: u32,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            time_limit_s: 300.0,
            gap_tol: 1e-4,
            threads: 1,
            feasibility_only: false,
            random_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingSchedule {
    pub b: Vec<Vec<bool>>,
    pub d: Vec<Vec<bool>>,
    /// Kept scenarios; empty for the robust formulation.
    pub z: Vec<bool>,
    /// `soc[v][xi][t]` in kWh.
    pub soc_trajectories: Vec<Vec<Vec<f64>>>,
}

impl ChargingSchedule {
    /// Builds a schedule from charge and drive matrices, filling in SoC.
    pub fn from_decisions(
        problem: &CoordinationProblem,
        b: Vec<Vec<bool>>,
        d: Vec<Vec<bool>>,
        z: Vec<bool>,
    ) -> Self {
        let soc_trajectories = (0..problem.ev_count())
            .map(|v| {
                (0..problem.scenario_count())
                    .map(|xi| problem.trajectory(v, xi, &b[v], &d[v]))
                    .collect()
            })
            .collect();
        ChargingSchedule {
            b,
            d,
            z,
            soc_trajectories,
        }
    }

    /// All-idle schedule with the fixed commute pattern.
    pub fn idle(problem: &CoordinationProblem) -> Self {
        let b = vec![vec![false; problem.slot_count()]; problem.ev_count()];
        let d = problem.evs.iter().map(|e| e.driving.clone()).collect();
        let z = match problem.formulation {
            Formulation::Robust => vec![],
            Formulation::ChanceConstrained => vec![true; problem.scenario_count()],
        };
        ChargingSchedule::from_decisions(problem, b, d, z)
    }

    pub fn charge_slots(&self, v: usize) -> usize {
        self.b[v].iter().filter(|x| **x).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub schedule: Option<ChargingSchedule>,
    pub objective_value: f64,
    pub gap: f64,
    pub wall_time_s: f64,
    pub backend: String,
    /// Why the instance is infeasible, when known without search.
    pub diagnostic: Option<String>,
}

impl SolveOutcome {
    pub fn is_feasible(&self) -> bool {
        self.schedule.is_some()
    }

    fn without_schedule(
        status: SolveStatus,
        backend: &str,
        started: Instant,
        diagnostic: Option<String>,
    ) -> Self {
        SolveOutcome {
            status,
            schedule: None,
            objective_value: f64::NAN,
            gap: f64::INFINITY,
            wall_time_s: started.elapsed().as_secs_f64(),
            backend: backend.to_string(),
            diagnostic,
        }
    }
}

/// Raw result of a backend run on a generic MILP.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub x: Option<Vec<f64>>,
    pub gap: f64,
}

/// Narrow interface to an external MIP solver.
pub trait MipBackend: Send + Sync {
    fn name(&self) -> &'static str;
    /// `start` is an optional feasible column vector to warm-start from.
    fn solve_milp(
        &self,
        milp: &Milp,
        limits: &SolveLimits,
        start: Option<&[f64]>,
    ) -> Result<RawSolution>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Highs,
    Enumerate,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highs" => Ok(BackendKind::Highs),
            "enumerate" | "oracle" => Ok(BackendKind::Enumerate),
            other => Err(Error::Environment(format!(
                "unknown solver backend `{other}` (expected highs or enumerate)"
            ))),
        }
    }
}

impl BackendKind {
    /// Backend named by `EVHC_SOLVER`, defaulting to HiGHS.
    pub fn from_env() -> Result<Self> {
        match std::env::var(SOLVER_ENV) {
            Ok(s) if !s.trim().is_empty() => s.parse(),
            _ => Ok(BackendKind::Highs),
        }
    }

    pub fn available(self) -> bool {
        match self {
            BackendKind::Highs => cfg!(feature = "highs"),
            BackendKind::Enumerate => true,
        }
    }

    fn backend(self) -> Result<Box<dyn MipBackend>> {
        match self {
            #[cfg(feature = "highs")]
            BackendKind::Highs => Ok(Box::new(highs::HighsBackend)),
            #[cfg(not(feature = "highs"))]
            BackendKind::Highs => Err(Error::Environment(
                "the HiGHS backend is not compiled in; rebuild with the `highs` feature or set EVHC_SOLVER=enumerate"
                    .into(),
            )),
            BackendKind::Enumerate => Err(Error::Environment("enumeration works on problems, not MILPs".into())),
        }
    }
}

/// Solves with the backend selected by the environment.
pub fn solve(problem: &CoordinationProblem, limits: &SolveLimits) -> Result<SolveOutcome> {
    solve_with(BackendKind::from_env()?, problem, limits)
}

pub fn solve_with(
    kind: BackendKind,
    problem: &CoordinationProblem,
    limits: &SolveLimits,
) -> Result<SolveOutcome> {
    solve_with_hint(kind, problem, limits, &[])
}

/// Like [`solve_with`], offering `prefix` as charge rows for the first EVs
/// of the constructive start, typically the answer for one EV fewer.
pub fn solve_with_hint(
    kind: BackendKind,
    problem: &CoordinationProblem,
    limits: &SolveLimits,
    prefix: &[Vec<bool>],
) -> Result<SolveOutcome> {
    match kind {
        BackendKind::Enumerate => {
            let mut out = oracle_enumerate(problem)?;
            if limits.feasibility_only && out.status == SolveStatus::Optimal {
                out.status = SolveStatus::Feasible;
            }
            Ok(out)
        }
        BackendKind::Highs => {
            let backend = kind.backend()?;
            solve_milp_backend_hint(backend.as_ref(), problem, limits, prefix)
        }
    }
}

/// Solves through any [`MipBackend`], using the reduced model when the
/// driving pattern is fixed and the full MILP otherwise.
///
/// With a fixed driving pattern a constructive schedule is tried first. In
/// feasibility mode it answers the question on its own; otherwise it seeds
/// the backend.
pub fn solve_milp_backend(
    backend: &dyn MipBackend,
    problem: &CoordinationProblem,
    limits: &SolveLimits,
) -> Result<SolveOutcome> {
    solve_milp_backend_hint(backend, problem, limits, &[])
}

fn solve_milp_backend_hint(
    backend: &dyn MipBackend,
    problem: &CoordinationProblem,
    limits: &SolveLimits,
    prefix: &[Vec<bool>],
) -> Result<SolveOutcome> {
    let started = Instant::now();
    let with_objective = !limits.feasibility_only;
    let (b, d, z, raw) = if problem.driving_fixed {
        let model = compact(problem, with_objective)?;
        if let Some(reason) = model.infeasible {
            return Ok(SolveOutcome::without_schedule(
                SolveStatus::Infeasible,
                backend.name(),
                started,
                Some(reason),
            ));
        }
        let warm = greedy_schedule_from(problem, prefix);
        if let (Some(schedule), true) = (&warm, limits.feasibility_only) {
            return Ok(SolveOutcome {
                status: SolveStatus::Feasible,
                objective_value: problem.objective_value(&schedule.b),
                schedule: warm,
                gap: f64::INFINITY,
                wall_time_s: started.elapsed().as_secs_f64(),
                backend: format!("{}+greedy", backend.name()),
                diagnostic: None,
            });
        }
        let mut limits = limits.clone();
        if warm.is_none() && limits.feasibility_only {
            let budget = limits.time_limit_s * LNS_SHARE;
            if let Some(partial) = greedy::partial_schedule(problem, prefix) {
                let completed = lns::complete(backend, problem, partial, &limits, budget)?;
                if let Some(schedule) = completed.and_then(|b| greedy::finish(problem, b)) {
                    return Ok(SolveOutcome {
                        status: SolveStatus::Feasible,
                        objective_value: problem.objective_value(&schedule.b),
                        schedule: Some(schedule),
                        gap: f64::INFINITY,
                        wall_time_s: started.elapsed().as_secs_f64(),
                        backend: format!("{}+lns", backend.name()),
                        diagnostic: None,
                    });
                }
            }
            limits.time_limit_s = (limits.time_limit_s - started.elapsed().as_secs_f64()).max(1.0);
        }
        let start = warm.map(|s| model.point(&s.b, &s.z));
        let raw = backend.solve_milp(&model.milp, &limits, start.as_deref())?;
        let Some(x) = raw.x.as_deref() else {
            return Ok(SolveOutcome::without_schedule(
                raw.status,
                backend.name(),
                started,
                None,
            ));
        };
        let b = model.charge_matrix(x);
        let d = problem.evs.iter().map(|e| e.driving.clone()).collect();
        let z = model.keep_vector(x);
        (b, d, z, raw)
    } else {
        let mut milp = problem.milp();
        if !with_objective {
            milp.objective.clear();
        }
        let raw = backend.solve_milp(&milp, limits, None)?;
        let Some(x) = raw.x.as_deref() else {
            return Ok(SolveOutcome::without_schedule(
                raw.status,
                backend.name(),
                started,
                None,
            ));
        };
        let mut b = vec![vec![false; problem.slot_count()]; problem.ev_count()];
        let mut d = b.clone();
        let mut z = vec![];
        for (j, var) in milp.vars.iter().enumerate() {
            let on = x[j] > 0.5;
            match var.role {
                VarRole::Charge { ev, slot } => b[ev][slot] = on,
                VarRole::Drive { ev, slot } => d[ev][slot] = on,
                VarRole::Keep { .. } => z.push(on),
                _ => {}
            }
        }
        (b, d, z, raw)
    };
    let schedule = ChargingSchedule::from_decisions(problem, b, d, z);
    let report = check_schedule(&schedule, problem);
    if !report.is_feasible() {
        return Err(Error::Solver(format!(
            "{} returned a schedule that fails re-evaluation:\n{report}",
            backend.name()
        )));
    }
    let mut status = raw.status;
    if status == SolveStatus::Optimal && limits.feasibility_only {
        status = SolveStatus::Feasible;
    }
    Ok(SolveOutcome {
        status,
        objective_value: problem.objective_value(&schedule.b),
        schedule: Some(schedule),
        gap: if status == SolveStatus::Optimal {
            raw.gap.max(0.0)
        } else {
            raw.gap
        },
        wall_time_s: started.elapsed().as_secs_f64(),
        backend: backend.name().to_string(),
        diagnostic: None,
    })
}

/// Structured text dump of an outcome: status, objective, kept scenarios,
/// and a per-EV slot strip (`C` charging, `D` driving, `.` idle, `-` away).
pub fn dump_outcome(problem: &CoordinationProblem, outcome: &SolveOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status: {}", outcome.status);
    let _ = writeln!(s, "backend: {}", outcome.backend);
    let _ = writeln!(s, "objective: {}", outcome.objective_value);
    let _ = writeln!(s, "gap: {}", outcome.gap);
    if let Some(d) = &outcome.diagnostic {
        let _ = writeln!(s, "diagnostic: {d}");
    }
    let Some(sched) = &outcome.schedule else {
        return s;
    };
    if !sched.z.is_empty() {
        let kept: String = sched.z.iter().map(|k| if *k { '1' } else { '0' }).collect();
        let _ = writeln!(s, "z: {kept}");
    }
    let per_day = problem.grid.slots_per_day;
    for v in 0..problem.ev_count() {
        let _ = writeln!(
            s,
            "ev {v} ({}): {} charge slots",
            problem.evs[v].kind().label(),
            sched.charge_slots(v)
        );
        for day in crate::timegrid::Day::ALL {
            let strip: String = problem
                .grid
                .day_slots(day)
                .map(|t| {
                    if sched.b[v][t] {
                        'C'
                    } else if sched.d[v][t] {
                        'D'
                    } else if problem.evs[v].available[t] {
                        '.'
                    } else {
                        '-'
                    }
                })
                .collect();
            debug_assert_eq!(strip.len(), per_day);
            let _ = writeln!(s, "  {} {strip}", day.short_name());
        }
    }
    s
}
