//! Exhaustive enumeration over the free charging decisions.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{CoordinationProblem, Formulation};
use crate::solver::check::{check_schedule, scenario_satisfied};
use crate::solver::{ChargingSchedule, SolveOutcome, SolveStatus};

/// Largest number of free binary charge decisions the oracle will enumerate.
pub const ORACLE_GUARD: usize = 24;

/// Exact optimum by enumerating every assignment of the free `b` columns.
///
/// The driving pattern must be fixed. For the chance-constrained
/// formulation each scenario is kept exactly when the schedule meets it,
/// which is the best possible choice of `z` for any charge matrix.
pub fn oracle_enumerate(problem: &CoordinationProblem) -> Result<SolveOutcome> {
    let started = Instant::now();
    if !problem.driving_fixed {
        return Err(Error::OracleGuard(
            "enumeration needs a fixed driving pattern".into(),
        ));
    }
    let free: Vec<(usize, usize)> = problem
        .evs
        .iter()
        .enumerate()
        .flat_map(|(v, ev)| {
            (0..problem.slot_count())
                .filter(move |&t| ev.available[t] && !ev.driving[t])
                .map(move |t| (v, t))
        })
        .collect();
    if free.len() > ORACLE_GUARD {
        return Err(Error::OracleGuard(format!(
            "{} free charging decisions exceed the enumeration guard of {ORACLE_GUARD}",
            free.len()
        )));
    }
    let d: Vec<Vec<bool>> = problem.evs.iter().map(|e| e.driving.clone()).collect();
    let cc = problem.formulation == Formulation::ChanceConstrained && problem.energy.is_some();
    let mut best: Option<(f64, ChargingSchedule)> = None;
    let mut b = vec![vec![false; problem.slot_count()]; problem.ev_count()];
    for mask in 0u64..(1u64 << free.len()) {
        for (k, &(v, t)) in free.iter().enumerate() {
            b[v][t] = mask >> k & 1 == 1;
        }
        let objective = if problem.has_objective {
            problem.objective_value(&b)
        } else {
            0.0
        };
        if best.as_ref().is_some_and(|(o, _)| *o <= objective) {
            continue;
        }
        let z = if cc {
            (0..problem.scenario_count())
                .map(|xi| scenario_satisfied(problem, &b, &d, xi))
                .collect()
        } else {
            vec![]
        };
        let schedule = ChargingSchedule::from_decisions(problem, b.clone(), d.clone(), z);
        if check_schedule(&schedule, problem).is_feasible() {
            best = Some((objective, schedule));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    Ok(match best {
        Some((objective, schedule)) => SolveOutcome {
            status: SolveStatus::Optimal,
            schedule: Some(schedule),
            objective_value: objective,
            gap: 0.0,
            wall_time_s: elapsed,
            backend: "enumerate".into(),
            diagnostic: None,
        },
        None => SolveOutcome {
            status: SolveStatus::Infeasible,
            schedule: None,
            objective_value: f64::NAN,
            gap: f64::INFINITY,
            wall_time_s: elapsed,
            backend: "enumerate".into(),
            diagnostic: None,
        },
    })
}
