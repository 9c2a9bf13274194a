//! Completes a partial schedule by re-solving small neighbourhoods.
//!
//! Starting from rows that fit the transformer for some of the EVs, each
//! unplaced EV is solved together with a few placed EVs while every other
//! row stays fixed as extra household load. The sub-problems are small
//! enough for the backend to settle in a fraction of a second, and every
//! accepted step keeps the placed rows feasible.

use std::time::Instant;

use crate::error::Result;
use crate::model::compact::compact;
use crate::model::{CoordinationProblem, EnergyBlock, Formulation};
use crate::solver::greedy::partial_schedule;
use crate::solver::{MipBackend, SolveLimits};

/// Neighbour counts tried in turn for one unplaced EV.
const NEIGHBOURS: [usize; 5] = [2, 3, 5, 7, 9];

/// Fixes every EV outside `free` and keeps the free ones as decisions.
fn subproblem(
    p: &CoordinationProblem,
    rows: &[Option<Vec<bool>>],
    free: &[usize],
) -> CoordinationProblem {
    let mut sub = p.clone();
    sub.evs = free.iter().map(|&v| p.evs[v].clone()).collect();
    if let Some(block) = &p.energy {
        sub.energy = Some(EnergyBlock {
            scenarios: block
                .scenarios
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.evs = free.iter().map(|&v| s.evs[v]).collect();
                    s
                })
                .collect(),
            ..block.clone()
        });
    }
    if let Some(case) = sub.transformer.as_mut() {
        let u = p.params.charge_power_kw;
        for (v, row) in rows.iter().enumerate() {
            if free.contains(&v) {
                continue;
            }
            if let Some(row) = row {
                for (h, on) in case.household_load_kw.iter_mut().zip(row) {
                    if *on {
                        *h += u;
                    }
                }
            }
        }
    }
    sub
}

/// Placed EVs holding the most priority weight, as the target values it, in
/// full slots the target could use.
fn neighbours(
    p: &CoordinationProblem,
    rows: &[Option<Vec<bool>>],
    target: usize,
    k: usize,
) -> Vec<usize> {
    let nt = p.slot_count();
    let Some(case) = &p.transformer else {
        return vec![];
    };
    let u = p.params.charge_power_kw;
    let mut used = vec![0usize; nt];
    for row in rows.iter().flatten() {
        for t in 0..nt {
            used[t] += row[t] as usize;
        }
    }
    let full: Vec<bool> = (0..nt)
        .map(|t| {
            let room = ((case.rated_kva - case.household_load_kw[t] + 1e-6) / u)
                .floor()
                .max(0.0) as usize;
            used[t] >= room
        })
        .collect();
    let ev = &p.evs[target];
    let wanted: Vec<bool> = (0..nt)
        .map(|t| full[t] && ev.available[t] && !ev.driving[t])
        .collect();
    let mut scored: Vec<(usize, usize)> = rows
        .iter()
        .enumerate()
        .filter_map(|(v, r)| {
            r.as_ref().map(|r| {
                let score: f64 = (0..nt)
                    .filter(|&t| r[t] && wanted[t])
                    .map(|t| ev.weight[t])
                    .sum();
                (v, score.round() as usize)
            })
        })
        .collect();
    scored.sort_by_key(|&(v, score)| (std::cmp::Reverse(score), v));
    scored.into_iter().take(k).map(|(v, _)| v).collect()
}

/// Tries to give every EV a row within `budget_s` seconds. Only the robust
/// formulation is handled: its scenario set is shared by every EV, so
/// sub-problems cannot disagree about which scenarios are kept.
pub(crate) fn complete(
    backend: &dyn MipBackend,
    p: &CoordinationProblem,
    mut rows: Vec<Option<Vec<bool>>>,
    limits: &SolveLimits,
    budget_s: f64,
) -> Result<Option<Vec<Vec<bool>>>> {
    if p.formulation != Formulation::Robust || !p.driving_fixed || rows.len() != p.ev_count() {
        return Ok(None);
    }
    let started = Instant::now();
    while let Some(target) = rows.iter().position(Option::is_none) {
        let mut placed = false;
        for &k in &NEIGHBOURS {
            let left = budget_s - started.elapsed().as_secs_f64();
            if left <= 0.0 {
                return Ok(None);
            }
            let mut free = neighbours(p, &rows, target, k);
            free.push(target);
            free.sort_unstable();
            let sub = subproblem(p, &rows, &free);
            let quick = partial_schedule(&sub, &[])
                .and_then(|rows| rows.into_iter().collect::<Option<Vec<_>>>());
            let solved = match quick {
                Some(b) => Some(b),
                None => {
                    let model = compact(&sub, false)?;
                    if model.infeasible.is_some() {
                        None
                    } else {
                        let sub_limits = SolveLimits {
                            time_limit_s: left.min(limits.time_limit_s / 4.0).max(0.1),
                            feasibility_only: true,
                            ..limits.clone()
                        };
                        let raw = backend.solve_milp(&model.milp, &sub_limits, None)?;
                        raw.x.map(|x| model.charge_matrix(&x))
                    }
                }
            };
            if let Some(b) = solved {
                for (row, &v) in b.into_iter().zip(&free) {
                    rows[v] = Some(row);
                }
                placed = true;
                break;
            }
            if k + 1 >= rows.len() {
                break;
            }
        }
        if !placed {
            return Ok(None);
        }
    }
    Ok(Some(rows.into_iter().flatten().collect()))
}
