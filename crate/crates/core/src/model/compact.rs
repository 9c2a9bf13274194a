//! Reduced MILP equivalent to the full coordination model.
//!
//! With the driving pattern fixed, every `d` column is a constant and every
//! `b` column outside the EV's home window is zero. SoC is affine in the
//! cumulative charge count, so the trajectory columns are replaced by one
//! cumulative column per checkpoint slot:
//!
//! * SoC only falls while driving, so its minimum over the week is attained
//!   at slot 1 or at the last slot of a driving run.
//! * SoC only rises while parked, so its maximum is attained at slot 1, at
//!   the slot before a driving run, or at the final slot.
//!
//! Floor, ceiling, and demand rows are emitted only at those checkpoints,
//! divided through by the slot energy so right-hand sides become integral,
//! and each relaxed row gets its own smallest valid big-M. The session-start
//! tracker `f` is continuous here: for any binary `b` the value
//! `max(0, b[t] - b[t-1])` is feasible, so integrality is implied.

use crate::error::{Error, Result};
use crate::model::milp::{Milp, RowKind, Sense, VarKind, VarRole};
use crate::model::{CoordinationProblem, Formulation};
use crate::timegrid::{Day, PriorityClass};

/// Tolerance used when rounding energy thresholds to whole charge slots.
pub const ENERGY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct CompactModel {
    pub milp: Milp,
    /// `charge_cols[v][t]` is the column of `b[v,t]` when it is free.
    pub charge_cols: Vec<Vec<Option<usize>>>,
    pub start_cols: Vec<Vec<Option<usize>>>,
    /// Checkpoint slot and its cumulative-charge column, per EV.
    pub checkpoints: Vec<Vec<(usize, usize)>>,
    pub keep_cols: Vec<usize>,
    /// Set when a row is violated for every assignment.
    pub infeasible: Option<String>,
}

impl CompactModel {
    pub fn free_count(&self) -> usize {
        self.charge_cols
            .iter()
            .flatten()
            .filter(|c| c.is_some())
            .count()
    }

    /// Charge matrix encoded by a solution vector.
    pub fn charge_matrix(&self, x: &[f64]) -> Vec<Vec<bool>> {
        self.charge_cols
            .iter()
            .map(|row| row.iter().map(|c| c.is_some_and(|j| x[j] > 0.5)).collect())
            .collect()
    }

    pub fn keep_vector(&self, x: &[f64]) -> Vec<bool> {
        self.keep_cols.iter().map(|&j| x[j] > 0.5).collect()
    }

    /// Column vector for a charge matrix and keep vector.
    pub fn point(&self, b: &[Vec<bool>], z: &[bool]) -> Vec<f64> {
        let mut x = vec![0.0; self.milp.vars.len()];
        for (v, row) in self.charge_cols.iter().enumerate() {
            let mut count = 0.0;
            let mut cps = self.checkpoints[v].iter().peekable();
            for (t, col) in row.iter().enumerate() {
                let on = b[v][t] && col.is_some();
                if let Some(j) = col {
                    x[*j] = if on { 1.0 } else { 0.0 };
                }
                if on {
                    count += 1.0;
                }
                if let Some(j) = self.start_cols[v][t] {
                    let prev = t > 0 && b[v][t - 1] && row[t - 1].is_some();
                    x[j] = if on && !prev { 1.0 } else { 0.0 };
                }
                while let Some(&&(slot, j)) = cps.peek() {
                    if slot != t {
                        break;
                    }
                    x[j] = count;
                    cps.next();
                }
            }
        }
        for (xi, &j) in self.keep_cols.iter().enumerate() {
            x[j] = if z.get(xi).copied().unwrap_or(true) {
                1.0
            } else {
                0.0
            };
        }
        x
    }
}

struct Builder {
    m: Milp,
    charge: Vec<Vec<Option<usize>>>,
    start: Vec<Vec<Option<usize>>>,
    infeasible: Option<String>,
}

/// One row over `b`/`f` references; fixed-zero references are dropped.
enum Ref {
    B(usize, usize),
    F(usize, usize),
}

impl Builder {
    fn col(&self, r: &Ref) -> Option<usize> {
        match *r {
            Ref::B(v, t) => self.charge[v][t],
            Ref::F(v, t) => self.start[v][t],
        }
    }

    /// Adds a row over binary-bounded columns, skipping it when it holds for
    /// every point of the unit box and flagging it when it never holds.
    fn push(
        &mut self,
        kind: RowKind,
        tag: Vec<usize>,
        refs: &[(Ref, f64)],
        sense: Sense,
        rhs: f64,
    ) {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(refs.len());
        for (r, a) in refs {
            if let Some(j) = self.col(r) {
                if let Some(entry) = terms.iter_mut().find(|(k, _)| *k == j) {
                    entry.1 += a;
                } else {
                    terms.push((j, *a));
                }
            }
        }
        terms.retain(|(_, a)| *a != 0.0);
        let lo: f64 = terms.iter().map(|(_, a)| a.min(0.0)).sum();
        let hi: f64 = terms.iter().map(|(_, a)| a.max(0.0)).sum();
        let (always, never) = match sense {
            Sense::Le => (hi <= rhs + ENERGY_TOL, lo > rhs + ENERGY_TOL),
            Sense::Ge => (lo >= rhs - ENERGY_TOL, hi < rhs - ENERGY_TOL),
            Sense::Eq => (
                lo == hi && (lo - rhs).abs() <= ENERGY_TOL,
                rhs < lo - ENERGY_TOL || rhs > hi + ENERGY_TOL,
            ),
        };
        if never && self.infeasible.is_none() {
            let name = crate::model::milp::Row {
                kind,
                tag: tag.clone(),
                terms: vec![],
                sense,
                rhs,
            }
            .name();
            self.infeasible = Some(format!("constraint {name} cannot be satisfied"));
        }
        if !always {
            self.m.add_row(kind, tag, terms, sense, rhs);
        }
    }
}

/// Builds the reduced model; `with_objective = false` yields a pure
/// feasibility problem.
pub fn compact(p: &CoordinationProblem, with_objective: bool) -> Result<CompactModel> {
    if !p.driving_fixed {
        return Err(Error::config(
            "the reduced model needs a fixed driving pattern; use the full MILP instead",
        ));
    }
    let nv = p.ev_count();
    let nt = p.slot_count();
    let t_max = nt - 1;
    let mut b = Builder {
        m: Milp::default(),
        charge: vec![vec![None; nt]; nv],
        start: vec![vec![None; nt]; nv],
        infeasible: None,
    };

    for v in 0..nv {
        let ev = &p.evs[v];
        for t in 0..nt {
            if ev.available[t] && !ev.driving[t] {
                b.charge[v][t] = Some(b.m.add_var(
                    VarRole::Charge { ev: v, slot: t },
                    VarKind::Binary,
                    0.0,
                    1.0,
                ));
            }
        }
    }
    if p.has_duration_switch {
        for v in 0..nv {
            for t in 0..nt {
                if b.charge[v][t].is_some() {
                    b.start[v][t] = Some(b.m.add_var(
                        VarRole::Start { ev: v, slot: t },
                        VarKind::Continuous,
                        0.0,
                        1.0,
                    ));
                }
            }
        }
    }

    if with_objective && p.has_objective {
        for v in 0..nv {
            for t in 0..nt {
                if let Some(j) = b.charge[v][t] {
                    b.m.objective.push((j, p.objective_coef(v, t)));
                }
            }
        }
    }

    if p.has_priority {
        for v in 0..nv {
            let ev = &p.evs[v];
            for (k, (hi, lo)) in [
                (PriorityClass::P1, PriorityClass::P2),
                (PriorityClass::P2, PriorityClass::P3),
            ]
            .into_iter()
            .enumerate()
            {
                let refs: Vec<(Ref, f64)> = (0..nt)
                    .filter_map(|t| {
                        if ev.class[t] == hi {
                            Some((Ref::B(v, t), ev.weight[t]))
                        } else if ev.class[t] == lo {
                            Some((Ref::B(v, t), -ev.weight[t]))
                        } else {
                            None
                        }
                    })
                    .collect();
                b.push(RowKind::Priority, vec![v, k], &refs, Sense::Ge, 0.0);
            }
        }
    }

    if let Some(case) = &p.transformer {
        let u = p.params.charge_power_kw;
        for t in 0..nt {
            let room = case.rated_kva - case.household_load_kw[t];
            if room < -ENERGY_TOL {
                if b.infeasible.is_none() {
                    b.infeasible = Some(format!(
                        "household load {:.3} kW exceeds the {:.3} kVA rating at slot {t}",
                        case.household_load_kw[t], case.rated_kva
                    ));
                }
                continue;
            }
            let cap = ((room + ENERGY_TOL) / u).floor();
            let refs: Vec<(Ref, f64)> = (0..nv).map(|v| (Ref::B(v, t), 1.0)).collect();
            b.push(RowKind::Transformer, vec![t], &refs, Sense::Le, cap);
        }
    }

    if p.has_duration_switch {
        let tc = p.params.min_charge_slots;
        let td = p.params.min_drive_slots;
        for v in 0..nv {
            if t_max + 1 >= tc {
                for t in 0..=(t_max + 1 - tc) {
                    if b.charge[v][t].is_none() {
                        continue;
                    }
                    for i in 1..tc {
                        let mut refs = vec![(Ref::B(v, t), 1.0), (Ref::B(v, t + i), -1.0)];
                        if t > 0 {
                            refs.push((Ref::B(v, t - 1), -1.0));
                        }
                        b.push(RowKind::MinChargeRun, vec![v, t, i], &refs, Sense::Le, 0.0);
                    }
                }
            }
            for t in t_max.saturating_sub(tc)..t_max {
                let refs = [(Ref::B(v, t + 1), 1.0), (Ref::B(v, t), -1.0)];
                b.push(RowKind::EndOfWeek, vec![v, t], &refs, Sense::Le, 0.0);
            }
            let drive = &p.evs[v].driving;
            if let Some(t) = short_run(drive, td) {
                b.infeasible
                    .get_or_insert(format!("EV {v} drives fewer than {td} slots from slot {t}"));
            }
            for day in Day::ALL.into_iter().filter(|d| d.is_weekday()) {
                let n = p.grid.day_slots(day).filter(|&t| drive[t]).count();
                if n > p.params.max_daily_drive_slots {
                    b.infeasible.get_or_insert(format!(
                        "EV {v} drives {n} slots on {day}, above the daily limit"
                    ));
                }
            }
            for t in 0..nt {
                if b.start[v][t].is_none() {
                    continue;
                }
                let mut refs = vec![(Ref::F(v, t), 1.0), (Ref::B(v, t), -1.0)];
                if t > 0 {
                    refs.push((Ref::B(v, t - 1), 1.0));
                }
                b.push(RowKind::StartTracking, vec![v, t], &refs, Sense::Ge, 0.0);
            }
            for day in Day::ALL {
                let refs: Vec<(Ref, f64)> =
                    p.grid.day_slots(day).map(|t| (Ref::F(v, t), 1.0)).collect();
                b.push(
                    RowKind::DailyStarts,
                    vec![v, day.index()],
                    &refs,
                    Sense::Le,
                    p.params.max_daily_charge_starts as f64,
                );
            }
        }
    }

    let mut checkpoints = vec![Vec::new(); nv];
    let mut keep_cols = Vec::new();
    if let Some(block) = &p.energy {
        let relaxed = p.formulation == Formulation::ChanceConstrained;
        if relaxed {
            for xi in 0..block.scenarios.len() {
                keep_cols.push(b.m.add_var(
                    VarRole::Keep { scenario: xi },
                    VarKind::Binary,
                    0.0,
                    1.0,
                ));
            }
            let terms = keep_cols.iter().map(|&j| (j, 1.0)).collect();
            b.m.add_row(
                RowKind::Cardinality,
                vec![],
                terms,
                Sense::Ge,
                p.required_scenarios() as f64,
            );
        }
        let e = p.slot_energy_kwh();
        let alpha = p.params.soc_floor_frac;
        for v in 0..nv {
            let drive = &p.evs[v].driving;
            let floors = floor_checkpoints(drive);
            let ceilings = ceiling_checkpoints(drive);
            let mut slots: Vec<usize> = floors
                .iter()
                .chain(&ceilings)
                .copied()
                .chain([t_max])
                .collect();
            slots.sort_unstable();
            slots.dedup();
            // Prefix counts of driving and free slots.
            let mut driven = vec![0usize; nt];
            let mut free = vec![0usize; nt];
            let (mut dn, mut fr) = (0, 0);
            for t in 0..nt {
                dn += drive[t] as usize;
                fr += b.charge[v][t].is_some() as usize;
                driven[t] = dn;
                free[t] = fr;
            }
            let mut prev: Option<(usize, usize)> = None;
            for &s in &slots {
                let c = b.m.add_var(
                    VarRole::Charged { ev: v, slot: s },
                    VarKind::Continuous,
                    0.0,
                    free[s] as f64,
                );
                let lo = prev.map_or(0, |(ps, _)| ps + 1);
                let mut terms = vec![(c, 1.0)];
                if let Some((_, pc)) = prev {
                    terms.push((pc, -1.0));
                }
                terms.extend((lo..=s).filter_map(|t| b.charge[v][t]).map(|j| (j, -1.0)));
                b.m.add_row(RowKind::Cumulative, vec![v, s], terms, Sense::Eq, 0.0);
                checkpoints[v].push((s, c));
                prev = Some((s, c));
            }
            let col_at = |s: usize| {
                checkpoints[v]
                    .iter()
                    .find(|(t, _)| *t == s)
                    .map(|(_, c)| *c)
                    .unwrap()
            };

            // Ceiling thresholds in slots, shared across scenarios for big-M.
            let ceil_slots = |t: usize, xi: usize| -> f64 {
                let d = &block.scenarios[xi].evs[v];
                let room =
                    d.battery_kwh - d.soc_init_kwh + d.delta_kwh_per_drive_slot * driven[t] as f64;
                ((room + ENERGY_TOL) / e).floor()
            };
            for (xi, s) in block.scenarios.iter().enumerate() {
                let d = &s.evs[v];
                let delta = d.delta_kwh_per_drive_slot;
                let lower = |kind: RowKind, t: usize, need_kwh: f64, b: &mut Builder| {
                    let need = ((need_kwh - ENERGY_TOL) / e).ceil();
                    if need <= 0.0 {
                        return;
                    }
                    let c = col_at(t);
                    if relaxed {
                        b.m.add_row(
                            kind,
                            vec![v, t, xi],
                            vec![(c, 1.0), (keep_cols[xi], -need)],
                            Sense::Ge,
                            0.0,
                        );
                    } else {
                        if need > free[t] as f64 {
                            b.infeasible.get_or_insert(format!(
                                "EV {v} needs {need} charge slots by slot {t} but only {} are available",
                                free[t]
                            ));
                        }
                        b.m.add_row(kind, vec![v, t, xi], vec![(c, 1.0)], Sense::Ge, need);
                    }
                };
                for &t in &floors {
                    let need = alpha * d.battery_kwh - d.soc_init_kwh + delta * driven[t] as f64;
                    lower(RowKind::SocFloor, t, need, &mut b);
                }
                let need = d.soc_final_kwh - d.soc_init_kwh + delta * driven[t_max] as f64;
                lower(RowKind::Demand, t_max, need, &mut b);

                for &t in &ceilings {
                    let cap = ceil_slots(t, xi);
                    let c = col_at(t);
                    if relaxed {
                        let widest = (0..block.scenarios.len())
                            .map(|k| ceil_slots(t, k))
                            .fold(f64::MIN, f64::max);
                        let big_m = widest.min(free[t] as f64) - cap;
                        if big_m > 0.0 {
                            b.m.add_row(
                                RowKind::SocCeiling,
                                vec![v, t, xi],
                                vec![(c, 1.0), (keep_cols[xi], big_m)],
                                Sense::Le,
                                cap + big_m,
                            );
                        }
                    } else if (free[t] as f64) > cap {
                        if cap < 0.0 {
                            b.infeasible
                                .get_or_insert(format!("EV {v} exceeds its battery at slot {t}"));
                        }
                        b.m.add_row(
                            RowKind::SocCeiling,
                            vec![v, t, xi],
                            vec![(c, 1.0)],
                            Sense::Le,
                            cap,
                        );
                    }
                }
            }
        }
    }

    Ok(CompactModel {
        milp: b.m,
        charge_cols: b.charge,
        start_cols: b.start,
        checkpoints,
        keep_cols,
        infeasible: b.infeasible,
    })
}

/// Slots where SoC can reach a weekly minimum.
pub fn floor_checkpoints(drive: &[bool]) -> Vec<usize> {
    let n = drive.len();
    if n < 2 {
        return vec![];
    }
    let mut out = vec![1];
    out.extend((1..n).filter(|&t| drive[t] && (t + 1 == n || !drive[t + 1])));
    out.dedup();
    out
}

/// Slots where SoC can reach a weekly maximum.
pub fn ceiling_checkpoints(drive: &[bool]) -> Vec<usize> {
    let n = drive.len();
    if n < 2 {
        return vec![];
    }
    let mut out = vec![1];
    out.extend((1..n).filter(|&t| !drive[t] && (t + 1 == n || drive[t + 1])));
    out.dedup();
    out
}

/// First slot of a driving run shorter than `len`, ignoring a run cut off by
/// the end of the week.
fn short_run(drive: &[bool], len: usize) -> Option<usize> {
    let mut t = 0;
    while t < drive.len() {
        if drive[t] {
            let start = t;
            while t < drive.len() && drive[t] {
                t += 1;
            }
            if t - start < len && t < drive.len() {
                return Some(start);
            }
        } else {
            t += 1;
        }
    }
    None
}
