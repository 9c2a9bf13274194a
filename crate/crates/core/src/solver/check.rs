//! Independent arithmetic re-evaluation of a schedule against a problem.
//!
//! Nothing here reads the MILP rows; every family is recomputed from the
//! schedule matrices, the EV profiles, and the scenario draws.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{CoordinationProblem, Formulation, RowKind};
use crate::solver::ChargingSchedule;
use crate::timegrid::{Day, PriorityClass};

pub const CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: RowKind,
    pub ev: Option<usize>,
    pub slot: Option<usize>,
    pub scenario: Option<usize>,
    /// How far the constraint is from holding (always positive).
    pub shortfall: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.family)?;
        if let Some(v) = self.ev {
            write!(f, " ev={v}")?;
        }
        if let Some(t) = self.slot {
            write!(f, " slot={t}")?;
        }
        if let Some(x) = self.scenario {
            write!(f, " scenario={x}")?;
        }
        write!(f, " short by {:.6}: {}", self.shortfall, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn families(&self) -> Vec<RowKind> {
        let mut out: Vec<RowKind> = self.violations.iter().map(|v| v.family).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn has(&self, family: RowKind) -> bool {
        self.violations.iter().any(|v| v.family == family)
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "no violations");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Report<'a> {
    out: &'a mut Vec<Violation>,
}

impl Report<'_> {
    fn push(
        &mut self,
        family: RowKind,
        ev: Option<usize>,
        slot: Option<usize>,
        scenario: Option<usize>,
        shortfall: f64,
        detail: impl Into<String>,
    ) {
        self.out.push(Violation {
            family,
            ev,
            slot,
            scenario,
            shortfall,
            detail: detail.into(),
        });
    }
}

/// Maximal runs of `true` as `(start, end_exclusive)`.
pub fn runs(row: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut t = 0;
    while t < row.len() {
        if row[t] {
            let s = t;
            while t < row.len() && row[t] {
                t += 1;
            }
            out.push((s, t));
        } else {
            t += 1;
        }
    }
    out
}

/// Lists every violated constraint of `schedule` in `problem`.
pub fn check_schedule(
    schedule: &ChargingSchedule,
    problem: &CoordinationProblem,
) -> ViolationReport {
    let mut out = Vec::new();
    let mut r = Report { out: &mut out };
    let nv = problem.ev_count();
    let nt = problem.slot_count();
    let dims_ok = schedule.b.len() == nv
        && schedule.d.len() == nv
        && schedule
            .b
            .iter()
            .chain(&schedule.d)
            .all(|row| row.len() == nt);
    if !dims_ok {
        r.push(
            RowKind::DrivingPattern,
            None,
            None,
            None,
            f64::INFINITY,
            format!("schedule shape does not match {nv} EVs x {nt} slots"),
        );
        return ViolationReport { violations: out };
    }

    for (v, ev) in problem.evs.iter().enumerate() {
        let (b, d) = (&schedule.b[v], &schedule.d[v]);
        for t in 0..nt {
            if b[t] && !ev.available[t] {
                r.push(
                    RowKind::ChargeDriveExclusive,
                    Some(v),
                    Some(t),
                    None,
                    1.0,
                    "charging while away from home",
                );
            }
            if d[t] && !ev.driving[t] {
                r.push(
                    RowKind::DrivingPattern,
                    Some(v),
                    Some(t),
                    None,
                    1.0,
                    "driving outside commute windows",
                );
            }
            if problem.driving_fixed {
                if ev.driving[t] && !d[t] {
                    r.push(
                        RowKind::DrivingPattern,
                        Some(v),
                        Some(t),
                        None,
                        1.0,
                        "commute slot not driven",
                    );
                }
                if b[t] && d[t] {
                    r.push(
                        RowKind::ChargeDriveExclusive,
                        Some(v),
                        Some(t),
                        None,
                        1.0,
                        "charging while driving",
                    );
                }
            }
        }

        if problem.has_priority {
            let sum = |class: PriorityClass| -> f64 {
                (0..nt)
                    .filter(|&t| b[t] && ev.class[t] == class)
                    .map(|t| ev.weight[t])
                    .sum()
            };
            let (p1, p2, p3) = (
                sum(PriorityClass::P1),
                sum(PriorityClass::P2),
                sum(PriorityClass::P3),
            );
            if p1 < p2 - CHECK_TOL {
                r.push(
                    RowKind::Priority,
                    Some(v),
                    None,
                    None,
                    p2 - p1,
                    format!("P1 weight {p1} below P2 weight {p2}"),
                );
            }
            if p2 < p3 - CHECK_TOL {
                r.push(
                    RowKind::Priority,
                    Some(v),
                    None,
                    None,
                    p3 - p2,
                    format!("P2 weight {p2} below P3 weight {p3}"),
                );
            }
        }

        if problem.has_duration_switch {
            let p = &problem.params;
            let t_max = nt - 1;
            for (s, e) in runs(b) {
                if e - s < p.min_charge_slots {
                    r.push(
                        RowKind::MinChargeRun,
                        Some(v),
                        Some(s),
                        None,
                        (p.min_charge_slots - (e - s)) as f64,
                        format!("charging run of {} slots", e - s),
                    );
                } else if s + p.min_charge_slots > t_max {
                    r.push(
                        RowKind::EndOfWeek,
                        Some(v),
                        Some(s),
                        None,
                        1.0,
                        "session starts in the closing slots",
                    );
                }
            }
            for (s, e) in runs(d) {
                if e - s < p.min_drive_slots && e < nt {
                    r.push(
                        RowKind::MinDriveRun,
                        Some(v),
                        Some(s),
                        None,
                        (p.min_drive_slots - (e - s)) as f64,
                        format!("driving run of {} slots", e - s),
                    );
                }
            }
            for day in Day::ALL {
                let slots = problem.grid.day_slots(day);
                if day.is_weekday() {
                    let n = slots.clone().filter(|&t| d[t]).count();
                    if n > p.max_daily_drive_slots {
                        r.push(
                            RowKind::DailyDriving,
                            Some(v),
                            Some(slots.start),
                            None,
                            (n - p.max_daily_drive_slots) as f64,
                            format!("{n} driving slots on {day}"),
                        );
                    }
                }
                let starts = slots
                    .clone()
                    .filter(|&t| b[t] && (t == 0 || !b[t - 1]))
                    .count();
                if starts > p.max_daily_charge_starts {
                    r.push(
                        RowKind::DailyStarts,
                        Some(v),
                        Some(slots.start),
                        None,
                        (starts - p.max_daily_charge_starts) as f64,
                        format!("{starts} charging starts on {day}"),
                    );
                }
            }
        }
    }

    if let Some(case) = &problem.transformer {
        let u = problem.params.charge_power_kw;
        for t in 0..nt {
            let charging = (0..nv).filter(|&v| schedule.b[v][t]).count() as f64;
            let load = charging * u + case.household_load_kw[t];
            if load > case.rated_kva + CHECK_TOL {
                r.push(
                    RowKind::Transformer,
                    None,
                    Some(t),
                    None,
                    load - case.rated_kva,
                    format!("{load:.3} kW on a {:.3} kVA transformer", case.rated_kva),
                );
            }
        }
    }

    if let Some(block) = &problem.energy {
        let count = block.scenarios.len();
        let cc = problem.formulation == Formulation::ChanceConstrained;
        let keep: Vec<bool> = if cc {
            if schedule.z.len() != count {
                r.push(
                    RowKind::Cardinality,
                    None,
                    None,
                    None,
                    f64::INFINITY,
                    "keep vector has the wrong length",
                );
                return ViolationReport { violations: out };
            }
            schedule.z.clone()
        } else {
            vec![true; count]
        };
        if cc {
            let kept = keep.iter().filter(|k| **k).count() as f64;
            let need = (1.0 - block.epsilon) * count as f64;
            if kept < need - 1e-9 {
                r.push(
                    RowKind::Cardinality,
                    None,
                    None,
                    None,
                    need - kept,
                    format!("{kept} of {count} scenarios kept, need {need}"),
                );
            }
        }
        let e = problem.slot_energy_kwh();
        for (xi, s) in block
            .scenarios
            .iter()
            .enumerate()
            .filter(|(xi, _)| keep[*xi])
        {
            for v in 0..nv {
                let draw = &s.evs[v];
                let floor = problem.params.soc_floor_frac * draw.battery_kwh;
                let mut soc = draw.soc_init_kwh;
                let mut worst_floor: Option<(usize, f64)> = None;
                let mut worst_ceil: Option<(usize, f64)> = None;
                for t in 0..nt {
                    if schedule.b[v][t] {
                        soc += e;
                    }
                    if schedule.d[v][t] {
                        soc -= draw.delta_kwh_per_drive_slot;
                    }
                    if t == 0 {
                        continue;
                    }
                    if soc < floor - CHECK_TOL && worst_floor.is_none_or(|(_, s)| soc < s) {
                        worst_floor = Some((t, soc));
                    }
                    if soc > draw.battery_kwh + CHECK_TOL && worst_ceil.is_none_or(|(_, s)| soc > s)
                    {
                        worst_ceil = Some((t, soc));
                    }
                }
                if let Some((t, s)) = worst_floor {
                    r.push(
                        RowKind::SocFloor,
                        Some(v),
                        Some(t),
                        Some(xi),
                        floor - s,
                        format!("SoC {s:.3} kWh below {floor:.3}"),
                    );
                }
                if let Some((t, s)) = worst_ceil {
                    r.push(
                        RowKind::SocCeiling,
                        Some(v),
                        Some(t),
                        Some(xi),
                        s - draw.battery_kwh,
                        format!("SoC {s:.3} kWh above {:.3}", draw.battery_kwh),
                    );
                }
                if soc < draw.soc_final_kwh - CHECK_TOL {
                    r.push(
                        RowKind::Demand,
                        Some(v),
                        None,
                        Some(xi),
                        draw.soc_final_kwh - soc,
                        format!("week ends at {soc:.3} kWh, need {:.3}", draw.soc_final_kwh),
                    );
                }
            }
        }
    }
    ViolationReport { violations: out }
}

/// Whether scenario `xi` is met by the charge and drive matrices.
pub fn scenario_satisfied(
    problem: &CoordinationProblem,
    b: &[Vec<bool>],
    d: &[Vec<bool>],
    xi: usize,
) -> bool {
    let s = &problem.scenarios()[xi];
    let e = problem.slot_energy_kwh();
    (0..problem.ev_count()).all(|v| {
        let draw = &s.evs[v];
        let floor = problem.params.soc_floor_frac * draw.battery_kwh;
        let mut soc = draw.soc_init_kwh;
        for t in 0..problem.slot_count() {
            if b[v][t] {
                soc += e;
            }
            if d[v][t] {
                soc -= draw.delta_kwh_per_drive_slot;
            }
            if t > 0 && (soc < floor - CHECK_TOL || soc > draw.battery_kwh + CHECK_TOL) {
                return false;
            }
        }
        soc >= draw.soc_final_kwh - CHECK_TOL
    })
}
