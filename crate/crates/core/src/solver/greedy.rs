//! Constructive schedules used to warm-start the MIP backend.
//!
//! Each EV gets its cheapest charge row by dynamic programming over
//! (charged slots, current run length, starts today). Transformer coupling
//! is handled by negotiated congestion: EVs are routed one at a time, most
//! constrained first, and slots pushed over their rating become more
//! expensive until no slot is overfull. Energy bounds are the intersection
//! over every scenario, so the result keeps every scenario. A schedule is only returned after it passes
//! the independent checker.

use crate::model::compact::{ceiling_checkpoints, floor_checkpoints, ENERGY_TOL};
use crate::model::{CoordinationProblem, Formulation};
use crate::solver::check::check_schedule;
use crate::solver::ChargingSchedule;
use crate::timegrid::PriorityClass;

const NEGOTIATION_ROUNDS: usize = 25;
const PRICE_ROUNDS: usize = 14;
/// Rounds without less overflow before a negotiation gives up.
const STALE_ROUNDS: usize = 6;
const REPAIR_PASSES: usize = 4;

/// Cumulative charge-slot bounds of one EV at checkpoint slots.
fn energy_bounds(p: &CoordinationProblem, v: usize) -> Option<Vec<(i64, i64)>> {
    let nt = p.slot_count();
    let mut bounds = vec![(i64::MIN, i64::MAX); nt];
    let Some(block) = &p.energy else {
        return Some(bounds);
    };
    let e = p.slot_energy_kwh();
    let alpha = p.params.soc_floor_frac;
    let drive = &p.evs[v].driving;
    let mut driven = vec![0usize; nt];
    let mut dn = 0;
    for t in 0..nt {
        dn += drive[t] as usize;
        driven[t] = dn;
    }
    let floors = floor_checkpoints(drive);
    let ceilings = ceiling_checkpoints(drive);
    for s in &block.scenarios {
        let d = &s.evs[v];
        let depleted = |t: usize| d.delta_kwh_per_drive_slot * driven[t] as f64;
        let mut raise = |t: usize, kwh: f64| {
            let need = ((kwh - ENERGY_TOL) / e).ceil() as i64;
            bounds[t].0 = bounds[t].0.max(need);
        };
        for &t in &floors {
            raise(t, alpha * d.battery_kwh - d.soc_init_kwh + depleted(t));
        }
        if nt > 0 {
            raise(nt - 1, d.soc_final_kwh - d.soc_init_kwh + depleted(nt - 1));
        }
        for &t in &ceilings {
            let cap =
                ((d.battery_kwh - d.soc_init_kwh + depleted(t) + ENERGY_TOL) / e).floor() as i64;
            bounds[t].1 = bounds[t].1.min(cap);
        }
    }
    bounds.iter().all(|(lo, hi)| lo <= hi).then_some(bounds)
}

/// Cheapest charge row for one EV over the usable slots, or `None` when its
/// energy bounds cannot be met.
fn schedule_ev(
    p: &CoordinationProblem,
    v: usize,
    usable: &[bool],
    slot_cost: &[f64],
) -> Option<Vec<bool>> {
    let nt = p.slot_count();
    let bounds = energy_bounds(p, v)?;
    let ev = &p.evs[v];
    let (tc, smax) = if p.has_duration_switch {
        (p.params.min_charge_slots, p.params.max_daily_charge_starts)
    } else {
        (1, p.grid.slots_per_day)
    };
    let chargeable: Vec<bool> = (0..nt)
        .map(|t| ev.available[t] && !ev.driving[t] && usable[t])
        .collect();
    let total = chargeable.iter().filter(|c| **c).count();
    let cmax = bounds
        .iter()
        .filter(|(_, hi)| *hi != i64::MAX)
        .map(|(_, hi)| *hi)
        .max()
        .map_or(total, |hi| (hi.max(0) as usize).min(total));
    // The count never decreases, so the last ceiling caps the whole week.
    if bounds.iter().any(|(lo, _)| *lo > cmax as i64) {
        return None;
    }

    let nr = tc + 1;
    let ns = smax + 1;
    let idx = |c: usize, r: usize, s: usize| (c * nr + r) * ns + s;
    let states = (cmax + 1) * nr * ns;
    let mut cost = vec![f64::INFINITY; states];
    let mut next = vec![f64::INFINITY; states];
    let mut back = vec![u32::MAX; nt * states];
    cost[idx(0, 0, 0)] = 0.0;
    let per_day = p.grid.slots_per_day.max(1);
    let last_start = (nt - 1).checked_sub(tc);

    for t in 0..nt {
        next.fill(f64::INFINITY);
        let reset = t > 0 && t / per_day != (t - 1) / per_day;
        let bp = &mut back[t * states..(t + 1) * states];
        for c in 0..=cmax {
            for r in 0..nr {
                for s0 in 0..ns {
                    let here = cost[idx(c, r, s0)];
                    if !here.is_finite() {
                        continue;
                    }
                    let s = if reset { 0 } else { s0 };
                    let from = idx(c, r, s0) as u32;
                    // Idle: a run may only end once it is long enough.
                    if r == 0 || r == tc {
                        let k = idx(c, 0, s);
                        if here < next[k] {
                            next[k] = here;
                            bp[k] = from;
                        }
                    }
                    // Charge.
                    if chargeable[t] && c < cmax {
                        let starting = r == 0;
                        if starting && (s >= smax || last_start.is_none_or(|ls| t > ls)) {
                            continue;
                        }
                        let k = idx(c + 1, (r + 1).min(tc), s + starting as usize);
                        let value = here + slot_cost[t];
                        if value < next[k] {
                            next[k] = value;
                            bp[k] = from;
                        }
                    }
                }
            }
        }
        let (lo, hi) = bounds[t];
        if lo != i64::MIN || hi != i64::MAX {
            for c in 0..=cmax {
                if (c as i64) < lo || (c as i64) > hi {
                    for r in 0..nr {
                        for s in 0..ns {
                            next[idx(c, r, s)] = f64::INFINITY;
                        }
                    }
                }
            }
        }
        std::mem::swap(&mut cost, &mut next);
    }

    let mut best: Option<(f64, usize)> = None;
    for c in 0..=cmax {
        for r in [0, tc] {
            for s in 0..ns {
                let k = idx(c, r, s);
                if cost[k].is_finite() && best.is_none_or(|(b, _)| cost[k] < b) {
                    best = Some((cost[k], k));
                }
            }
        }
    }
    let (_, mut k) = best?;
    let mut row = vec![false; nt];
    for t in (0..nt).rev() {
        let prev = back[t * states + k] as usize;
        row[t] = k / (nr * ns) > prev / (nr * ns);
        k = prev;
    }
    Some(row)
}

/// Priority slack of a charge row: weighted P1 minus P2 and P2 minus P3.
fn priority_slack(p: &CoordinationProblem, v: usize, row: &[bool]) -> [f64; 2] {
    let ev = &p.evs[v];
    let mut sums = [0.0; 3];
    for (t, _) in row.iter().enumerate().filter(|(_, on)| **on) {
        match ev.class[t] {
            PriorityClass::P1 => sums[0] += ev.weight[t],
            PriorityClass::P2 => sums[1] += ev.weight[t],
            PriorityClass::P3 => sums[2] += ev.weight[t],
            PriorityClass::Neutral => {}
        }
    }
    [sums[0] - sums[1], sums[1] - sums[2]]
}

/// Charge row of one EV with the priority rows handled by Lagrangian price
/// adjustments on the classed slots. `lambda` carries the prices between
/// calls; the flag reports whether the priority rows hold.
fn schedule_ev_with_priority(
    p: &CoordinationProblem,
    v: usize,
    usable: &[bool],
    slot_cost: &[f64],
    lambda: &mut [f64; 2],
) -> Option<(Vec<bool>, bool)> {
    let ev = &p.evs[v];
    let priced = |lambda: &[f64; 2]| -> Vec<f64> {
        (0..p.slot_count())
            .map(|t| {
                let w = ev.weight[t];
                let shift = match ev.class[t] {
                    PriorityClass::P1 => -lambda[0] * w,
                    PriorityClass::P2 => (lambda[0] - lambda[1]) * w,
                    PriorityClass::P3 => lambda[1] * w,
                    PriorityClass::Neutral => 0.0,
                };
                slot_cost[t] + shift
            })
            .collect()
    };
    if !p.has_priority {
        return schedule_ev(p, v, usable, slot_cost).map(|row| (row, true));
    }
    let mut row = schedule_ev(p, v, usable, &priced(lambda))?;
    for _ in 0..PRICE_ROUNDS {
        let slack = priority_slack(p, v, &row);
        if slack.iter().all(|s| *s >= 0.0) {
            return Some((row, true));
        }
        for k in 0..2 {
            if slack[k] < 0.0 {
                lambda[k] = (lambda[k] * 2.0).max(1e-3);
            }
        }
        row = schedule_ev(p, v, usable, &priced(lambda))?;
    }
    let ok = priority_slack(p, v, &row).iter().all(|s| *s >= 0.0);
    Some((row, ok))
}

struct Loading {
    room: Vec<i64>,
    /// Household load as a fraction of the rating.
    base: Vec<f64>,
    /// Charger power as a fraction of the rating.
    step: f64,
}

impl Loading {
    fn new(p: &CoordinationProblem) -> Option<Self> {
        let nt = p.slot_count();
        let u = p.params.charge_power_kw;
        match &p.transformer {
            Some(case) => {
                let mut room = Vec::with_capacity(nt);
                for t in 0..nt {
                    let slack = case.rated_kva - case.household_load_kw[t];
                    if slack < -ENERGY_TOL {
                        return None;
                    }
                    room.push(((slack + ENERGY_TOL) / u).floor() as i64);
                }
                Some(Loading {
                    room,
                    base: case
                        .household_load_kw
                        .iter()
                        .map(|h| h / case.rated_kva)
                        .collect(),
                    step: u / case.rated_kva,
                })
            }
            None => Some(Loading {
                room: vec![p.ev_count() as i64; nt],
                base: vec![0.0; nt],
                step: 1.0 / p.ev_count().max(1) as f64,
            }),
        }
    }

    fn cost(
        &self,
        p: &CoordinationProblem,
        v: usize,
        used: &[i64],
        spread: f64,
        steer: f64,
    ) -> Vec<f64> {
        (0..used.len())
            .map(|t| {
                let load = self.base[t] + self.step * (used[t] + 1) as f64;
                1.0 + spread * load * load + steer * p.objective_coef(v, t)
            })
            .collect()
    }
}

pub(crate) fn finish(p: &CoordinationProblem, b: Vec<Vec<bool>>) -> Option<ChargingSchedule> {
    let d = p.evs.iter().map(|e| e.driving.clone()).collect();
    let z = match p.formulation {
        Formulation::Robust => vec![],
        Formulation::ChanceConstrained => vec![true; p.scenario_count()],
    };
    let schedule = ChargingSchedule::from_decisions(p, b, d, z);
    check_schedule(&schedule, p)
        .is_feasible()
        .then_some(schedule)
}

/// A checker-approved schedule that keeps every scenario, when one is found.
pub fn greedy_schedule(p: &CoordinationProblem) -> Option<ChargingSchedule> {
    greedy_schedule_from(p, &[])
}

/// Like [`greedy_schedule`], first trying to keep `prefix` as the rows of
/// the first EVs and routing only the remaining ones.
pub fn greedy_schedule_from(
    p: &CoordinationProblem,
    prefix: &[Vec<bool>],
) -> Option<ChargingSchedule> {
    if !p.driving_fixed {
        return None;
    }
    let nt = p.slot_count();
    let nv = p.ev_count();
    let loading = Loading::new(p)?;
    let room = &loading.room;

    if !prefix.is_empty() && prefix.len() < nv && prefix.iter().all(|r| r.len() == nt) {
        if let Some(s) = extend(p, &loading, prefix).and_then(|b| finish(p, b)) {
            return Some(s);
        }
    }

    let mut order: Vec<usize> = (0..nv).collect();
    let free = |v: usize| {
        (0..nt)
            .filter(|&t| p.evs[v].available[t] && !p.evs[v].driving[t])
            .count()
    };
    order.sort_by_key(|&v| (free(v), v));

    let usable: Vec<bool> = room.iter().map(|r| *r > 0).collect();
    // Spread load first, then fall back to pure tariff steering, which also
    // favours the priority classes.
    for (spread, steer) in [(1.0, 0.1), (0.0, 1.0)] {
        // Negotiated congestion: rows are rebuilt every round, overfull slots
        // get dearer both for the round and for every later round.
        let mut history = vec![0.0; nt];
        let mut pressure = 0.5;
        let mut lambda = vec![[0.0f64; 2]; nv];
        let mut best = i64::MAX;
        let mut best_rows = None;
        let mut stale = 0;
        for _ in 0..NEGOTIATION_ROUNDS {
            let mut used = vec![0i64; nt];
            let mut b = vec![vec![false; nt]; nv];
            let mut priorities_hold = true;
            for &v in &order {
                let mut cost = loading.cost(p, v, &used, spread, steer);
                for t in 0..nt {
                    cost[t] += history[t] + pressure * (used[t] + 1 - room[t]).max(0) as f64;
                }
                let (row, ok) = schedule_ev_with_priority(p, v, &usable, &cost, &mut lambda[v])?;
                priorities_hold &= ok;
                for t in 0..nt {
                    used[t] += row[t] as i64;
                }
                b[v] = row;
            }
            let mut overflow = 0;
            for t in 0..nt {
                let over = used[t] - room[t];
                if over > 0 {
                    overflow += over;
                    history[t] += 0.5 * over as f64;
                }
            }
            if overflow == 0 && priorities_hold {
                if let Some(s) = finish(p, b) {
                    return Some(s);
                }
                break;
            }
            if overflow < best {
                best = overflow;
                best_rows = Some((b, lambda.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= STALE_ROUNDS {
                    break;
                }
            }
            pressure *= 1.6;
        }
        if let Some((mut b, mut lambda)) = best_rows {
            if repair(p, &loading, &mut b, &mut lambda) {
                if let Some(s) = finish(p, b) {
                    return Some(s);
                }
            }
        }
    }
    None
}

/// Rip-up and reroute: EVs on overfull slots are rerouted one at a time
/// into the room the others leave, until nothing is overfull or a pass makes
/// no progress. Reports whether the rows now fit and keep their priorities.
fn repair(
    p: &CoordinationProblem,
    loading: &Loading,
    b: &mut [Vec<bool>],
    lambda: &mut [[f64; 2]],
) -> bool {
    let nt = p.slot_count();
    let room = &loading.room;
    let mut used = vec![0i64; nt];
    for row in b.iter() {
        for t in 0..nt {
            used[t] += row[t] as i64;
        }
    }
    let overflow = |used: &[i64]| (0..nt).map(|t| (used[t] - room[t]).max(0)).sum::<i64>();
    let mut current = overflow(&used);
    for _ in 0..REPAIR_PASSES {
        if current == 0 {
            break;
        }
        let mut touching: Vec<(usize, usize)> = (0..b.len())
            .map(|v| (v, (0..nt).filter(|&t| b[v][t] && used[t] > room[t]).count()))
            .filter(|(_, k)| *k > 0)
            .collect();
        touching.sort_by_key(|&(v, k)| (std::cmp::Reverse(k), v));
        for (v, _) in touching {
            if (0..nt).all(|t| !b[v][t] || used[t] <= room[t]) {
                continue;
            }
            for t in 0..nt {
                used[t] -= b[v][t] as i64;
            }
            let usable: Vec<bool> = (0..nt).map(|t| used[t] < room[t]).collect();
            let cost = loading.cost(p, v, &used, 1.0, 0.1);
            if let Some((row, true)) =
                schedule_ev_with_priority(p, v, &usable, &cost, &mut lambda[v])
            {
                b[v] = row;
            }
            for t in 0..nt {
                used[t] += b[v][t] as i64;
            }
        }
        let next = overflow(&used);
        if next >= current {
            current = next;
            break;
        }
        current = next;
    }
    current == 0 && (0..b.len()).all(|v| priority_slack(p, v, &b[v]).iter().all(|s| *s >= 0.0))
}

/// Keeps the prefix rows and routes the other EVs into the room left over.
fn extend(
    p: &CoordinationProblem,
    loading: &Loading,
    prefix: &[Vec<bool>],
) -> Option<Vec<Vec<bool>>> {
    let nt = p.slot_count();
    let mut used = vec![0i64; nt];
    for row in prefix {
        for t in 0..nt {
            used[t] += row[t] as i64;
        }
    }
    if (0..nt).any(|t| used[t] > loading.room[t]) {
        return None;
    }
    let mut b = prefix.to_vec();
    for v in prefix.len()..p.ev_count() {
        let usable: Vec<bool> = (0..nt).map(|t| used[t] < loading.room[t]).collect();
        let cost = loading.cost(p, v, &used, 1.0, 0.1);
        let (row, ok) = schedule_ev_with_priority(p, v, &usable, &cost, &mut [0.0; 2])?;
        if !ok {
            return None;
        }
        for t in 0..nt {
            used[t] += row[t] as i64;
        }
        b.push(row);
    }
    Some(b)
}

/// Rows that fit the transformer for as many EVs as possible: prefix rows
/// are kept while they fit, then each other EV takes the cheapest row in
/// the room left over. EVs that find no row get `None`.
pub(crate) fn partial_schedule(
    p: &CoordinationProblem,
    prefix: &[Vec<bool>],
) -> Option<Vec<Option<Vec<bool>>>> {
    let nt = p.slot_count();
    let loading = Loading::new(p)?;
    let mut used = vec![0i64; nt];
    let mut rows = vec![None; p.ev_count()];
    for v in 0..p.ev_count() {
        let row = match prefix.get(v).filter(|r| r.len() == nt) {
            Some(r) if (0..nt).all(|t| !r[t] || used[t] < loading.room[t]) => Some(r.clone()),
            _ => {
                let usable: Vec<bool> = (0..nt).map(|t| used[t] < loading.room[t]).collect();
                let cost = loading.cost(p, v, &used, 1.0, 0.1);
                schedule_ev_with_priority(p, v, &usable, &cost, &mut [0.0; 2])
                    .filter(|(_, ok)| *ok)
                    .map(|(r, _)| r)
            }
        };
        if let Some(r) = &row {
            for t in 0..nt {
                used[t] += r[t] as i64;
            }
        }
        rows[v] = row;
    }
    Some(rows)
}
