#![allow(dead_code)]

use std::sync::Arc;

use evhc::model::{
    assemble, CoordinationProblem, EvProfile, Formulation, ModelParams, ProblemInputs,
    TransformerCase,
};
use evhc::scenario::{EvDraw, Scenario, UncertaintyConfig};
use evhc::timegrid::{PriorityWeights, PvWindowConfig, TariffConfig, TimeGrid, WorkArrangement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hourly weekly grid used by the enumeration instances.
pub fn hourly_grid() -> Arc<TimeGrid> {
    Arc::new(
        TimeGrid::with_resolution(24, &TariffConfig::default(), &PvWindowConfig::default())
            .unwrap(),
    )
}

/// A single-EV, single-scenario instance with at most `max_free` free
/// charging slots on the hourly grid.
///
/// Availability is a few random windows, driving is one block, the
/// transformer blocks a random subset of hours, and the priority classes
/// come from a random arrangement. Many instances are feasible and some
/// are not; both kinds are useful.
pub fn mini_instance(seed: u64, max_free: usize) -> CoordinationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = hourly_grid();
    let nt = grid.slot_count();
    let arrangement = match rng.random_range(0..3) {
        0 => WorkArrangement::in_person(),
        1 => WorkArrangement::hybrid([evhc::timegrid::Day::Mon]),
        _ => WorkArrangement::remote(),
    };
    let mut ev = EvProfile::new(&grid, &arrangement, &PriorityWeights::default()).unwrap();

    let drive_len = rng.random_range(1..=2);
    let drive_start = rng.random_range(24..nt - 24);
    ev.driving = vec![false; nt];
    for t in drive_start..drive_start + drive_len {
        ev.driving[t] = true;
    }
    ev.available = vec![false; nt];
    let target = rng.random_range(4..=max_free.max(4));
    let mut free = 0;
    while free < target {
        let len = rng.random_range(2..=6).min(target - free);
        let start = rng.random_range(0..nt - len);
        for t in start..start + len {
            if !ev.available[t] && !ev.driving[t] && free < target {
                ev.available[t] = true;
                free += 1;
            }
        }
    }

    let params = ModelParams {
        charge_power_kw: 7.2,
        efficiency: 0.8,
        soc_floor_frac: 0.2,
        min_charge_slots: rng.random_range(1..=2),
        min_drive_slots: 1,
        max_daily_drive_slots: 4,
        max_daily_charge_starts: rng.random_range(1..=3),
    };
    let e = params.charge_power_kw * params.efficiency * grid.slot_duration_h;
    let battery = rng.random_range(77.0..118.0);
    let soc = rng.random_range(0.8..0.95) * battery;
    let need_slots = rng.random_range(0.2..3.5);
    let delta = need_slots * e / drive_len as f64;
    let draw = EvDraw {
        battery_kwh: battery,
        soc_init_kwh: soc,
        soc_final_kwh: soc,
        one_way_miles: 30.0,
        delta_kwh_per_drive_slot: delta,
    };

    let load = rng.random_range(10.0..30.0);
    let household_load_kw = (0..nt)
        .map(|_| if rng.random_bool(0.15) { 46.0 } else { load })
        .collect();
    let case = TransformerCase {
        transformer_id: format!("M{seed}"),
        rated_kva: 50.0,
        household_load_kw,
        has_pv: false,
        customer_count: 1,
    };
    assemble(ProblemInputs {
        grid,
        params,
        evs: vec![ev],
        case,
        formulation: Formulation::Robust,
        scenarios: vec![Scenario {
            scenario_id: 0,
            evs: vec![draw],
        }],
        epsilon: 0.05,
    })
    .unwrap()
}

/// Free charging decisions of a problem with a fixed driving pattern.
pub fn free_slots(p: &CoordinationProblem) -> usize {
    p.evs
        .iter()
        .map(|ev| {
            ev.available
                .iter()
                .zip(&ev.driving)
                .filter(|(a, d)| **a && !**d)
                .count()
        })
        .sum()
}

/// The production 15-minute grid problem for `n` EVs of one arrangement on
/// a flat transformer.
pub fn week_problem(
    arrangement: WorkArrangement,
    n: usize,
    formulation: Formulation,
    scenarios: Vec<Scenario>,
    load_kw: f64,
) -> CoordinationProblem {
    let grid = Arc::new(
        evhc::timegrid::build_time_grid(&TariffConfig::default(), &PvWindowConfig::default())
            .unwrap(),
    );
    let cfg = UncertaintyConfig::default();
    let profile = EvProfile::new(&grid, &arrangement, &PriorityWeights::default()).unwrap();
    let case = TransformerCase {
        transformer_id: "F".into(),
        rated_kva: 50.0,
        household_load_kw: vec![load_kw; grid.slot_count()],
        has_pv: false,
        customer_count: 8,
    };
    assemble(ProblemInputs {
        grid,
        params: ModelParams::from_uncertainty(&cfg),
        evs: vec![profile; n],
        case,
        formulation,
        scenarios,
        epsilon: 0.05,
    })
    .unwrap()
}
