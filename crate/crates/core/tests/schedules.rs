mod common;

use common::week_problem;
use evhc::analysis::ScheduleRecord;
use evhc::hosting::FleetKind;
use evhc::model::{CoordinationProblem, Formulation};
use evhc::scenario::{robust_extremes, sample_scenarios, UncertaintyConfig};
use evhc::solver::check::scenario_satisfied;
use evhc::solver::{
    check_schedule, greedy_schedule, solve_with, BackendKind, ChargingSchedule, SolveLimits,
};
use evhc::timegrid::{Day, PriorityClass, ScheduleConfig, WorkArrangement};

fn cost_limits() -> SolveLimits {
    SolveLimits {
        time_limit_s: 60.0,
        gap_tol: 1e-3,
        ..SolveLimits::default()
    }
}

fn feasibility() -> SolveLimits {
    SolveLimits {
        time_limit_s: 30.0,
        feasibility_only: true,
        ..SolveLimits::default()
    }
}

fn robust(arrangement: WorkArrangement, n: usize, load: f64) -> CoordinationProblem {
    week_problem(
        arrangement,
        n,
        Formulation::Robust,
        vec![robust_extremes(&UncertaintyConfig::default(), n)],
        load,
    )
}

/// Recomputes every energy quantity of one EV from the raw rows.
fn audit(p: &CoordinationProblem, s: &ChargingSchedule) {
    let e = p.slot_energy_kwh();
    for (xi, scen) in p.scenarios().iter().enumerate() {
        if !s.z.is_empty() && !s.z[xi] {
            continue;
        }
        for (v, draw) in scen.evs.iter().enumerate() {
            let charged = s.b[v].iter().filter(|x| **x).count() as f64 * e;
            let driven =
                s.d[v].iter().filter(|x| **x).count() as f64 * draw.delta_kwh_per_drive_slot;
            let soc = &s.soc_trajectories[v][xi];
            let last = *soc.last().unwrap();
            assert!((last - (draw.soc_init_kwh + charged - driven)).abs() < 1e-6);
            assert!(
                last >= draw.soc_final_kwh - 1e-6,
                "EV {v} ends below its starting energy"
            );
            let floor = p.params.soc_floor_frac * draw.battery_kwh;
            assert!(soc
                .iter()
                .all(|x| *x >= floor - 1e-6 && *x <= draw.battery_kwh + 1e-6));
        }
    }
}

fn priorities_hold(p: &CoordinationProblem, s: &ChargingSchedule) {
    for (v, ev) in p.evs.iter().enumerate() {
        let sum = |class| -> f64 {
            (0..p.slot_count())
                .filter(|&t| s.b[v][t] && ev.class[t] == class)
                .map(|t| ev.weight[t])
                .sum()
        };
        assert!(sum(PriorityClass::P1) + 1e-9 >= sum(PriorityClass::P2));
        assert!(sum(PriorityClass::P2) + 1e-9 >= sum(PriorityClass::P3));
    }
}

fn transformer_holds(p: &CoordinationProblem, s: &ChargingSchedule) {
    let case = p.transformer.as_ref().unwrap();
    for t in 0..p.slot_count() {
        let on = s.b.iter().filter(|r| r[t]).count() as f64;
        assert!(case.household_load_kw[t] + on * p.params.charge_power_kw <= case.rated_kva + 1e-6);
    }
}

fn no_charging_while_away(p: &CoordinationProblem, s: &ChargingSchedule) {
    for (v, ev) in p.evs.iter().enumerate() {
        for t in 0..p.slot_count() {
            if s.b[v][t] {
                assert!(
                    ev.available[t] && !s.d[v][t],
                    "EV {v} charges at slot {t} while away"
                );
            }
        }
    }
}

#[test]
fn cost_minimising_robust_schedules_pass_every_audit() {
    for arrangement in [
        WorkArrangement::in_person(),
        WorkArrangement::hybrid([Day::Mon]),
        WorkArrangement::remote(),
    ] {
        let p = robust(arrangement, 3, 25.0);
        let out = solve_with(BackendKind::Highs, &p, &cost_limits()).unwrap();
        let s = out
            .schedule
            .as_ref()
            .expect("three EVs fit a half-loaded transformer");
        assert!(check_schedule(s, &p).is_feasible());
        audit(&p, s);
        priorities_hold(&p, s);
        transformer_holds(&p, s);
        no_charging_while_away(&p, s);
        assert!((out.objective_value - p.objective_value(&s.b)).abs() < 1e-9);
    }
}

#[test]
fn constructive_schedules_pass_the_checker() {
    for (arrangement, n) in [
        (WorkArrangement::in_person(), 6),
        (WorkArrangement::remote(), 8),
    ] {
        let p = robust(arrangement, n, 30.0);
        let s = greedy_schedule(&p).expect("the constructive pass places a small fleet");
        assert!(check_schedule(&s, &p).is_feasible());
        audit(&p, &s);
        transformer_holds(&p, &s);
    }
}

#[test]
fn tight_transformer_goes_through_the_full_feasibility_path() {
    let p = robust(WorkArrangement::in_person(), 7, 36.0);
    let out = solve_with(BackendKind::Highs, &p, &feasibility()).unwrap();
    if let Some(s) = &out.schedule {
        assert!(check_schedule(s, &p).is_feasible());
        transformer_holds(&p, s);
    }
}

#[test]
fn chance_constrained_schedule_keeps_enough_scenarios() {
    let cfg = UncertaintyConfig::default();
    let mut scenarios = sample_scenarios(&cfg, 1, 20, 11);
    let mut extreme = robust_extremes(&cfg, 1);
    extreme.scenario_id = scenarios.len();
    scenarios.push(extreme);
    let mut p = week_problem(
        WorkArrangement::remote(),
        1,
        Formulation::ChanceConstrained,
        scenarios,
        20.0,
    );
    p.energy.as_mut().unwrap().epsilon = 0.3;
    let out = solve_with(BackendKind::Highs, &p, &feasibility()).unwrap();
    let s = out
        .schedule
        .unwrap_or_else(|| panic!("no schedule: {:?}", out.status));
    let kept = s.z.iter().filter(|x| **x).count();
    assert!(kept >= p.required_scenarios());
    assert_eq!(p.required_scenarios(), 15);
    for (xi, keep) in s.z.iter().enumerate() {
        if *keep {
            assert!(scenario_satisfied(&p, &s.b, &s.d, xi));
        }
    }
    assert!(check_schedule(&s, &p).is_feasible());
    audit(&p, &s);
}

#[test]
fn checker_flags_a_broken_schedule() {
    let p = robust(WorkArrangement::in_person(), 2, 25.0);
    let mut s = greedy_schedule(&p).unwrap();
    s.b[0].iter_mut().for_each(|x| *x = false);
    let s = ChargingSchedule::from_decisions(&p, s.b, s.d, s.z);
    let report = check_schedule(&s, &p);
    assert!(!report.is_feasible());
    assert!(report.has(evhc::model::RowKind::Demand) || report.has(evhc::model::RowKind::SocFloor));
}

#[test]
fn saved_record_reproduces_the_report() {
    let p = robust(WorkArrangement::hybrid([Day::Mon]), 3, 25.0);
    let s = greedy_schedule(&p).unwrap();
    let cfg = ScheduleConfig::default();
    let record = ScheduleRecord::new(
        &p,
        &s,
        FleetKind::Hybrid,
        evhc::solver::SolveStatus::Feasible,
        1.0,
        &cfg,
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.schedule.json");
    record.save(&path).unwrap();
    let loaded = ScheduleRecord::load(&path).unwrap();
    assert_eq!(loaded, record);
    assert_eq!(loaded.charge_matrix().unwrap(), s.b);
    let case = p.transformer.as_ref().unwrap();
    assert_eq!(
        loaded.evaluate(case).unwrap(),
        record.evaluate(case).unwrap()
    );
}
