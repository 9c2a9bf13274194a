use evhc::hosting::{
    feeder_sweep, hosting_capacity, results_csv, summarize, FleetKind, HostingConfig, SearchConfig,
    SearchStrategy,
};
use evhc::ingest::{load_feeder, save_feeder, synth_feeder, SynthSpec};
use evhc::model::Formulation;
use evhc::par::ExecMode;
use evhc::solver::SolveStatus;

fn quick() -> (HostingConfig, SearchConfig) {
    let mut cfg = HostingConfig::default();
    cfg.limits.time_limit_s = 10.0;
    (
        cfg,
        SearchConfig {
            max_ev: 3,
            strategy: SearchStrategy::Linear,
        },
    )
}

#[test]
fn small_sweep_is_capped_and_reproducible() {
    let feeder = synth_feeder(&SynthSpec::with_count(2)).unwrap();
    let (cfg, search) = quick();
    let run = |mode| {
        feeder_sweep(
            &feeder.transformers,
            &FleetKind::ALL,
            &[Formulation::Robust],
            &cfg,
            &search,
            mode,
        )
        .unwrap()
    };
    let parallel = run(ExecMode::Parallel);
    let sequential = run(ExecMode::Sequential);
    assert_eq!(results_csv(&parallel), results_csv(&sequential));
    assert_eq!(parallel.len(), 2 * FleetKind::ALL.len());
    for r in &parallel {
        assert_eq!(r.hc, 3, "{} {}", r.transformer_id, r.arrangement);
        assert!(r.capped && !r.terminated);
        assert!(r.trace_is_monotone());
        assert_eq!(r.status_label(), "capped");
    }
    let summary = summarize(&parallel);
    assert!(!summary.groups.is_empty());
}

#[test]
fn bisection_and_linear_search_agree_when_capped() {
    let feeder = synth_feeder(&SynthSpec::with_count(1)).unwrap();
    let (cfg, mut search) = quick();
    let linear = hosting_capacity(
        &feeder.transformers[0],
        FleetKind::Remote,
        Formulation::Robust,
        &cfg,
        &search,
    )
    .unwrap();
    search.strategy = SearchStrategy::Bisect;
    let bisect = hosting_capacity(
        &feeder.transformers[0],
        FleetKind::Remote,
        Formulation::Robust,
        &cfg,
        &search,
    )
    .unwrap();
    assert_eq!(linear.hc, bisect.hc);
}

#[test]
fn overloaded_transformer_hosts_nothing() {
    let mut feeder = synth_feeder(&SynthSpec::with_count(1)).unwrap();
    let case = &mut feeder.transformers[0];
    case.household_load_kw[10] = case.rated_kva + 5.0;
    let (cfg, search) = quick();
    let r = hosting_capacity(case, FleetKind::Hybrid, Formulation::Robust, &cfg, &search).unwrap();
    assert_eq!(r.hc, 0);
    assert_eq!(r.status_label(), "base_infeasible");
}

#[test]
fn tiny_rating_stops_at_the_first_infeasible_count() {
    let mut feeder = synth_feeder(&SynthSpec::with_count(1)).unwrap();
    let case = &mut feeder.transformers[0];
    let peak = case
        .household_load_kw
        .iter()
        .cloned()
        .fold(f64::MIN, f64::max);
    case.rated_kva = peak + 7.5;
    let (cfg, mut search) = quick();
    search.max_ev = 6;
    let r = hosting_capacity(
        case,
        FleetKind::InPerson,
        Formulation::Robust,
        &cfg,
        &search,
    )
    .unwrap();
    assert!(r.hc <= 6);
    assert!(r.trace_is_monotone());
    if !r.terminated && !r.capped {
        assert_eq!(
            r.per_count_status.get(&(r.hc + 1)),
            Some(&SolveStatus::Infeasible)
        );
    }
}

#[test]
fn feeder_files_round_trip() {
    let feeder = synth_feeder(&SynthSpec::with_count(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("feeder.csv");
    save_feeder(&feeder, &path).unwrap();
    let loaded = load_feeder(&path).unwrap();
    assert_eq!(loaded.transformers.len(), 3);
    for (a, b) in loaded.transformers.iter().zip(&feeder.transformers) {
        assert_eq!(a.transformer_id, b.transformer_id);
        assert_eq!(a.has_pv, b.has_pv);
        assert_eq!(a.customer_count, b.customer_count);
        for (x, y) in a.household_load_kw.iter().zip(&b.household_load_kw) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
