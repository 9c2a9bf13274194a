use std::path::Path;
use std::process::{Command, Output};

fn evhc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evhc"))
        .args(args)
        .env_remove("EVHC_SOLVER")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_feeder_is_a_usage_error() {
    let out = evhc(&["hc"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--feeder"));
}

#[test]
fn conflicting_sources_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = dir.path().join("f.csv");
    let out = evhc(&["hc", "--synth", "2", "--feeder", path_arg(&feeder)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_arrangement_is_a_usage_error() {
    let out = evhc(&["hc", "--synth", "1", "--arrangements", "nomad"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_backend_is_an_environment_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_evhc"))
        .args(["hc", "--synth", "1"])
        .env("EVHC_SOLVER", "cplex")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn missing_schedule_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.schedule.json");
    let out = evhc(&["report", "--synth", "1", "--schedule", path_arg(&missing)]);
    assert_eq!(code(&out), 4);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "not_a_key = 3\n").unwrap();
    let out = evhc(&["hc", "--synth", "1", "--config", path_arg(&cfg)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn sample_writes_one_record_per_scenario_and_ev() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.csv");
    let out = evhc(&[
        "sample",
        "--evs",
        "3",
        "--scenarios",
        "40",
        "--file",
        path_arg(&file),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&file).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 40);
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn synth_round_trips_through_the_feeder_flag() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("feeder.csv");
    let out = evhc(&["synth", "--count", "2", "--file", path_arg(&file)]);
    assert_eq!(code(&out), 0);
    let out_dir = dir.path().join("hc");
    let out = evhc(&[
        "hc",
        "--feeder",
        path_arg(&file),
        "--max-ev",
        "2",
        "--arrangements",
        "remote",
        "--out",
        path_arg(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
}

#[test]
fn solve_then_report_reproduces_the_loading_report() {
    let dir = tempfile::tempdir().unwrap();
    let solved = dir.path().join("solve");
    let out = evhc(&[
        "solve",
        "--synth",
        "1",
        "--evs",
        "2",
        "--feasibility",
        "--out",
        path_arg(&solved),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let schedule = solved.join("T01_hybrid_robust.schedule.json");
    assert!(schedule.exists());
    let reported = dir.path().join("report");
    let out = evhc(&[
        "report",
        "--synth",
        "1",
        "--schedule",
        path_arg(&schedule),
        "--out",
        path_arg(&reported),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["T01_hybrid_robust.json", "T01_hybrid_robust.csv"] {
        let a = std::fs::read(solved.join(name)).unwrap();
        let b = std::fs::read(reported.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = evhc(&[
            "hc",
            "--synth",
            "2",
            "--max-ev",
            "2",
            "--formulations",
            "robust,cc",
            "--scenarios",
            "10",
            "--seed",
            "5",
            "--out",
            path_arg(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("results.csv")).unwrap()
    };
    let first = run("a");
    assert_eq!(first, run("b"));
    let sequential = {
        let out_dir = dir.path().join("c");
        let out = evhc(&[
            "hc",
            "--synth",
            "2",
            "--max-ev",
            "2",
            "--formulations",
            "robust,cc",
            "--scenarios",
            "10",
            "--seed",
            "5",
            "--sequential",
            "--out",
            path_arg(&out_dir),
        ]);
        assert_eq!(code(&out), 0);
        std::fs::read(out_dir.join("results.csv")).unwrap()
    };
    assert_eq!(first, sequential);
}

#[test]
fn export_lp_writes_a_parsable_model() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.lp");
    let out = evhc(&[
        "export-lp",
        "--synth",
        "1",
        "--evs",
        "1",
        "--file",
        path_arg(&file),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.contains("Subject To"));
}
