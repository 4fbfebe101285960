use srpath_cli::config::{CheckSpec, PathSpec, ScenarioConfig};
use srpath_cli::report::{to_csv, to_json, CSV_COLUMNS, REPORT_SCHEMA};
use srpath_cli::run::run_scenario;
use srpath_cli::suite::deterministic_reports;
use srpath_core::stats::Executor;
use std::process::Command;

fn small_scenario() -> ScenarioConfig {
    let mut ibp = CheckSpec::named("ibp_damped");
    ibp.k = Some(PathSpec { nodes: vec![(0.1, vec![0.5, -1.0]), (0.3, vec![1.0, 0.0])] });
    ibp.functional = Some("product:0.15,0.3:bump".into());
    let mut ineq = CheckSpec::named("inequality_i");
    ineq.curvature_bound = Some(1.5);
    ScenarioConfig {
        model: "su2_hopf".into(),
        horizon: 0.3,
        steps: 30,
        paths: 400,
        seed: 99,
        checks: vec![CheckSpec::named("derivative"), ibp, ineq, CheckSpec::named("poincare")],
        ..ScenarioConfig::default()
    }
}

fn srpath(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_srpath")).args(args).output().unwrap()
}

#[test]
fn config_roundtrip_reproduces_the_run() {
    let s = small_scenario();
    let text = s.to_toml().unwrap();
    let back = ScenarioConfig::from_toml(&text).unwrap();
    assert_eq!(back, s);
    let exec = Executor::new(1);
    let a = run_scenario(&s, &exec).unwrap();
    let b = run_scenario(&back, &exec).unwrap();
    assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());
}

#[test]
fn unknown_names_are_rejected() {
    let mut s = small_scenario();
    s.checks.push(CheckSpec::named("no_such_check"));
    assert!(s.validate().is_err());
    let mut s = small_scenario();
    s.model = "no_such_model".into();
    assert!(s.validate().is_err());
    assert!(ScenarioConfig::from_toml("model = \"heisenberg3\"\nhorizon = 1.0\nsteps = 10\npaths = 10\nseed = 1\nbogus = 3\n").is_err());
}

#[test]
fn reports_validate_against_the_schema() {
    let exec = Executor::new(1);
    let mut reports = run_scenario(&small_scenario(), &exec).unwrap();
    reports.extend(deterministic_reports(1).unwrap());
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let instance: serde_json::Value = serde_json::from_str(&to_json(&reports).unwrap()).unwrap();
    if let Err(errors) = compiled.validate(&instance) {
        let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
        panic!("{msgs:?}");
    }
    let mut broken = instance.clone();
    broken[0]["status"] = "maybe".into();
    assert!(!compiled.is_valid(&broken));
}

#[test]
fn csv_has_the_documented_columns() {
    let exec = Executor::new(1);
    let reports = run_scenario(&small_scenario(), &exec).unwrap();
    let text = to_csv(&reports).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), reports.len());
    assert_eq!(to_csv(&[]).unwrap().trim_end(), CSV_COLUMNS.join(","));
}

#[test]
fn geometry_prints_the_so4_bounds() {
    let out = srpath(&["geometry", "--model", "so4_rolling"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("metric-preserving = true"), "{text}");
    assert!(text.contains("bounds (0.5, 2)"), "{text}");
}

#[test]
fn describe_emits_json() {
    let out = srpath(&["describe", "--model", "solvable_nonmp"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["metric_preservation"]["preserving"], false);
    assert_eq!(v["model"]["dim"], 3);
}

#[test]
fn smooth_variation_is_deterministic() {
    let a = srpath(&["smooth", "--model", "su2_hopf", "--variation"]);
    let b = srpath(&["smooth", "--model", "su2_hopf", "--variation"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8(a.stdout).unwrap().contains("slope 1.0"));
}

#[test]
fn exit_codes() {
    let ok = srpath(&["verify", "--model", "heisenberg3", "--check", "derivative", "--f", "bump", "--T", "0.5", "--paths", "500", "--steps", "50"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    // a curvature bound far below the truth makes the Poincaré bound fail
    let fail = srpath(&["verify", "--model", "so4_rolling", "--check", "poincare", "--K", "-40", "--paths", "2000", "--steps", "50"]);
    assert_eq!(fail.status.code(), Some(1), "{}", String::from_utf8_lossy(&fail.stdout));
    assert_eq!(srpath(&["verify", "--model", "nope", "--check", "derivative"]).status.code(), Some(2));
    assert_eq!(srpath(&["verify", "--model", "heisenberg3"]).status.code(), Some(2));
    assert_eq!(srpath(&["verify", "--bogus"]).status.code(), Some(2));
    assert_eq!(srpath(&["verify", "--model", "heisenberg3", "--check", "nonsense"]).status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    let mut s = small_scenario();
    s.checks = vec![CheckSpec::named("spectral_gap")];
    s.paths = 100_000;
    std::fs::write(&cfg, s.to_toml().unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = srpath(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--paths",
        "300",
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("reports.json")).unwrap()).unwrap();
    assert_eq!(v[0]["metadata"]["paths"], 300);
    assert_eq!(v[0]["metadata"]["seed"], 5);
    assert_eq!(v[0]["metadata"]["model"], "su2_hopf");
    assert!(!out_dir.join("reports.csv").exists());
}

#[test]
fn model_files_load_like_registry_models() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("heis.toml");
    std::fs::write(
        &path,
        "name = \"heis_file\"\nrank = 2\nframes = [\"X\", \"Y\", \"Z\"]\n\
         generators = [[[0,1,0],[0,0,0],[0,0,0]], [[0,0,0],[0,0,1],[0,0,0]], [[0,0,1],[0,0,0],[0,0,0]]]\n",
    )
    .unwrap();
    let out = srpath(&["geometry", "--model", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("heis_file") && text.contains("metric-preserving = true"), "{text}");
}
