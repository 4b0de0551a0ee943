use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};

use pqeig::cli::{parse_config, Command as Cmd, EXIT_CONFIG, EXIT_IO, EXIT_STAGNATION, SWEEP_HEADER};

fn pqeig(command: &str, config: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pqeig"))
        .args([command, "--quiet", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_SOLVE: &str =
    r#"{"version": 1, "domain": "disk", "R": 1.0, "nx": 17, "ny": 17, "p": 4.0, "q": 4.0, "alpha": 2.0, "seed": 3}"#;

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "solve.json", SMALL_SOLVE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(pqeig("solve", &cfg, &a), 0);
    assert_eq!(pqeig("solve", &cfg, &b), 0);
    for file in ["result.json", "u.csv", "v.csv", "fields.json"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    let result = read_json(&a.join("result.json"));
    assert_eq!(result["stop"], "converged");
    assert_eq!(result["config_echo"]["derived"]["beta"], 2.0);
    let lambda = result["lambda"].as_f64().unwrap();
    let root = result["lambda_root_p"].as_f64().unwrap();
    assert!((root.powf(4.0) - lambda).abs() < 1e-10 * lambda);
    let rows = std::fs::read_to_string(a.join("u.csv")).unwrap();
    assert_eq!(rows.lines().count(), 17);
    assert!(rows.lines().all(|l| l.split(',').count() == 17));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out");
    let bad_l = write_config(
        d,
        "l.json",
        r#"{"version": 1, "domain": "rectangle", "R": 1.0, "L": 2.0, "gamma": 0.5, "Q": 1.0}"#,
    );
    assert_eq!(pqeig("limit", &bad_l, &out), EXIT_CONFIG);
    let unknown = write_config(
        d,
        "u.json",
        r#"{"version": 1, "domain": "disk", "R": 1.0, "colour": 1}"#,
    );
    assert_eq!(pqeig("limit", &unknown, &out), EXIT_CONFIG);
    let wrong_cmd = write_config(
        d,
        "w.json",
        r#"{"version": 1, "command": "sweep", "domain": "disk", "R": 1.0, "gamma": 0.5, "Q": 1.0}"#,
    );
    assert_eq!(pqeig("limit", &wrong_cmd, &out), EXIT_CONFIG);
    assert_eq!(pqeig("limit", &d.join("missing.json"), &out), EXIT_IO);

    let starved = write_config(
        d,
        "s.json",
        r#"{"version": 1, "domain": "disk", "R": 1.0, "nx": 17, "ny": 17, "p": 4.0, "q": 4.0, "alpha": 2.0, "max_iter": 1}"#,
    );
    assert_eq!(pqeig("solve", &starved, &out), EXIT_STAGNATION);
    // the partial result is still written
    assert_eq!(read_json(&out.join("result.json"))["stop"], "max_iterations");

    let ball = write_config(
        d,
        "b.json",
        r#"{"version": 1, "domain": "disk", "R": 1.0, "gamma": 0.5, "Q": 1.0}"#,
    );
    let blocked = d.join("file");
    std::fs::write(&blocked, "").unwrap();
    assert_eq!(pqeig("limit", &ball, &blocked), EXIT_IO);
}

#[test]
fn limit_on_the_ball() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "b.json",
        r#"{"version": 1, "domain": "disk", "R": 1.0, "gamma": 0.5, "Q": 1.0}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(pqeig("limit", &cfg, &out), 0);
    let json = read_json(&out.join("limit.json"));
    assert!((json["value"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((json["touch_point"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"version": 1, "domain": "disk", "R": 1.0, "nx": 17, "ny": 17, "gamma": 0.5, "Q": 1.0, "schedule": [4.0, 8.0]}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(pqeig("sweep", &cfg, &out), 0);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 3);
    let cells: Vec<f64> = lines[2].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells[..4], [8.0, 8.0, 4.0, 4.0]);
    assert_eq!(cells[6], 2.0);
    let json = read_json(&out.join("sweep.json"));
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
    assert!(json.get("failure").is_none() || json["failure"].is_null());
}

#[test]
fn residual_writes_masked_grids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.json",
        r#"{"version": 1, "domain": "disk", "R": 1.0, "nx": 33, "ny": 33, "gamma": 0.5, "Q": 1.0}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(pqeig("residual", &cfg, &out), 0);
    let json = read_json(&out.join("residual.json"));
    let ops = json["operators"].as_object().unwrap();
    assert_eq!(ops.len(), 2);
    for op in ops.values() {
        let file = op["file"].as_str().unwrap();
        let grid = std::fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(grid.lines().count(), 33);
        // nodes off the domain are left empty
        assert!(grid.lines().next().unwrap().starts_with(','));
    }
    let fields = read_json(&out.join("fields.json"));
    assert_eq!(fields["node_kinds"].as_array().unwrap().len(), 33);
}

#[test]
fn parsed_configs_round_trip() {
    let config = Config {
        cases: 128,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config.clone(), TestRng::deterministic_rng(config.rng_algorithm));
    let strategy = (
        prop::bool::ANY,
        0.5..3.0f64,
        (4usize..40).prop_map(|k| 2 * k + 1),
        2.0..10.0f64,
        0.1..0.6f64,
        1.0..3.0f64,
        any::<u64>(),
        1e-9..1e-5f64,
    );
    runner
        .run(&strategy, |(disk, r, n, p, frac, qf, seed, tol)| {
            let q = qf * p;
            let alpha = frac * p;
            prop_assume!(q * (1.0 - alpha / p) > 1.0);
            let domain = if disk {
                format!(r#""domain": "disk", "R": {r}"#)
            } else {
                format!(r#""domain": "rectangle", "R": {r}, "L": {}"#, 0.5 * r)
            };
            let text = format!(
                r#"{{"version": 1, {domain}, "nx": {n}, "ny": {n}, "p": {p}, "q": {q}, "alpha": {alpha}, "seed": {seed}, "tol_grad": {tol}}}"#
            );
            let parsed = parse_config(&text, Cmd::Solve).unwrap();
            let echoed = serde_json::to_string(&parsed).unwrap();
            prop_assert_eq!(parse_config(&echoed, Cmd::Solve).unwrap(), parsed.clone());
            prop_assert_eq!(parsed.seed, Some(seed));
            prop_assert_eq!(parsed.tol_grad, Some(tol));
            Ok(())
        })
        .unwrap();
}
