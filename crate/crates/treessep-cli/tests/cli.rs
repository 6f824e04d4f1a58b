use std::process::Command;

fn treessep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_treessep"))
}

fn run_ok(args: &[&str]) -> String {
    let out = treessep().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn rate_command_prints_reference_values() {
    let text = run_ok(&["rate", "--d", "2", "--p", "0.5", "--u", "1"]);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((json["I"].as_f64().unwrap() - 1.5).abs() < 1e-7);
    assert!((json["sigma2"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-7);
    assert!((json["phi"][0].as_f64().unwrap() - 3.0).abs() < 1e-6);
}

#[test]
fn kernel_table_has_bound_dominated_rows() {
    let text = run_ok(&["kernel-table", "--d", "2", "--t", "1", "--kmax", "5"]);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "d,t,k,p,bound,leak");
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let p: f64 = cols[3].parse().unwrap();
        let bound: f64 = cols[4].parse().unwrap();
        assert!(p <= bound + 1e-10, "row {line}");
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn potential_table_approaches_green_limit() {
    let text = run_ok(&["potential-table", "--d", "2", "--t", "400", "--kmax", "1"]);
    for (k, line) in text.lines().skip(1).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        let gps: f64 = cols[5].parse().unwrap();
        let limit: f64 = cols[6].parse().unwrap();
        assert!(gps < limit);
        if k == 0 {
            assert!((gps - limit).abs() / limit < 0.2, "row {line}");
        }
    }
}

#[test]
fn unknown_flags_exit_with_validation_error() {
    let out = treessep()
        .args(["rate", "--d", "2", "--p", "0.5", "--u", "1", "--bogus", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn malformed_config_exits_with_message() {
    let dir = std::env::temp_dir().join("treessep-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = treessep()
        .args(["moments", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed config"));

    let path2 = dir.join("badkey.json");
    std::fs::write(&path2, r#"{ "d": 2, "p": 0.5, "t": 1.0, "bogus": 1 }"#).unwrap();
    let out = treessep()
        .args(["moments", "--config", path2.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_parameters_exit_one() {
    let out = treessep()
        .args(["simulate", "--d", "2", "--p", "1.5", "--t", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let args = [
        "simulate", "--d", "2", "--p", "0.5", "--t", "2", "--replicas", "20", "--seed", "9",
        "--radius", "5", "--radius-check", "false", "--targets", "o,0",
    ];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a, b);
    assert!(a.lines().count() == 1 + 40); // header + 20 replicas x 2 targets
    // thread count must not change the bytes
    let out = treessep()
        .args(args)
        .env("TREESSEP_THREADS", "4")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), a);
}

#[test]
fn simulate_streams_events_for_single_replica() {
    let dir = std::env::temp_dir().join("treessep-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let events = dir.join("events.ndjson");
    let _ = run_ok(&[
        "simulate", "--d", "2", "--p", "0.5", "--t", "1", "--replicas", "1", "--seed", "3",
        "--radius", "4", "--events-output", events.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&events).unwrap();
    let mut last_time = 0.0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let t = v["time"].as_f64().unwrap();
        assert!(t > last_time && t < 1.0);
        last_time = t;
        assert!(v["edge"].is_u64() && v["v1"].is_u64() && v["v2"].is_u64());
    }
    assert!(!text.is_empty());
    // multiple replicas with an event stream is a config error
    let out = treessep()
        .args([
            "simulate", "--d", "2", "--p", "0.5", "--t", "1", "--replicas", "2",
            "--events-output", events.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_duality_reports_pass() {
    let text = run_ok(&["verify-duality", "--replicas", "1500", "--seed", "2"]);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["pass"], serde_json::Value::Bool(true));
    assert_eq!(json["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn selftest_passes_on_fresh_checkout() {
    let out = treessep().arg("selftest").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "selftest output:\n{text}");
    assert!(text.contains("all"));
}
