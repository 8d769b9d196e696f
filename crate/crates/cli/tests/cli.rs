use std::path::Path;
use std::process::{Command, Output};

fn larmor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_larmor")).args(args).output().unwrap()
}

fn short_config(dir: &Path) -> String {
    let p = dir.join("short.cfg");
    std::fs::write(&p, "# quick runs\nmeasurements = 200\ngrid_points = 1024  # coarse\n").unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn track_writes_trajectory_and_signal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let traj = dir.path().join("t.csv");
    let sig = dir.path().join("s.csv");
    let out = larmor(&[
        "--config",
        &cfg,
        "--seed",
        "2",
        "--format",
        "csv",
        "track",
        "--trajectory",
        traj.to_str().unwrap(),
        "--signal",
        sig.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "idx,time_s,tau_s,theta_rad,outcome,estimate_hz,truth_hz,n_params,compute_ns");
    assert_eq!(lines.len(), 201);
    assert_eq!(std::fs::read_to_string(&traj).unwrap(), text);
    let signal = std::fs::read_to_string(&sig).unwrap();
    assert_eq!(signal.lines().next(), Some("step_index,time_s,f_hz"));
}

#[test]
fn track_json_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let path = dir.path().join("r.json");
    let out = larmor(&["--config", &cfg, "--out", path.to_str().unwrap(), "track", "--filter", "grid"]);
    assert!(stdout(&out).is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["summary"]["filter"], "grid");
    assert_eq!(v["summary"]["n_meas"], 200);
    assert_eq!(v["rows"].as_array().unwrap().len(), 200);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("seeded.cfg");
    std::fs::write(&p, "measurements = 50\nseed = 1\n").unwrap();
    let cfg = p.to_str().unwrap();
    let seed_of = |args: &[&str]| -> u64 {
        let v: serde_json::Value = serde_json::from_str(&stdout(&larmor(args))).unwrap();
        v["summary"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&["--config", cfg, "track"]), 1);
    assert_eq!(seed_of(&["--config", cfg, "--seed", "8", "track"]), 8);
}

#[test]
fn compare_table_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let runs = dir.path().join("runs.csv");
    let out = larmor(&[
        "--config",
        &cfg,
        "--format",
        "csv",
        "compare",
        "--runs",
        "2",
        "--t2star",
        "100,inf",
        "--overhead",
        "10",
        "--kappa",
        "5",
        "--runs-csv",
        runs.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("t2star_us,overhead_us,kappa_mhz,runs,grid_fail_rate,gaussian_fail_rate"));
    assert!(lines[1].starts_with("100.0,10.0,5.0,2,"));
    assert!(lines[2].starts_with("inf,10.0,5.0,2,"));
    let runs = std::fs::read_to_string(&runs).unwrap();
    assert_eq!(runs.lines().next(), Some("seed,filter,mse,failed,mean_params,mean_compute_ns,n_meas"));
    assert_eq!(runs.lines().count(), 9);
}

#[test]
fn sweep_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let text = stdout(&larmor(&[
        "--config",
        &cfg,
        "--format",
        "csv",
        "sweep",
        "--axis",
        "overhead",
        "--values",
        "2,20",
        "--runs-per-point",
        "2",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("axis,value,runs,gaussian_mean_mse,grid_mean_mse"));
    assert!(lines[1].starts_with("overhead,2.0,2,") && lines[2].starts_with("overhead,20.0,2,"));

    let v: serde_json::Value = serde_json::from_str(&stdout(&larmor(&["--config", &cfg, "bench", "--runs", "1"]))).unwrap();
    assert_eq!(v["grid_points"], 1024);
    assert!(v["speed_increase"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("coarse.cfg");
    std::fs::write(&p, "grid_points = 512\n").unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&larmor(&[
        "--config",
        p.to_str().unwrap(),
        "sweep",
        "--axis",
        "kappa",
        "--values",
        "10",
        "--runs-per-point",
        "1",
    ])))
    .unwrap();
    assert_eq!(v[0]["axis"], "kappa");
    assert_eq!(v[0]["runs"], 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "no_such_key = 3\n").unwrap();
    let code = |args: &[&str]| larmor(args).status.code();
    assert_eq!(code(&["--config", bad.to_str().unwrap(), "track"]), Some(2));
    assert_eq!(code(&["--format", "xml", "track"]), Some(2));
    assert_eq!(code(&["compare", "--t2star", "1,2", "--overhead", "1,2,3", "--runs", "1"]), Some(2));
    assert_eq!(code(&["sweep", "--axis", "temperature", "--values", "1"]), Some(2));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(code(&["--config", missing.to_str().unwrap(), "track"]), Some(3));
    let nowhere = dir.path().join("no/such/dir/out.json");
    let cfg = short_config(dir.path());
    assert_eq!(code(&["--config", &cfg, "--out", nowhere.to_str().unwrap(), "track"]), Some(3));
}
