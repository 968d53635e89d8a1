use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ncs-tune"))
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(sub).arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

// short loop so each run takes milliseconds
fn short_sim() -> Value {
    json!({
        "horizon": 3.0,
        "load_disturbance": { "time": 1.5, "amplitude": 1.0 },
        "network": { "drop_prob": 0.1, "delay": { "law": "uniform", "lo": 0.0, "hi": 0.1 } }
    })
}

fn pid() -> Value {
    json!({ "kp": 2.6, "ki": 1.2, "kd": 0.57 })
}

#[test]
fn tune_writes_result_and_history() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "tune.json",
        &json!({
            "plant": "p1_fodup",
            "mode": "pid",
            "optimizer": { "algorithm": "de", "variant": "rand_1", "np": 8, "g_max": 3 },
            "sim": short_sim(),
            "replicates": 2,
            "bounds": { "lower": [0, 0, 0], "upper": [5, 5, 1] },
            "seed": 4
        }),
    );
    let out = dir.path().join("run");
    let o = run("tune", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let result: Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["penalized"], false);
    assert_eq!(result["evaluations"], 32);
    assert_eq!(result["controller"]["lambda"], 1.0);
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 4);

    // a later run can take the tuned controller from result.json
    let sim = write_config(
        dir.path(),
        "simulate.json",
        &json!({ "plant": "p1_fodup", "controller_from": "run/result.json", "sim": short_sim(), "seed": 1 }),
    );
    let o = run("simulate", &sim, &dir.path().join("sim"), &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn infeasible_box_exits_with_code_2() {
    // over the default 40 s the open-loop mode (pole 0.2) only reaches y ~ 30;
    // 100 s lets it cross the divergence threshold
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "tune.json",
        &json!({
            "plant": "p2_sodup",
            "mode": "pid",
            "optimizer": { "algorithm": "de", "variant": "rand_1", "np": 6, "g_max": 1 },
            "sim": { "shape": "p2", "horizon": 100.0 },
            "replicates": 1,
            "bounds": { "lower": [0, 0, 0], "upper": [1e-9, 1e-9, 1e-9] },
            "seed": 1
        }),
    );
    let out = dir.path().join("run");
    let o = run("tune", &cfg, &out, &[]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let result: Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["penalized"], true);
}

#[test]
fn malformed_or_missing_configs_exit_with_code_1() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&run("simulate", &bad, dir.path(), &[])), 1);

    let unknown = write_config(dir.path(), "unknown.json", &json!({ "plant": "p1_fodup", "controler": pid() }));
    let o = run("simulate", &unknown, dir.path(), &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));

    assert_eq!(code(&run("simulate", &dir.path().join("absent.json"), dir.path(), &[])), 1);
    assert_eq!(code(&bin().arg("simulate").output().unwrap()), 1);
    assert_eq!(code(&bin().arg("no-such-command").output().unwrap()), 1);
}

#[test]
fn simulate_is_byte_identical_for_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.json",
        &json!({ "plant": "p1_fodup", "controller": pid(), "sim": short_sim(), "replicates": 3 }),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run("simulate", &cfg, &a, &["--seed", "9"])), 0);
    assert_eq!(code(&run("simulate", &cfg, &b, &["--seed", "9", "--jobs", "1"])), 0);
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
    assert_eq!(fs::read(a.join("cost.json")).unwrap(), fs::read(b.join("cost.json")).unwrap());

    let c = dir.path().join("c");
    assert_eq!(code(&run("simulate", &cfg, &c, &["--seed", "10"])), 0);
    assert_ne!(fs::read(a.join("trace.csv")).unwrap(), fs::read(c.join("trace.csv")).unwrap());

    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,r,y,u,e"));
    assert_eq!(trace.lines().count(), 1 + 301);
}

#[test]
fn sweep_rows_satisfy_the_cost_identity() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        &json!({
            "plant": "p1_fodup",
            "gains": pid(),
            "lambda": [0.9, 1.0],
            "mu": { "start": 0.5, "stop": 1.0, "steps": 3 },
            "sim": short_sim(),
            "weights": { "w1": 2.0, "w2": 0.5 },
            "replicates": 2,
            "seed": 3
        }),
    );
    let out = dir.path().join("run");
    assert_eq!(code(&run("sweep", &cfg, &out, &[])), 0);
    let text = fs::read_to_string(out.join("surface.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (j, itae, isco) = (col("j"), col("itae"), col("isco"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect()).collect();
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert!((r[j] - (2.0 * r[itae] + 0.5 * r[isco])).abs() <= 1e-9 * r[j].max(1.0), "{r:?}");
    }
}

#[test]
fn channel_audit_writes_stats_and_log() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "audit.json",
        &json!({
            "channel": { "drop_prob": 0.2, "delay": { "law": "uniform", "lo": 0.0, "hi": 0.05 } },
            "packets": 2000,
            "seed": 5
        }),
    );
    let out = dir.path().join("run");
    assert_eq!(code(&run("channel-audit", &cfg, &out, &[])), 0);
    let stats: Value = serde_json::from_str(&fs::read_to_string(out.join("channel_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["sent"], 2000);
    let log = fs::read_to_string(out.join("channel_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2000);
}

#[test]
fn studies_write_one_row_per_condition() {
    let dir = TempDir::new().unwrap();
    let base = json!({ "horizon": 3.0, "load_disturbance": { "time": 1.5, "amplitude": 1.0 } });

    let deg = write_config(
        dir.path(),
        "deg.json",
        &json!({
            "plant": "p1_fodup", "controller": pid(), "sim": base,
            "static_delays": [0.05, 0.1], "uniform_bounds": [0.1], "replicates": 2, "seed": 1
        }),
    );
    let out = dir.path().join("deg");
    assert_eq!(code(&run("study-degradation", &deg, &out, &[])), 0);
    assert_eq!(fs::read_to_string(out.join("degradation.csv")).unwrap().lines().count(), 1 + 3);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("degradation_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["largest_stable_static"], 0.1);

    let buf = write_config(
        dir.path(),
        "buf.json",
        &json!({
            "plant": "p1_fodup", "controller": pid(), "sim": base,
            "channel": { "drop_prob": 0.05, "delay": { "law": "uniform", "lo": 0.0, "hi": 0.05 } },
            "replicates": 2, "seed": 1
        }),
    );
    let out = dir.path().join("buf");
    assert_eq!(code(&run("study-buffer", &buf, &out, &[])), 0);
    assert_eq!(fs::read_to_string(out.join("buffer.csv")).unwrap().lines().count(), 1 + 2);

    let rob = write_config(
        dir.path(),
        "rob.json",
        &json!({ "plant": "p1_fodup", "controller": pid(), "sim": base, "replicates": 2, "seed": 1 }),
    );
    let out = dir.path().join("rob");
    assert_eq!(code(&run("study-robustness", &rob, &out, &[])), 0);
    assert_eq!(fs::read_to_string(out.join("robustness.csv")).unwrap().lines().count(), 1 + 3);
}

#[test]
fn shipped_configs_run() {
    // only the cheap ones; the tuning examples take seconds in release mode
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = TempDir::new().unwrap();
    for (sub, name) in [("channel-audit", "channel_audit.json"), ("study-buffer", "study_buffer.json")] {
        let o = run(sub, &root.join(name), &dir.path().join(name), &[]);
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
