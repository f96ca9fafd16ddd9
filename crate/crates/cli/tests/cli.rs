use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qalab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qalab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qalab(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn ring4(dir: &Path) {
    std::fs::write(dir.join("ring.txt"), "0 1\n1 2\n2 3\n0 3\n").unwrap();
    ok(dir, &["--seed", "3", "gen", "--edges", "ring.txt", "--out", "ring.json"]);
}

#[test]
fn gen_writes_instance_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["--seed", "7", "gen", "--n", "8", "--out", "a.json"]);
    ok(d, &["--seed", "7", "gen", "--n", "8", "--out", "b.json"]);
    let a = std::fs::read_to_string(d.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.join("b.json")).unwrap());
    let inst = json(d.join("a.json"));
    assert_eq!(inst["n"], 8);
    let meta = json(d.join("a.json.meta.json"));
    assert_eq!(meta["command"], "gen");
    assert_eq!(meta["seed"], 7);
    assert!(meta["version"].is_string());
    assert!(meta["params"]["hash"].is_string());
}

#[test]
fn equilibrium_csv_sums_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ring4(d);
    let csv = ok(d, &["equilibrium", "--instance", "ring.json", "--s", "0.6", "--levels", "6"]);
    let total: f64 = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("level_index"))
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn spectrum_json_has_requested_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ring4(d);
    ok(d, &[
        "--format", "json", "spectrum", "--instance", "ring.json", "--levels", "5", "--grid", "41",
        "--out", "spec.json",
    ]);
    let v = json(d.join("spec.json"));
    assert_eq!(v["s"].as_array().unwrap().len(), 41);
    assert_eq!(v["energies_ghz"][0].as_array().unwrap().len(), 5);
}

#[test]
fn evolve_closed_and_open_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ring4(d);
    for model in ["closed", "secular"] {
        ok(d, &[
            "--format", "json", "evolve", "--instance", "ring.json", "--ta", "5", "--model", model,
            "--levels", "6", "--grid", "41", "--tol", "1e-6", "--out", "traj.json",
        ]);
        let meta = json(d.join("traj.json.meta.json"));
        let p0 = meta["params"]["p0_final"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p0), "{model}: {p0}");
    }
}

#[test]
fn sa_is_reproducible_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--n", "8", "--out", "i.json"]);
    let run = |threads: &str| {
        ok(d, &[
            "--seed", "11", "--threads", threads, "sa", "--instance", "i.json", "--sweeps", "50",
            "--repetitions", "40",
        ])
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(one.lines().next().unwrap(), "rep,energy,config,success");
    assert_eq!(one.lines().count(), 41);
}

#[test]
fn sqa_records_readout() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen", "--n", "8", "--out", "i.json"]);
    ok(d, &[
        "sqa", "--instance", "i.json", "--sweeps", "20", "--repetitions", "4", "--slices", "8", "--best-slice",
        "--out", "s.csv",
    ]);
    let meta = json(d.join("s.csv.meta.json"));
    assert!(meta["params"]["readout"].as_str().unwrap().starts_with("best-slice"));
}

#[test]
fn bench_then_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = r#"{"solver":{"name":"sa","beta_initial":0.1,"beta_final":5.0,"shape":"geometric","repetitions":20},
        "sizes":[8,16,32],"ta_ladder":[4,16,64],"ensemble":3,"seed":2}"#;
    std::fs::write(d.join("cfg.json"), cfg).unwrap();
    ok(d, &["bench", "--config", "cfg.json", "--out", "res.csv"]);
    let text = std::fs::read_to_string(d.join("res.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "solver,instance_hash,N,ta,P0,P0_lo,P0_hi,tc,censored");
    assert_eq!(text.lines().count(), 1 + 3 * 3 * 3);
    ok(d, &["--format", "json", "fit", "--results", "res.csv", "--out", "fit.json"]);
    let fit = json(d.join("fit.json"));
    assert!(fit["slope"].is_number());
    ok(d, &["--format", "json", "fit", "--results", "res.csv", "--policy", "16", "--out", "fix.json"]);
    let bad = qalab(d, &["fit", "--results", "res.csv", "--policy", "fastest"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn partial_bench_exits_with_4() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = r#"{"solver":{"name":"quantum-closed","levels":4,"grid_points":21,"full_state":true},
        "sizes":[8,16],"ta_ladder":[1],"ensemble":1,"seed":0}"#;
    std::fs::write(d.join("cfg.json"), cfg).unwrap();
    let out = qalab(d, &["bench", "--config", "cfg.json", "--out", "res.csv"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(d.join("res.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let meta = json(d.join("res.csv.meta.json"));
    assert_eq!(meta["params"]["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn regimes_from_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let curve = "ta,P0_open,P0_closed\n0.1,0.05,0.05\n1,0.4,0.4\n10,0.9,0.97\n100,0.8,1.0\n1000,0.75,1.0\n\
                 3000,0.78,1.0\n10000,0.81,1.0\n";
    std::fs::write(d.join("curve.csv"), curve).unwrap();
    let out = ok(d, &["regimes", "--curve", "curve.csv"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "ta,P0_open,P0_closed,regime");
    assert_eq!(rows.len(), 8);
    assert!(rows[1].ends_with("coherent"));
    assert!(rows[7].ends_with("quasistatic"));
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(qalab(d, &["sa", "--instance", "missing.json"]).status.code(), Some(2));
    assert_eq!(qalab(d, &["frobnicate"]).status.code(), Some(2));
    ok(d, &["gen", "--n", "8", "--out", "i.json"]);
    let out = qalab(d, &["equilibrium", "--instance", "i.json", "--s", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
    assert_eq!(qalab(d, &["gen", "--n", "12"]).status.code(), Some(2));
}
