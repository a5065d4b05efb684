use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const GRID: &str = "\
alpha = 0.025
theta0 = 0

[scenario]
delta0 = 0.2, 0.3, 0.4, 0.6
n1 = 50, 100, 150, 200
theta_star = 0.2, 0.3, 0.4
delta_star = 0.2
ratio = 2:1:3
";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extcontrol")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Treated, internal and external arms with covariates `x`, `z`.
fn trial_csv(treated: &[f64], internal: &[f64], external: &[f64]) -> String {
    let mut out = String::from("subject_id,source,arm,outcome,x,z\n");
    let mut id = 0;
    for (src, arm, ys) in [("internal", "treated", treated), ("internal", "control", internal), ("external", "control", external)] {
        for (k, y) in ys.iter().enumerate() {
            id += 1;
            let x = (k as f64 * 0.37).sin() * 3.0 + if src == "external" { 0.4 } else { 0.0 };
            let z = ((k * 7 + id) % 11) as f64 / 10.0;
            out.push_str(&format!("p{id},{src},{arm},{y},{x:.4},{z}\n"));
        }
    }
    out
}

fn spread(center: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| center + (k as f64 - (n - 1) as f64 / 2.0) / n as f64).collect()
}

fn value_of(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| {
            let mut it = l.split_whitespace();
            (it.next() == Some(key)).then(|| it.next().unwrap().to_string())
        })
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn power_table_has_48_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "grid.cfg", GRID);
    let out = stdout(&run(&["power-table", "--config", s(&cfg), "--format", "tsv"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 49);
    assert_eq!(lines[0], "delta0\tn1\ttheta_star\tT1\tT2(0.25)\tT2(w_opt)\tTc(0.25)\tTc(w_opt)");
    assert_eq!(lines[1], "0.20\t50\t0.20\t12.6\t21.0\t21.0\t18.5\t18.5");
}

#[test]
fn type1_table_is_alpha_on_the_null_diagonal() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "grid.cfg", "[scenario]\nn1 = 100\nratio = 2:1:3\ndelta_star = 0.3\ndelta0 = 0.3\n");
    let out = stdout(&run(&["type1-table", "--config", s(&cfg), "--format", "tsv"]));
    assert_eq!(out.lines().nth(1).unwrap(), "0.30\t100\t0.00\t2.5\t2.5\t2.5\t4.2");
}

#[test]
fn t1_statistic_zero_when_difference_equals_theta0() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &trial_csv(&spread(0.3, 20), &spread(0.0, 10), &spread(0.0, 30)));
    let out = stdout(&run(&["test", "--data", s(&data), "--method", "t1", "--theta0", "0.3"]));
    assert_eq!(value_of(&out, "statistic"), "0.0000");
    assert_eq!(value_of(&out, "p"), "5.00e-1");
    assert_eq!(value_of(&out, "reject"), "false");
}

#[test]
fn less_direction_mirrors_greater() {
    let dir = TempDir::new().unwrap();
    let up = write(&dir, "up.csv", &trial_csv(&spread(0.8, 20), &spread(0.0, 10), &spread(0.1, 30)));
    let neg = |v: Vec<f64>| v.into_iter().map(|y| -y).collect::<Vec<_>>();
    let down = write(&dir, "down.csv", &trial_csv(&neg(spread(0.8, 20)), &neg(spread(0.0, 10)), &neg(spread(0.1, 30))));
    for method in ["t2", "combined"] {
        let a = stdout(&run(&["test", "--data", s(&up), "--method", method]));
        let b = stdout(&run(&["test", "--data", s(&down), "--method", method, "--direction", "less"]));
        for key in ["p", "adjusted_p", "reject", "statistic"] {
            if a.lines().any(|l| l.split_whitespace().next() == Some(key)) {
                assert_eq!(value_of(&a, key), value_of(&b, key), "{method} {key}");
            }
        }
    }
}

#[test]
fn tipping_reports_insensitive_for_strong_rct_evidence() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &trial_csv(&spread(1.5, 60), &spread(0.0, 30), &spread(0.0, 90)));
    let out = stdout(&run(&["tipping", "--data", s(&data), "--method", "combined"]));
    assert_eq!(value_of(&out, "tipping_combined"), "insensitive");
    let p: f64 = value_of(&out, "plateau_p").parse().unwrap();
    assert!(p <= 0.025);
}

#[test]
fn json_round_trip_through_echoed_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "grid.cfg", GRID);
    let first = stdout(&run(&["power-table", "--config", s(&cfg), "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    let echoed = v["inputs"].as_array().unwrap().iter().find(|i| i["key"] == "config").unwrap()["value"]
        .as_str()
        .unwrap()
        .to_string();
    let again = write(&dir, "echo.cfg", &echoed);
    let second = stdout(&run(&["power-table", "--config", s(&again), "--format", "json"]));
    let w: serde_json::Value = serde_json::from_str(&second).unwrap();
    assert_eq!(v["sections"], w["sections"]);
    assert_eq!(v["sections"][0]["rows"].as_array().unwrap().len(), 48);
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "g.cfg", "columns = t1, t2(0.25), tc(0.25), naive(0.25)\n[scenario]\nn1 = 50\nratio = 2:1:3\ndelta0 = 0.2\ndelta_star = 0.2\ntheta_star = 0, 0.2\n");
    let go = |threads: &str| stdout(&run(&["simulate", "--config", s(&cfg), "--seed", "99", "--reps", "1200", "--threads", threads, "--format", "tsv"]));
    let one = go("1");
    assert_eq!(one, go("1"));
    assert_eq!(one, go("4"));
    assert_ne!(one, stdout(&run(&["simulate", "--config", s(&cfg), "--seed", "100", "--reps", "1200", "--format", "tsv"])));
}

#[test]
fn simulate_requires_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "g.cfg", GRID);
    assert_eq!(run(&["simulate", "--config", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn match_writes_pairs_that_balance_reads_back() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &trial_csv(&spread(0.5, 20), &spread(0.0, 10), &spread(0.0, 40)));
    let pairs = dir.path().join("pairs.csv");
    let matched = dir.path().join("matched.csv");
    let out = stdout(&run(&["match", "--data", s(&data), "--pairs-out", s(&pairs), "--matched-out", s(&matched), "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let smd_match: Vec<String> = v["sections"][2]["rows"].as_array().unwrap().iter().map(|r| r[3].to_string()).collect();

    let written = std::fs::read_to_string(&pairs).unwrap();
    assert_eq!(written.lines().count(), 21);
    let sub = std::fs::read_to_string(&matched).unwrap();
    assert_eq!(sub.lines().count(), 1 + 20 + 10 + 20);

    let bal = stdout(&run(&["balance", "--data", s(&data), "--pairs", s(&pairs), "--format", "json"]));
    let b: serde_json::Value = serde_json::from_str(&bal).unwrap();
    let smd_bal: Vec<String> = b["sections"][0]["rows"].as_array().unwrap().iter().map(|r| r[3].to_string()).collect();
    assert_eq!(smd_match, smd_bal);
}

#[test]
fn benchmark_lists_each_omitted_covariate() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", &trial_csv(&spread(0.5, 20), &spread(0.0, 10), &spread(0.0, 40)));
    let out = stdout(&run(&["benchmark-omit", "--data", s(&data), "--format", "tsv"]));
    let first: Vec<&str> = out.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(first, ["omitted", "(none)", "x", "z"]);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = run(&["test", "--data", s(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: cannot read"));

    let bad = write(&dir, "bad.csv", "subject_id,source,arm,outcome\na,internal,treated,1\nb,external,treated,2\n");
    let o = run(&["test", "--data", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("line 3"));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["test", "--data", s(&missing), "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["test", "--data", s(&missing), "--w", "1.5"]).status.code(), Some(2));

    let data = write(&dir, "d.csv", &trial_csv(&spread(0.5, 20), &spread(0.0, 10), &spread(0.0, 30)));
    let o = run(&["tipping", "--data", s(&data), "--direction", "two-sided"]);
    assert_eq!(o.status.code(), Some(1));
}
