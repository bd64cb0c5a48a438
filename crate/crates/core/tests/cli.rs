use std::collections::BTreeMap;
use std::fs;
use std::process::Command;

use assist_tomo::cli::{write_counts, Scheme};
use assist_tomo::coherent::{first_determinant_zero, time_grid, JcParams};
use assist_tomo::measurement::{sample, Distribution, Outcome, ShotRecord};
use assist_tomo::oracle::JcOracle;
use assist_tomo::quantum::BlochVector;
use assist_tomo::spin::SpinScheme;
use num_complex::Complex64 as C64;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_assist-tomo"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).expect("valid JSON")
}

fn bloch(v: &Value) -> [f64; 3] {
    [
        v["x"].as_f64().unwrap(),
        v["y"].as_f64().unwrap(),
        v["z"].as_f64().unwrap(),
    ]
}

#[test]
fn fig1_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1.csv");
    let (code, stdout, _) = run(&["fig1", "--output-path", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 3);
    let csv = fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "# schema=assist-tomo.fig1.v1");
    assert_eq!(lines.next().unwrap(), "t,delta_a1,delta_a4,delta_a9");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2000);
    assert!((rows[0][0] - 0.1).abs() < 1e-12);
    assert!(rows[0][1..].iter().all(|d| d.abs() < 1e-3));
    assert!((rows[1999][0] - 200.0).abs() < 1e-9);
    let peak = |c: usize| rows.iter().fold(0.0f64, |m, r| m.max(r[c].abs()));
    assert!(peak(1) < peak(2) && peak(2) < peak(3));
}

#[test]
fn fig1_usage_errors() {
    assert_eq!(run(&["fig1", "--t-steps", "1"]).0, 2);
    assert_eq!(run(&["fig1", "--t-start", "10", "--t-end", "5"]).0, 2);
    assert_eq!(run(&["fig1", "--scheme", "spin"]).0, 2);
    assert_eq!(run(&["fig1", "--no-such-flag"]).0, 2);
    assert_eq!(run(&[]).0, 2);
}

#[test]
fn fig1_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"alpha_sq": [2.0], "t_steps": 10, "t_end": 50.0}"#).unwrap();
    let (code, stdout, _) = run(&["fig1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[1], "t,delta_a2");
    assert_eq!(lines.len(), 12);
    assert!(lines[11].starts_with("50,") || lines[11].starts_with("50.0,"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["reconstruct", "--help"]).0, 0);
}

#[test]
fn spin_demo_passes() {
    let (code, stdout, _) = run(&["spin-demo", "--json"]);
    assert_eq!(code, 0);
    let v = json(&stdout);
    assert_eq!(v["schema"], "assist-tomo.spin-demo.v1");
    assert_eq!(v["passed"], true);
    let det = v["details"]["determinant"].as_f64().unwrap().abs();
    assert!((det - 0.0481125).abs() < 1e-7);
    for row in v["details"]["cosines"]
        .as_array()
        .unwrap()
        .iter()
        .enumerate()
    {
        for (j, c) in row.1.as_array().unwrap().iter().enumerate() {
            if j != row.0 {
                assert!((c.as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-10);
            }
        }
    }
    let (code, text, _) = run(&["spin-demo"]);
    assert_eq!(code, 0);
    assert!(text.contains("roundtrip_error"));
}

#[test]
fn noiseless_coherent_reconstruction() {
    let (code, stdout, _) = run(&["reconstruct"]);
    assert_eq!(code, 0);
    let v = json(&stdout);
    assert_eq!(v["schema"], "assist-tomo.reconstruct.v1");
    assert_eq!(v["config"]["gamma"], 0.1);
    let est = bloch(&v["estimate"]);
    for (a, b) in est.iter().zip([0.3, -0.5, 0.2]) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!(v["determinant"].as_f64().unwrap().abs() > 0.05);
}

#[test]
fn noisy_coherent_reconstruction_within_ellipsoid() {
    let (code, stdout, _) = run(&["reconstruct", "--shots", "100000", "--seed", "17"]);
    assert_eq!(code, 0);
    let v = json(&stdout);
    let est = bloch(&v["estimate"]);
    let cov: Vec<Vec<f64>> = v["covariance"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            r.as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect()
        })
        .collect();
    let c = nalgebra::Matrix3::from_fn(|i, j| cov[i][j]);
    let d = nalgebra::Vector3::new(est[0] - 0.3, est[1] + 0.5, est[2] - 0.2);
    let mahalanobis = (d.transpose() * c.try_inverse().unwrap() * d)[(0, 0)].sqrt();
    assert!(mahalanobis < 5.0, "{mahalanobis}");
    assert_eq!(v["shots"], 100000);
    assert_eq!(v["rng"], "ChaCha8");
}

#[test]
fn reconstruction_is_deterministic() {
    let a = run(&["reconstruct", "--shots", "5000", "--seed", "3"]);
    let b = run(&["reconstruct", "--shots", "5000", "--seed", "3"]);
    assert_eq!(a, b);
}

#[test]
fn zero_of_determinant_exits_three() {
    let params = JcParams::with_mean_photons(0.1, 0.1, 1.0).unwrap();
    let t = first_determinant_zero(&params, &time_grid(0.0, 200.0, 400))
        .unwrap()
        .unwrap();
    let (code, stdout, _) = run(&["reconstruct", "--t-measure", &format!("{t}")]);
    assert_eq!(code, 3);
    let v = json(&stdout);
    assert!(v["determinant"].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(run(&["reconstruct", "--t-measure", "0"]).0, 3);
}

#[test]
fn coherent_counts_file() {
    let params = JcParams::new(0.1, 0.1, C64::new(1.0, 0.0), 30).unwrap();
    let rho = BlochVector::new(-0.2, 0.4, 0.5);
    let t = 7.5;
    let dist = Distribution::from_coherent(
        &JcOracle::new(&params)
            .unwrap()
            .joint_distribution(t, &rho)
            .unwrap(),
    )
    .unwrap();
    let record = sample(&dist, 200_000, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.jsonl");
    fs::write(&path, write_counts(&record, Scheme::Coherent)).unwrap();
    let (code, stdout, _) = run(&[
        "reconstruct",
        "--input",
        path.to_str().unwrap(),
        "--t-measure",
        "7.5",
    ]);
    assert_eq!(code, 0);
    let v = json(&stdout);
    assert_eq!(v["source"], "counts-file");
    assert!(v.get("truth").is_none());
    let est = bloch(&v["estimate"]);
    assert!(
        (est[0] + 0.2).abs() < 0.05 && (est[1] - 0.4).abs() < 0.05 && (est[2] - 0.5).abs() < 0.05
    );
}

#[test]
fn spin_counts_file() {
    let scheme = SpinScheme::optimal();
    let rho = BlochVector::new(0.5, 0.1, -0.6);
    let dist = Distribution::from_spin(&scheme.forward_probabilities(&rho).unwrap()).unwrap();
    let record = sample(&dist, 1_000_000, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spin.jsonl");
    fs::write(&path, write_counts(&record, Scheme::Spin)).unwrap();
    let (code, stdout, _) = run(&[
        "reconstruct",
        "--scheme",
        "spin",
        "--input",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let est = bloch(&json(&stdout)["estimate"]);
    for (a, b) in est.iter().zip([0.5, 0.1, -0.6]) {
        assert!((a - b).abs() < 0.01);
    }
}

#[test]
fn malformed_counts_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(&path, "{\"i\": 1, \"n\": 0, \"count\": 5}\nnot json\n").unwrap();
    assert_eq!(
        run(&["reconstruct", "--input", path.to_str().unwrap()]).0,
        2
    );
    fs::write(&path, "{\"i\": 2, \"n\": 0, \"count\": 5}\n").unwrap();
    assert_eq!(
        run(&["reconstruct", "--input", path.to_str().unwrap()]).0,
        2
    );
    fs::write(&path, "").unwrap();
    assert_eq!(
        run(&["reconstruct", "--input", path.to_str().unwrap()]).0,
        2
    );
    assert_eq!(
        run(&["reconstruct", "--input", "/nonexistent/counts.jsonl"]).0,
        2
    );
    let mut counts = BTreeMap::new();
    counts.insert(Outcome::new(1, 0), 3);
    fs::write(
        &path,
        write_counts(
            &ShotRecord::from_counts(counts, None).unwrap(),
            Scheme::Coherent,
        ),
    )
    .unwrap();
    assert_eq!(
        run(&[
            "reconstruct",
            "--scheme",
            "spin",
            "--input",
            path.to_str().unwrap()
        ])
        .0,
        2
    );
}

#[test]
fn validate_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("validate.json");
    let (code, stdout, _) = run(&["validate", "--output-path", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("all checks passed"));
    let v = json(&fs::read_to_string(&path).unwrap());
    assert_eq!(v["schema"], "assist-tomo.validate.v1");
    assert_eq!(v["passed"], true);
    assert_eq!(v["details"]["grid_points"], 200);
}

#[test]
fn validate_reports_truncation_failure() {
    let (code, stdout, stderr) = run(&["validate", "--n-max", "5", "--alpha-re", "3", "--json"]);
    assert_eq!(code, 1);
    let v = json(&stdout);
    assert_eq!(v["passed"], false);
    assert_eq!(v["checks"][0]["name"], "truncation");
    assert!(stderr.contains("truncation"));
}

#[test]
fn validate_sigma_z_rank() {
    let (code, stdout, _) = run(&[
        "validate",
        "--triplet",
        "sigma-z",
        "--t-steps",
        "20",
        "--json",
    ]);
    assert_eq!(code, 0);
    let v = json(&stdout);
    assert!(v["details"]["rank_report"]["rank"].as_u64().unwrap() < 3);
}
