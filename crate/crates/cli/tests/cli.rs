use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extremal"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

/// Centre value of the minimal Gelfand solution at λ = 1, by shooting.
const GELFAND_CENTRE: f64 = 0.14053921440047;

#[test]
fn solve_gelfand_below_threshold() {
    let dir = TempDir::new().unwrap();
    let o = run(&["solve", "--lambda", "1"], &data("gelfand.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(dir.path().join("profile.csv"));
    assert_eq!(header, ["coord1", "u1"]);
    assert_eq!(rows.len(), 129);
    assert_eq!(rows[0], [0.0, 0.0]);
    assert_eq!(rows[128], [1.0, 0.0]);
    let centre = &rows[64];
    assert!((centre[0] - 0.5).abs() < 1e-12);
    assert!((centre[1] - GELFAND_CENTRE).abs() < 1e-4, "{}", centre[1]);

    let rec = json(dir.path().join("solve.json"));
    assert_eq!(rec["status"], "converged");
    assert_eq!(rec["profile"], "profile.csv");
    assert_eq!(rec["config"]["parameters"]["tol_lambda"], 1e-4);
    assert_eq!(rec["config"]["parameters"]["profile_levels"], 20);
    assert_eq!(rec["config"]["output"]["dir"], dir.path().to_str().unwrap());
}

#[test]
fn solve_above_threshold_diverges() {
    let dir = TempDir::new().unwrap();
    let o = run(&["solve", "--lambda", "10"], &data("gelfand.json"), dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(!dir.path().join("profile.csv").exists());
    let rec = json(dir.path().join("solve.json"));
    assert!(rec["status"] == "diverged" || rec["status"] == "saturated", "{}", rec["status"]);
}

#[test]
fn iteration_cap_is_ambiguous() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("capped.json");
    fs::write(
        &cfg,
        r#"{"domain": {"kind": "interval", "resolution": 65}, "nonlinearity": {"kind": "gelfand"},
            "parameters": {"max_iter": 3}}"#,
    )
    .unwrap();
    let o = run(&["solve", "--lambda", "1"], &cfg, dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert_eq!(json(dir.path().join("solve.json"))["status"], "iteration-cap");
}

#[test]
fn malformed_config_is_located() {
    let dir = TempDir::new().unwrap();
    let o = run(&["solve", "--lambda", "1"], &data("malformed.json"), dir.path());
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("parameters.tol"), "{err}");
    assert!(err.contains("line 5"), "{err}");

    let o = run(&["solve", "--lambda", "1"], &data("missing.json"), dir.path());
    assert_eq!(code(&o), 1);
    let o = run(&["solve", "--lambda", "1,2"], &data("gelfand.json"), dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn trace_requires_a_system() {
    let dir = TempDir::new().unwrap();
    let o = run(&["trace"], &data("gelfand.json"), dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("trace requires m ≥ 2"), "{}", stderr(&o));
    assert!(json(dir.path().join("manifest.json"))["error"].is_string());
}

#[test]
fn trace_pair_is_nonincreasing() {
    let dir = TempDir::new().unwrap();
    let o = run(&["trace", "--jobs", "2"], &data("pair.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(dir.path().join("hypersurface.csv"));
    assert_eq!(header, ["sigma1", "lambda_star", "lambda_lo", "lambda_hi", "eta1", "l1_last"]);
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
        assert!(w[1][1] <= w[0][1] * (1.0 + 1e-4), "{rows:?}");
    }
    assert!(rows.iter().all(|r| r[2] < r[3]));
    let manifest = json(dir.path().join("manifest.json"));
    assert_eq!(manifest["failed"], 0);
    assert_eq!(manifest["config"]["parameters"]["sigma_points"], 5);
}

#[test]
fn trace_partial_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("partial.json");
    fs::write(
        &cfg,
        r#"{"domain": {"kind": "interval", "resolution": 33},
            "nonlinearity": {"kind": "exp-shift", "beta": [1, 1]},
            "parameters": {"sigma": [[0.25], [0.5], [-1], [1], [2]], "stability": false, "cross_check": false}}"#,
    )
    .unwrap();
    let o = run(&["trace"], &cfg, dir.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let (_, rows) = csv_rows(dir.path().join("hypersurface.csv"));
    assert_eq!(rows.len(), 4);
    let manifest = json(dir.path().join("manifest.json"));
    assert_eq!(manifest["failed"], 1);
    assert!(manifest["samples"][2]["error"].is_string());
    assert!(manifest["samples"][1]["sample"]["lambda_star_est"].is_number());
}

#[test]
fn spectral_linear_is_pi_squared() {
    let dir = TempDir::new().unwrap();
    let o = run(&["spectral"], &data("linear.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = json(dir.path().join("spectral.json"));
    let l = rec["lambda_star"].as_f64().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((l - pi2).abs() < 1e-3 * pi2, "{l}");
    let (header, rows) = csv_rows(dir.path().join("eigenfield.csv"));
    assert_eq!(header, ["coord1", "u1"]);
    assert_eq!(rows.len(), 129);
}

#[test]
fn spectral_theta_inverts_h() {
    let dir = TempDir::new().unwrap();
    let o = run(&["spectral"], &data("alpha.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = json(dir.path().join("spectral.json"));
    let theta = rec["theta"].as_array().unwrap();
    assert_eq!(theta.len(), 3);
    for t in theta {
        assert!(t["h_residual"].as_f64().unwrap() < 1e-10, "{t}");
    }
}

#[test]
fn spectral_rejects_unbalanced_alpha() {
    let dir = TempDir::new().unwrap();
    let o = run(&["spectral"], &data("bad_alpha.json"), dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("must multiply to 1"), "{}", stderr(&o));
}

#[test]
fn stability_of_gelfand_branch() {
    let dir = TempDir::new().unwrap();
    let o = run(&["stability", "--lambda", "1"], &data("gelfand.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let low = json(dir.path().join("stability.json"));
    let eta_low = low["eta1"].as_f64().unwrap();
    assert!(eta_low > 0.0);
    assert_eq!(low["stable"], true);
    assert_eq!(low["probe"]["violations"], 0);
    assert!(low["warnings"].as_array().unwrap().is_empty());
    assert!(dir.path().join("eigenfield.csv").exists());

    let near = TempDir::new().unwrap();
    let o = run(&["stability", "--lambda", "3.4"], &data("gelfand.json"), near.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eta_near = json(near.path().join("stability.json"))["eta1"].as_f64().unwrap();
    assert!(eta_near > 0.0 && eta_near < eta_low, "{eta_near} vs {eta_low}");
}

#[test]
fn stability_flags_reducible_map() {
    let dir = TempDir::new().unwrap();
    let o = run(&["stability"], &data("decoupled.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = json(dir.path().join("stability.json"));
    assert_eq!(rec["irreducibility"]["passed"], false);
    let warnings = rec["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("condition (D) failed")));
}

#[test]
fn verify_exit_reflects_conditions() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify"], &data("pair.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = json(dir.path().join("conditions.json"));
    assert_eq!(rec["passed"], true);
    assert!(rec["report"]["coupling"][0]["m_kappa"].as_f64().unwrap().is_finite());

    let o = run(&["verify"], &data("decoupled.json"), dir.path());
    assert_eq!(code(&o), 2);
    let rec = json(dir.path().join("conditions.json"));
    assert_eq!(rec["report"]["irreducibility"]["passed"], false);
    assert_eq!(rec["report"]["coupling"][0]["passed"], false);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let files = ["hypersurface.csv", "manifest.json", "eigenfield.csv", "profile.csv", "stability.json"];
    let mut runs = Vec::new();
    for jobs in ["1", "3"] {
        let o = run(&["trace", "--jobs", jobs, "--seed", "7"], &data("pair.json"), dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = run(&["stability", "--lambda", "0.5", "--seed", "7"], &data("pair.json"), dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        runs.push(files.map(|f| fs::read(dir.path().join(f)).unwrap()));
    }
    for (k, f) in files.iter().enumerate() {
        assert!(runs[0][k] == runs[1][k], "{f} differs between runs");
    }
    assert_eq!(json(dir.path().join("stability.json"))["config"]["parameters"]["seed"], 7);
}
