use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nh_stab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nh-stab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    footer: Vec<String>,
}

impl Csv {
    fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut footer = Vec::new();
        for line in lines {
            if line.starts_with('#') {
                footer.push(line.to_string());
            } else {
                rows.push(line.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect());
            }
        }
        Csv { header, rows, footer }
    }

    fn column(&self, name: &str) -> Vec<f64> {
        let i = self.header.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[i]).collect()
    }

    fn footer_tau(&self) -> Option<f64> {
        self.footer
            .iter()
            .find_map(|f| f.strip_prefix("# singularity tau="))
            .map(|v| v.parse().unwrap())
    }
}

fn sweep_table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const MODEL1_FIG1B: &str = r#"{
  "schema_version": 1,
  "model": {"kind": "model1", "lambda_tilde": 2.0},
  "perturbation": {"delta1": 0.01, "delta2": -0.02},
  "evolution": {"t_end": 10.0, "dt": 0.001, "record_stride": 10}
}"#;

#[test]
fn evolve_model1_rises_then_decays() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m1.json", MODEL1_FIG1B);
    let out = nh_stab(&["evolve", s(&cfg), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = Csv::parse(std::str::from_utf8(&out.stdout).unwrap());
    assert_eq!(
        csv.header,
        ["tau", "S_L", "purity", "purity_rate", "rho_00_re", "rho_01_re", "rho_01_im", "rho_11_re"]
    );
    assert_eq!(csv.rows.len(), 1001);
    assert!(csv.footer.is_empty());
    let s_l: Vec<f64> = csv.column("S_L").iter().map(|x| x.abs()).collect();
    let peak = s_l.iter().copied().fold(0.0, f64::max);
    assert!(peak > s_l[0]);
    assert!(*s_l.last().unwrap() < 1e-4);
}

#[test]
fn evolve_hermitian_custom_keeps_entropy() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "herm.json",
        r#"{
          "schema_version": 1,
          "model": {"kind": "custom",
                    "h_plus": [[0.3,0],[1,0.2],[1,-0.2],[-0.3,0]],
                    "gamma": [[0,0],[0,0],[0,0],[0,0]]},
          "reference_state": {"vector": [[1,0],[0,0]]},
          "perturbation": {"delta1": 0.05, "delta2": -0.1},
          "evolution": {"t_end": 10.0}
        }"#,
    );
    let out = nh_stab(&["evolve", s(&cfg), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = Csv::parse(std::str::from_utf8(&out.stdout).unwrap());
    let s_l = csv.column("S_L");
    assert!(s_l.iter().all(|x| (x - s_l[0]).abs() <= 1e-10));
}

#[test]
fn evolve_model2_reports_singularity() {
    let dir = TempDir::new().unwrap();
    for rep in ["normalized_rho", "omega_then_normalize"] {
        let cfg = write_config(
            &dir,
            "m2.json",
            &format!(
                r#"{{"schema_version": 1,
                    "model": {{"kind": "model2", "eta_tilde": 2.0}},
                    "perturbation": {{"delta1": 0.01, "delta2": 0.01}},
                    "evolution": {{"t_end": 3.0, "representation": "{rep}"}}}}"#
            ),
        );
        let target = dir.path().join("m2.csv");
        let out = nh_stab(&["evolve", s(&cfg), "--out", s(&target), "--quiet"]);
        assert_eq!(out.status.code(), Some(2), "{rep}");
        let csv = Csv::parse(&std::fs::read_to_string(&target).unwrap());
        let tau = csv.footer_tau().expect("singularity footer");
        assert!((tau - 0.57689).abs() < 1e-3, "{rep}: {tau}");
        assert!(csv.rows.iter().all(|r| r.iter().all(|v| v.is_finite())));
        assert!(*csv.column("tau").last().unwrap() <= tau);
    }
}

#[test]
fn evolve_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m1.json", MODEL1_FIG1B);
    let a = nh_stab(&["evolve", s(&cfg), "--quiet"]);
    let b = nh_stab(&["evolve", s(&cfg), "--quiet"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(&dir, "bad.json", r#"{"schema_version": 1, "model": {"kind": "model9"}}"#);
    assert_eq!(nh_stab(&["evolve", s(&bad)]).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(nh_stab(&["evolve", s(&missing)]).status.code(), Some(1));
    assert_eq!(nh_stab(&["frobnicate"]).status.code(), Some(1));
    let unwritable = dir.path().join("no/such/dir/out.csv");
    let cfg = write_config(&dir, "m1.json", MODEL1_FIG1B);
    let out = nh_stab(&["evolve", s(&cfg), "--out", s(&unwritable)]);
    assert_eq!(out.status.code(), Some(1));
}

fn stability(dir: &TempDir, model: &str) -> (Option<i32>, Value) {
    let cfg = write_config(
        dir,
        "stab.json",
        &format!(r#"{{"schema_version": 1, "model": {model}}}"#),
    );
    let out = nh_stab(&["stability", s(&cfg), "--quiet"]);
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code(), v)
}

#[test]
fn stability_reports() {
    let dir = TempDir::new().unwrap();
    let (code, v) = stability(&dir, r#"{"kind": "model1", "lambda_tilde": -0.5}"#);
    assert_eq!(code, Some(0));
    assert_eq!(v["lambda_tls"], -2.0);
    assert_eq!(v["classification"], "LocallyStable");
    assert_eq!(v["lyapunov"]["status"], "certified");
    assert!((v["lyapunov"]["p"][0][0].as_f64().unwrap() - 0.25).abs() < 1e-14);

    let (_, v) = stability(&dir, r#"{"kind": "model1", "lambda_tilde": 2.0}"#);
    assert_eq!(v["lambda_tls"], 8.0);
    assert_eq!(v["classification"], "LocallyUnstable");

    let (_, v) = stability(
        &dir,
        r#"{"kind": "custom", "h_plus": [[0,0],[-1,0],[-1,0],[0,0]],
            "gamma": [[0,0],[0,0],[0,0],[0,0]]}, "reference_state": {"vector": [[1,0],[0,0]]}"#,
    );
    assert_eq!(v["classification"], "Marginal");
    assert_eq!(v["lambda_tls"], 0.0);
}

#[test]
fn stability_three_level_and_errors() {
    let dir = TempDir::new().unwrap();
    let (code, v) = stability(
        &dir,
        r#"{"kind": "custom",
            "h": [[1,-0.1],[0.3,0],[0,0], [0.3,0],[0,-0.5],[0.2,0], [0,0],[0.2,0],[-1,-0.2]]},
            "reference_state": {"vector": [[1,0],[0,0],[0,0]]}"#,
    );
    assert_eq!(code, Some(0));
    assert_eq!(v["dim"], 4);
    assert!(v["lambda_tls"].is_null());

    let (code, _) = stability(
        &dir,
        r#"{"kind": "custom", "h": [[0,0],[1,0],[1,0],[0,-1]]},
            "reference_state": {"matrix": [[0.5,0],[0,0],[0,0],[0.5,0]]}"#,
    );
    assert_eq!(code, Some(1));
}

fn figure(id: &str) -> (TempDir, Value) {
    let dir = TempDir::new().unwrap();
    let out = nh_stab(&["figure", id, "--out", s(dir.path()), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let manifest = std::fs::read_to_string(dir.path().join(id).join("manifest.json")).unwrap();
    let v = serde_json::from_str(&manifest).unwrap();
    (dir, v)
}

fn curve_csv(dir: &TempDir, id: &str, curve: &Value) -> Csv {
    let file = curve["file"].as_str().unwrap();
    Csv::parse(&std::fs::read_to_string(dir.path().join(id).join(file)).unwrap())
}

#[test]
fn figure1_bundle() {
    let (dir, m) = figure("fig1");
    let curves = m["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 20);
    for c in curves {
        let csv = curve_csv(&dir, "fig1", c);
        assert_eq!(csv.rows.len(), 1001);
        let num = csv.column("S_L");
        let ana = csv.column("S_L_analytic");
        let dev = num.iter().zip(&ana).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-8, "{c}: {dev:e}");
        assert_eq!(c["singular"], false);
        match c["panel"].as_str().unwrap() {
            // Suppression.
            "b" | "d" => assert!(num.last().unwrap().abs() < 1e-4, "{c}"),
            // Bounded oscillation that does not decay.
            _ => {
                let late = num[500..].iter().map(|x| x.abs()).fold(0.0, f64::max);
                assert!(late > 0.5 * num[0].abs() && late < 1.0, "{c}");
            }
        }
    }
}

#[test]
fn figure2_bundle() {
    let (dir, m) = figure("fig2");
    let curves = m["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 10);
    let mut failures = Vec::new();
    for c in curves {
        let panel_b = c["panel"] == "b";
        let d1 = c["delta1"].as_f64().unwrap();
        assert_eq!(c["singular"], panel_b && d1 >= 0.01, "{c}");
        let csv = curve_csv(&dir, "fig2", c);
        let cutoff = c["singularity_tau"].as_f64().map_or(f64::INFINITY, |t| t - 0.05);
        let tau = csv.column("tau");
        let num = csv.column("S_L");
        let ana = csv.column("S_L_analytic");
        let dev = (0..tau.len())
            .filter(|&i| tau[i] <= cutoff)
            .map(|i| (num[i] - ana[i]).abs())
            .fold(0.0, f64::max);
        if dev > 1e-8 {
            failures.push(format!("panel {} δ1={d1}: {dev:.2e}", c["panel"]));
        }
        if c["singular"] == true {
            assert!(csv.footer_tau().is_some());
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("; "));
}

#[test]
fn sweep_lambda_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{"schema_version": 1,
            "model": {"kind": "model1", "lambda_tilde": 0.0},
            "perturbation": {"delta1": 0.01, "delta2": 0.01},
            "evolution": {"t_end": 2.0},
            "sweep": {"parameter": "lambda_tilde", "start": -2.0, "stop": 2.0, "step": 0.5}}"#,
    );
    let out = nh_stab(&["sweep", s(&cfg), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::str::from_utf8(&out.stdout).unwrap();
    assert!(text.starts_with("lambda_tilde,lambda_tls,classification,S_L_end,singularity_tau\n"));
    let rows = sweep_table(text);
    assert_eq!(rows.len(), 9);
    for r in &rows {
        let lt: f64 = r[0].parse().unwrap();
        let lambda: f64 = r[1].parse().unwrap();
        assert!((lambda - 4.0 * lt).abs() < 1e-12);
        let expected = if lt < 0.0 {
            "LocallyStable"
        } else if lt > 0.0 {
            "LocallyUnstable"
        } else {
            "Marginal"
        };
        assert_eq!(r[2], expected);
        assert!(r[4].is_empty());
    }
    let again = nh_stab(&["sweep", s(&cfg), "--quiet"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn sweep_eta_grid_marks_singularities() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{"schema_version": 1,
            "model": {"kind": "model2", "eta_tilde": 1.0},
            "perturbation": {"delta1": 0.01, "delta2": 0.01},
            "evolution": {"t_end": 3.0},
            "sweep": {"parameter": "eta_tilde", "values": [-2.0, -1.0, 1.0, 2.0]}}"#,
    );
    let out = nh_stab(&["sweep", s(&cfg), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    for r in sweep_table(std::str::from_utf8(&out.stdout).unwrap()) {
        let et: f64 = r[0].parse().unwrap();
        if et > 0.0 {
            let tau: f64 = r[4].parse().unwrap();
            let expected = (1.0f64 / 1.02).atanh() / (2.0 * et);
            assert!((tau - expected).abs() < 1e-3, "η̃={et}: {tau} vs {expected}");
        } else {
            assert!(r[4].is_empty());
        }
    }
}

#[test]
fn sweep_empty_grid_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{"schema_version": 1, "model": {"kind": "model1", "lambda_tilde": 0.0},
            "sweep": {"parameter": "lambda_tilde", "values": []}}"#,
    );
    assert_eq!(nh_stab(&["sweep", s(&cfg)]).status.code(), Some(1));
}
