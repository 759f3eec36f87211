use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use masolve_core::envelope::{build_envelope, heights_from_csv};
use masolve_core::measures::{QuadratureConfig, SlopeDensity};
use masolve_core::mesh::{build_mesh, BoundaryData, ConvexDomain};
use masolve_core::solver::vertex_mass;
use serde_json::{json, Value};
use tempfile::TempDir;

fn base_config() -> Value {
    json!({
        "domain": { "kind": "disk", "radius": 1.0 },
        "boundary": { "kind": "constant", "value": 0.5 },
        "slope_density": { "kind": "constant", "value": 1.0 },
        "source": { "density": { "kind": "constant", "value": 1.0 } },
        "mesh": { "n_boundary": 16, "spacing": 0.25 },
        "seed": 7
    })
}

struct Run {
    dir: TempDir,
    output: Output,
}

impl Run {
    fn code(&self) -> Option<i32> {
        self.output.status.code()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.out().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).expect("valid JSON")
    }
}

fn masolve() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_masolve"));
    cmd.env_remove("MASOLVE_THREADS");
    cmd
}

fn run_text(command: &str, config: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("config.json");
    std::fs::write(&path, config).expect("write config");
    let output = masolve()
        .arg(command)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(extra)
        .output()
        .expect("run masolve");
    Run { dir, output }
}

fn run(command: &str, config: &Value, extra: &[&str]) -> Run {
    run_text(command, &serde_json::to_string_pretty(config).unwrap(), extra)
}

#[test]
fn solve_writes_reports_and_balances_mass() {
    let r = run("solve", &base_config(), &[]);
    assert_eq!(r.code(), Some(0), "{}", r.stderr());
    let report = r.json("solve_report.json");
    assert_eq!(report["mass_balance"]["passed"], Value::Bool(true));
    assert!(r
        .read("vertices.csv")
        .starts_with("vertex_id,x,y,height,active,cell_area\n"));
    assert!(r.read("facets.csv").starts_with("facet_id,v0,v1,v2,px,py\n"));
}

#[test]
fn vertex_table_round_trip_reproduces_masses() {
    let r = run("solve", &base_config(), &[]);
    assert_eq!(r.code(), Some(0), "{}", r.stderr());
    let domain = ConvexDomain::unit_disk(BoundaryData::Constant { value: 0.5 });
    let mesh = build_mesh(&domain, 16, 0.25).unwrap();
    let heights = heights_from_csv(&mesh, &r.read("vertices.csv")).unwrap();
    let env = build_envelope(&mesh, heights).unwrap();
    let report = r.json("solve_report.json");
    let achieved: Vec<f64> = report["report"]["achieved"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let tol = report["report"]["mass_tol"].as_f64().unwrap();
    let r1 = SlopeDensity::Constant { value: 1.0 };
    for (i, &a) in achieved.iter().enumerate() {
        let m = vertex_mass(&env, i, &r1, &QuadratureConfig::default()).unwrap();
        assert!((m - a).abs() <= tol, "vertex {i}: {m} vs {a}");
    }
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let a = run("solve", &base_config(), &[]);
    let b = run("solve", &base_config(), &[]);
    assert_eq!(a.code(), Some(0));
    assert_eq!(b.code(), Some(0));
    assert_eq!(a.read("vertices.csv"), b.read("vertices.csv"));
    assert_eq!(a.read("facets.csv"), b.read("facets.csv"));
}

#[test]
fn equal_total_masses_exit_with_assumption_status() {
    let mut c = base_config();
    c["slope_density"] = json!({ "kind": "gauss_curvature", "q": 2.0 });
    c["boundary"] = json!({ "kind": "constant", "value": 0.0 });
    let r = run("solve", &c, &[]);
    assert_eq!(r.code(), Some(2));
    assert!(r.stderr().contains("mass gap"), "{}", r.stderr());
    assert!(!r.out().join("vertices.csv").exists());
}

#[test]
fn polygon_domain_is_rejected_as_not_strictly_convex() {
    let mut c = base_config();
    c["domain"] = json!({ "kind": "polygon", "vertices": [
        { "x": -1.0, "y": -1.0 }, { "x": 1.0, "y": -1.0 }, { "x": 1.0, "y": 1.0 }, { "x": -1.0, "y": 1.0 }
    ] });
    assert_eq!(run("solve", &c, &[]).code(), Some(2));
}

#[test]
fn unknown_field_reports_line_and_field() {
    let text = "{\n  \"domain\": { \"kind\": \"disk\", \"radius\": 1.0 },\n  \"boundary\": { \"kind\": \"constant\", \"value\": 0.5 },\n  \"slope_density\": { \"kind\": \"constant\", \"value\": 1.0 },\n  \"mesh\": { \"n_boundary\": 16, \"spacing\": 0.25, \"spcing\": 1 }\n}\n";
    let r = run_text("solve", text, &[]);
    assert_eq!(r.code(), Some(1));
    let err = r.stderr();
    assert!(err.contains("line 5"), "{err}");
    assert!(err.contains("mesh"), "{err}");
}

#[test]
fn syntax_error_reports_line() {
    let r = run_text("solve", "{\n  \"domain\": {\n    \"kind\": \"disk\",,\n  }\n}\n", &[]);
    assert_eq!(r.code(), Some(1));
    assert!(r.stderr().contains("line 3"), "{}", r.stderr());
}

#[test]
fn out_of_range_value_is_a_config_error() {
    let mut c = base_config();
    c["mesh"]["spacing"] = json!(-0.1);
    let r = run("solve", &c, &[]);
    assert_eq!(r.code(), Some(1));
    assert!(r.stderr().contains("spacing"), "{}", r.stderr());
}

#[test]
fn usage_errors_exit_with_config_status() {
    let missing = masolve().args(["solve", "--out", "/tmp/unused"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let unknown = masolve().args(["frobnicate"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn invalid_thread_variable_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, base_config().to_string()).unwrap();
    let out = masolve()
        .env("MASOLVE_THREADS", "many")
        .arg("solve")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MASOLVE_THREADS"));
}

#[test]
fn thread_flag_gives_identical_output() {
    let a = run("solve", &base_config(), &["--threads", "1"]);
    let b = run("solve", &base_config(), &["--threads", "3"]);
    assert_eq!(a.code(), Some(0));
    assert_eq!(b.code(), Some(0));
    assert_eq!(a.read("vertices.csv"), b.read("vertices.csv"));
}

#[test]
fn sweep_budget_exhaustion_exits_with_tolerance_status() {
    let mut c = base_config();
    c["solve"] = json!({ "max_sweeps": 2 });
    let r = run("solve", &c, &[]);
    assert_eq!(r.code(), Some(3), "{}", r.stderr());
    assert!(r.out().join("solve_report.json").exists());
    assert!(r.out().join("vertices.csv").exists());
}

#[test]
fn study_rows_have_decreasing_h() {
    let mut c = base_config();
    c["study"] = json!({ "delta": 0.2, "meshes": [
        { "n_boundary": 8, "spacing": 0.5 },
        { "n_boundary": 16, "spacing": 0.25 },
        { "n_boundary": 32, "spacing": 0.125 }
    ] });
    let r = run("study", &c, &[]);
    assert_eq!(r.code(), Some(0), "{}", r.stderr());
    let csv = r.read("study.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("h,n_boundary,spacing,linf_error,border_gap,runtime_ms")
    );
    let h: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(h.len(), 3);
    assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
    assert_eq!(r.json("study.json")["h_decreasing"], Value::Bool(true));
}

#[test]
fn study_requires_a_radial_problem() {
    let mut c = base_config();
    c["domain"] = json!({ "kind": "ellipse", "a": 1.2, "b": 0.8 });
    c["study"] = json!({ "delta": 0.2 });
    assert_eq!(run("study", &c, &[]).code(), Some(1));
}

#[test]
fn weak_solve_writes_every_level() {
    let mut c = base_config();
    c["delta_schedule"] = json!([0.4, 0.2, 0.1]);
    let r = run("solve-weak", &c, &[]);
    assert_eq!(r.code(), Some(0), "{}", r.stderr());
    for k in 0..3 {
        assert!(r.out().join(format!("level{k}_vertices.csv")).exists());
        assert!(r.out().join(format!("level{k}_facets.csv")).exists());
    }
    assert_eq!(r.json("weak_report.json")["monotone"], Value::Bool(true));
}

#[test]
fn verify_passes_on_the_disk() {
    let mut c = base_config();
    c["verify"] = json!({ "monte_carlo_samples": 400000, "cells": 3 });
    let r = run("verify", &c, &["--seed", "11"]);
    assert_eq!(r.code(), Some(0), "{}", r.stderr());
    assert!(r.out().join("verify.json").exists());
}

#[test]
fn tabulated_density_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::from("px,py,value\n");
    for j in 0..5 {
        for i in 0..5 {
            table += &format!("{},{},1.0\n", -4.0 + 2.0 * i as f64, -4.0 + 2.0 * j as f64);
        }
    }
    std::fs::write(dir.path().join("r.csv"), table).unwrap();
    let mut c = base_config();
    c["slope_density"] = json!({ "kind": "tabulated_csv", "path": "r.csv" });
    let path = dir.path().join("c.json");
    std::fs::write(&path, c.to_string()).unwrap();
    let out = masolve()
        .current_dir(std::env::temp_dir())
        .arg("solve")
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn shipped_configs_solve() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["disk.json", "cosine_atoms.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = masolve()
            .arg("solve")
            .arg("--config")
            .arg(root.join(name))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let out = masolve()
        .arg("solve")
        .arg("--config")
        .arg(root.join("mass_gap.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
