use std::path::Path;
use std::time::Instant;

use log::warn;
use masolve_core::envelope::build_envelope;
use masolve_core::measures::{target_masses, validate_assumptions, AssumptionReport, SourceDensity};
use masolve_core::mesh::build_mesh;
use masolve_core::output::write_atomic;
use masolve_core::solver::{self, SolveReport, WeakReport};
use masolve_core::verify::{self, ComparisonReport, MonteCarloArea};
use masolve_core::{BoundaryData, DomainShape, Mesh, SolveConfig, SolveError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Problem;
use crate::CliError;

/// Failed assumption checks that are reported without stopping a solve.
const ADVISORY_CHECKS: &[&str] = &["exponent_condition"];

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(CliError::io(&path))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write(dir, name, text.as_bytes())
}

fn mesh_for(p: &Problem, n_boundary: usize, spacing: f64) -> Result<Mesh, CliError> {
    Ok(build_mesh(&p.domain, n_boundary, spacing)?)
}

fn assumptions(p: &Problem) -> AssumptionReport {
    let c = &p.config;
    let report = validate_assumptions(&c.assumptions, &p.slope, &p.source, &p.domain, &c.quadrature);
    for name in report.failures() {
        if ADVISORY_CHECKS.contains(&name) {
            warn!("advisory assumption check `{name}` failed");
        } else if name != "mass_gap" {
            warn!("assumption check `{name}` failed");
        }
    }
    report
}

fn mass_gap_violation(report: &AssumptionReport) -> CliError {
    let g = &report.mass_gap;
    CliError::Assumption(format!(
        "mass gap: source mass {} must be below the total slope mass {}",
        g.source_mass,
        g.slope_total.map_or("∞".to_string(), |t| t.to_string())
    ))
}

#[derive(Serialize)]
struct MeshSummary {
    n_interior: usize,
    n_boundary: usize,
    h: f64,
    max_boundary_facet_diameter: f64,
}

impl MeshSummary {
    fn of(mesh: &Mesh) -> Self {
        Self {
            n_interior: mesh.n_interior(),
            n_boundary: mesh.n_boundary(),
            h: mesh.h(),
            max_boundary_facet_diameter: mesh.max_boundary_facet_diameter(),
        }
    }
}

#[derive(Serialize)]
struct MassBalance {
    sum_targets: f64,
    sum_achieved: f64,
    /// `n_interior · mass_tol`.
    bound: f64,
    passed: bool,
}

impl MassBalance {
    fn of(report: &SolveReport) -> Self {
        let sum_targets: f64 = report.targets.iter().sum();
        let sum_achieved: f64 = report.achieved.iter().sum();
        let bound = report.targets.len() as f64 * report.mass_tol;
        Self {
            sum_targets,
            sum_achieved,
            bound,
            passed: (sum_achieved - sum_targets).abs() <= bound,
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    command: &'static str,
    mesh: MeshSummary,
    assumptions: &'a AssumptionReport,
    mass_balance: MassBalance,
    runtime_ms: f64,
    report: &'a SolveReport,
}

fn write_solution(dir: &Path, prefix: &str, mesh: &Mesh, report: &SolveReport) -> Result<(), CliError> {
    let env = build_envelope(mesh, report.heights.clone()).map_err(SolveError::from)?;
    let mut vertices = Vec::new();
    env.write_vertices_csv(&mut vertices).expect("in-memory write");
    write(dir, &format!("{prefix}vertices.csv"), &vertices)?;
    let mut facets = Vec::new();
    env.write_facets_csv(&mut facets).expect("in-memory write");
    write(dir, &format!("{prefix}facets.csv"), &facets)
}

/// Splits a solver result into the report to write and the error to return.
fn split(result: Result<SolveReport, SolveError>) -> Result<(SolveReport, Option<CliError>), CliError> {
    match result {
        Ok(report) => Ok((report, None)),
        Err(SolveError::MaxSweepsExceeded {
            sweeps,
            residual,
            report,
        }) => Ok((
            *report,
            Some(CliError::Tolerance(format!(
                "max residual {residual:e} after {sweeps} sweeps"
            ))),
        )),
        Err(e) => Err(e.into()),
    }
}

pub fn solve(p: &Problem, out: &Path) -> Result<(), CliError> {
    let c = &p.config;
    let checks = assumptions(p);
    if !checks.mass_gap_ok() {
        return Err(mass_gap_violation(&checks));
    }
    let mesh = mesh_for(p, c.mesh.n_boundary, c.mesh.spacing)?;
    let started = Instant::now();
    let result = solver::solve_classical(&mesh, &p.domain, &p.slope, &p.source, &c.quadrature, &c.solve);
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    let (report, failure) = split(result)?;
    let balance = MassBalance::of(&report);
    write_solution(out, "", &mesh, &report)?;
    write_json(
        out,
        "solve_report.json",
        &SolveOutput {
            command: "solve",
            mesh: MeshSummary::of(&mesh),
            assumptions: &checks,
            mass_balance: balance,
            runtime_ms,
            report: &report,
        },
    )?;
    failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct WeakOutput<'a> {
    command: &'static str,
    mesh: MeshSummary,
    assumptions: &'a AssumptionReport,
    schedule: &'a [f64],
    /// Heights non-increasing across levels within `2·bisection_tol`.
    monotone: bool,
    gaps_decreasing: bool,
    runtime_ms: f64,
    report: &'a WeakReport,
}

/// Default δ schedule: four halvings from a fifth of the domain's inradius
/// proxy `diameter / 2`.
fn default_schedule(p: &Problem) -> Vec<f64> {
    let d0 = 0.4 * p.domain.diameter() / 2.0;
    (0..4).map(|k| d0 / (1 << k) as f64).collect()
}

pub fn solve_weak(p: &Problem, out: &Path) -> Result<(), CliError> {
    let c = &p.config;
    let checks = assumptions(p);
    if !checks.mass_gap_ok() {
        return Err(mass_gap_violation(&checks));
    }
    let schedule = c.delta_schedule.clone().unwrap_or_else(|| default_schedule(p));
    let mesh = mesh_for(p, c.mesh.n_boundary, c.mesh.spacing)?;
    let started = Instant::now();
    let weak = solver::solve_weak(
        &mesh,
        &p.domain,
        &p.slope,
        &p.source,
        &c.quadrature,
        &schedule,
        &c.solve,
    )?;
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    for (k, level) in weak.levels.iter().enumerate() {
        write_solution(out, &format!("level{k}_"), &mesh, &level.report)?;
    }
    let monotone = weak.is_monotone(2.0 * c.solve.bisection_tol);
    write_json(
        out,
        "weak_report.json",
        &WeakOutput {
            command: "solve-weak",
            mesh: MeshSummary::of(&mesh),
            assumptions: &checks,
            schedule: &schedule,
            monotone,
            gaps_decreasing: weak.level_gaps.windows(2).all(|w| w[1] < w[0]),
            runtime_ms,
            report: &weak,
        },
    )?;
    if !monotone {
        return Err(CliError::Tolerance(format!(
            "heights increased by {:e} between levels",
            weak.max_increase
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct StudyOutput<'a> {
    command: &'static str,
    f0: f64,
    boundary_value: f64,
    h_decreasing: bool,
    errors_decreasing: bool,
    bounds_hold: bool,
    table: &'a verify::ConvergenceTable,
}

pub fn study(p: &Problem, out: &Path) -> Result<(), CliError> {
    let c = &p.config;
    let study = c
        .study
        .as_ref()
        .ok_or_else(|| CliError::Config("field `study`: required by the study command".into()))?;
    let need = |what: &str| CliError::Config(format!("study: the exact radial solution needs {what}"));
    let DomainShape::Disk { center, radius } = c.domain else {
        return Err(need("a disk domain"));
    };
    if radius != 1.0 {
        return Err(need("a unit disk"));
    }
    let BoundaryData::Constant { value: g } = c.boundary else {
        return Err(need("constant boundary data"));
    };
    let f0 = match (&c.source.density, c.source.atoms.is_empty()) {
        (SourceDensity::Constant { value }, true) => *value,
        (SourceDensity::Zero, true) => 0.0,
        _ => return Err(need("a constant source density without atoms")),
    };
    let exact = verify::radial_exact_solution(&p.slope, f0, g, center, study.radial_samples)?;
    let meshes: Vec<(usize, f64)> = p.study_meshes().iter().map(|m| (m.n_boundary, m.spacing)).collect();
    let table = verify::convergence_study(
        &p.domain,
        &p.slope,
        &p.source,
        &exact,
        &meshes,
        study.delta,
        &c.quadrature,
        &c.solve,
    )?;
    write(out, "study.csv", table.to_csv().as_bytes())?;
    let summary = StudyOutput {
        command: "study",
        f0,
        boundary_value: g,
        h_decreasing: table.h_decreases(),
        errors_decreasing: table.errors_decrease(),
        bounds_hold: table.bounds_hold(),
        table: &table,
    };
    write_json(out, "study.json", &summary)?;
    if !(summary.h_decreasing && summary.errors_decreasing && summary.bounds_hold) {
        return Err(CliError::Tolerance(
            "study checks failed (h or error not strictly decreasing, or a bound exceeded)".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct CellCheck {
    vertex: usize,
    polygon_area: f64,
    monte_carlo: MonteCarloArea,
    relative_error: f64,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    command: &'static str,
    seed: u64,
    assumptions: &'a AssumptionReport,
    /// Failed assumption checks other than advisory ones.
    assumption_failures: Vec<&'static str>,
    comparison: Option<ComparisonReport>,
    cells: Vec<CellCheck>,
    passed: bool,
}

pub fn verify(p: &Problem, out: &Path) -> Result<(), CliError> {
    let c = &p.config;
    let checks = assumptions(p);
    let failures: Vec<&'static str> = checks
        .failures()
        .into_iter()
        .filter(|f| !ADVISORY_CHECKS.contains(f))
        .collect();
    let mut output = VerifyOutput {
        command: "verify",
        seed: c.seed,
        assumptions: &checks,
        assumption_failures: failures.clone(),
        comparison: None,
        cells: Vec::new(),
        passed: false,
    };
    if !checks.mass_gap_ok() {
        write_json(out, "verify.json", &output)?;
        return Err(mass_gap_violation(&checks));
    }

    let mesh = mesh_for(p, c.mesh.n_boundary, c.mesh.spacing)?;
    // comparison: μ's targets against randomly enlarged ones
    let low = target_masses(&mesh, &p.source, &c.quadrature);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let high: Vec<f64> = low.iter().map(|m| m * (1.0 + rng.gen::<f64>())).collect();
    let tight = SolveConfig {
        mass_tol: Some(c.verify.comparison_mass_tol),
        ..c.solve
    };
    let comparison = verify::comparison_check(&mesh, &p.domain, &p.slope, &low, &high, &c.quadrature, &tight)?;

    let (report, failure) = split(solver::solve_classical(
        &mesh,
        &p.domain,
        &p.slope,
        &p.source,
        &c.quadrature,
        &c.solve,
    ))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let env = build_envelope(&mesh, report.heights).map_err(SolveError::from)?;
    let active: Vec<usize> = (0..mesh.n_interior()).filter(|&i| env.is_active(i)).collect();
    let stride = active.len().div_ceil(c.verify.cells.max(1)).max(1);
    for (k, &i) in active.iter().step_by(stride).take(c.verify.cells).enumerate() {
        let polygon_area = env.subdifferential_cell(i).area();
        let mc = verify::monte_carlo_cell_area(&env, i, c.verify.monte_carlo_samples, c.seed.wrapping_add(k as u64));
        let relative_error = (mc.area - polygon_area).abs() / polygon_area;
        output.cells.push(CellCheck {
            vertex: i,
            polygon_area,
            monte_carlo: mc,
            relative_error,
            passed: relative_error <= c.verify.area_rel_tol,
        });
    }
    let oracles_ok = comparison.passed && output.cells.iter().all(|c| c.passed);
    output.comparison = Some(comparison);
    output.passed = oracles_ok && failures.is_empty();
    write_json(out, "verify.json", &output)?;
    if !failures.is_empty() {
        return Err(CliError::Assumption(format!("failed checks: {}", failures.join(", "))));
    }
    if !oracles_ok {
        return Err(CliError::Tolerance("comparison or cell-area oracle failed".into()));
    }
    Ok(())
}
