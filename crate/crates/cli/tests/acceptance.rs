//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use masolve_core::envelope::{build_envelope, HeightField};
use masolve_core::geometry::convex_hull_2d;
use masolve_core::measures::{target_masses, QuadratureConfig, SlopeDensity, SourceMeasure};
use masolve_core::mesh::{build_mesh, BoundaryData, ConvexDomain, Mesh};
use masolve_core::solver::{a_priori_bounds, solve_classical, solve_discrete, solve_weak, SolveConfig, SweepOrder};
use masolve_core::verify::{self, border_gap};
use masolve_core::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("cone fixture closed form", cone_fixture),
        ("cell area vs Monte-Carlo membership", oracle_equivalence),
        ("radial solution, R = 1", radial_unit),
        ("radial solution, Gaussian-curvature density", radial_gaussian),
        ("mass balance and mass-gap refusal", mass_balance),
        ("discrete comparison principle", comparison),
        ("a priori height bounds", a_priori),
        ("weak Dirichlet monotonicity", weak_monotonicity),
        ("sweep-order independence", order_independence),
        ("border convergence", border_convergence),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let status = if result.passed { "PASS" } else { "FAIL" };
        failures += usize::from(!result.passed);
        println!(
            "{status} {:>2} {name}: {} [{:.2} s]",
            k + 1,
            result.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

fn unit() -> SlopeDensity {
    SlopeDensity::Constant { value: 1.0 }
}

fn gaussian() -> SlopeDensity {
    SlopeDensity::GaussCurvature { q: 2.0 }
}

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn disk(g: f64) -> ConvexDomain {
    ConvexDomain::unit_disk(BoundaryData::Constant { value: g })
}

/// The solver's disk fixture: unit disk, 32 boundary vertices, spacing 0.15.
fn disk_mesh(domain: &ConvexDomain) -> Mesh {
    build_mesh(domain, 32, 0.15).expect("disk mesh")
}

fn tight() -> SolveConfig {
    SolveConfig {
        mass_tol: Some(1e-14),
        ..SolveConfig::default()
    }
}

fn square_mesh() -> Mesh {
    let corners = vec![
        Point2::new(-1.0, -1.0),
        Point2::new(1.0, -1.0),
        Point2::new(1.0, 1.0),
        Point2::new(-1.0, 1.0),
    ];
    Mesh::new(vec![Point2::ORIGIN], corners).expect("square mesh")
}

fn cone_fixture() -> Outcome {
    let started = Instant::now();
    let mesh = square_mesh();
    let report = solve_discrete(
        &mesh,
        HeightField::new(vec![1.0], vec![0.0; 4]),
        &[0.08],
        &unit(),
        &q(),
        &SolveConfig::default(),
    )
    .expect("cone solve");
    let z = report.heights.interior()[0];
    let env = build_envelope(&mesh, report.heights).expect("cone envelope");
    let area = env.subdifferential_cell(0).area();
    let secs = started.elapsed().as_secs_f64();
    outcome(
        (z + 0.2).abs() <= 1e-6 && (area - 0.08).abs() <= 1e-9 && secs < 1.0,
        format!("height {z:.9} (tol 1e-6), cell area {area:.12} (tol 1e-9), {secs:.3} s (limit 1 s)"),
    )
}

fn random_mesh(rng: &mut ChaCha8Rng) -> Mesh {
    let m = rng.gen_range(5..=12);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let boundary: Vec<Point2> = (0..m)
        .map(|j| {
            let th = phase + 2.0 * PI * (j as f64 + rng.gen_range(-0.2..0.2)) / m as f64;
            Point2::new(th.cos(), th.sin())
        })
        .collect();
    let polygon = convex_hull_2d(&boundary).expect("boundary hull");
    let target = rng.gen_range(1..=50 - m);
    let mut interior: Vec<Point2> = Vec::new();
    let mut tries = 0;
    while interior.len() < target && tries < 10_000 {
        tries += 1;
        let p = Point2::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
        if polygon.inner_distance(p) > 0.05 && interior.iter().all(|q| q.dist(p) > 0.05) {
            interior.push(p);
        }
    }
    Mesh::new(interior, boundary).expect("random mesh")
}

fn random_heights(mesh: &Mesh, rng: &mut ChaCha8Rng) -> HeightField {
    let (a, b, c) = (
        rng.gen_range(0.3..2.0),
        rng.gen_range(0.3..2.0),
        rng.gen_range(-0.2..0.2),
    );
    let quad = |x: Point2| 0.5 * (a * x.x * x.x + b * x.y * x.y) + c * x.x * x.y;
    let interior = mesh
        .interior_vertices()
        .iter()
        .map(|&x| quad(x) + rng.gen_range(-0.02..=0.02))
        .collect();
    let boundary = mesh.boundary_vertices().iter().map(|&x| quad(x)).collect();
    HeightField::new(interior, boundary)
}

fn oracle_equivalence() -> Outcome {
    const ENVELOPES: usize = 24;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut max_vertices = 0;
    for k in 0..ENVELOPES {
        let mesh = random_mesh(&mut rng);
        max_vertices = max_vertices.max(mesh.n_vertices());
        let env = build_envelope(&mesh, random_heights(&mesh, &mut rng)).expect("random envelope");
        // the largest active cell of each envelope
        let Some(i) = (0..mesh.n_interior()).filter(|&i| env.is_active(i)).max_by(|&a, &b| {
            let (ca, cb) = (env.subdifferential_cell(a).area(), env.subdifferential_cell(b).area());
            ca.total_cmp(&cb)
        }) else {
            continue;
        };
        let area = env.subdifferential_cell(i).area();
        let mc = verify::monte_carlo_cell_area(&env, i, 1_000_000, 1_000 + k as u64);
        worst = worst.max((mc.area - area).abs() / area);
        checked += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        checked >= 20 && max_vertices <= 50 && worst <= 0.01 && secs < 60.0,
        format!(
            "{checked} envelopes (≤ {max_vertices} vertices), worst relative error {worst:.3e} (tol 1e-2), {secs:.1} s (limit 60 s)"
        ),
    )
}

const STUDY_MESHES: [(usize, f64); 3] = [(16, 0.25), (32, 0.125), (64, 0.0625)];

fn radial_study(r: SlopeDensity, f0: f64, g: f64) -> (verify::ConvergenceTable, f64) {
    let started = Instant::now();
    let domain = disk(g);
    let exact = verify::radial_exact_solution(&r, f0, g, Point2::ORIGIN, 4001).expect("exact solution");
    let table = verify::convergence_study(
        &domain,
        &r,
        &SourceMeasure::lebesgue(f0),
        &exact,
        &STUDY_MESHES,
        0.2,
        &q(),
        &SolveConfig::default(),
    )
    .expect("convergence study");
    (table, started.elapsed().as_secs_f64())
}

fn decay_outcome(table: &verify::ConvergenceTable, secs: f64) -> Outcome {
    let errors: Vec<f64> = table.rows.iter().map(|r| r.linf_error).collect();
    let first = errors[0];
    let last = *errors.last().expect("rows");
    outcome(
        table.errors_decrease() && last < first / 2.0 && secs < 300.0,
        format!(
            "L∞ errors {} over n_boundary 16/32/64, finest/coarsest {:.3} (limit 0.5), {secs:.1} s (limit 300 s)",
            errors
                .iter()
                .map(|e| format!("{e:.3e}"))
                .collect::<Vec<_>>()
                .join(" > "),
            last / first
        ),
    )
}

fn radial_unit() -> Outcome {
    let (table, secs) = radial_study(unit(), 1.0, 0.5);
    decay_outcome(&table, secs)
}

fn radial_gaussian() -> Outcome {
    let exact = verify::radial_exact_solution(&gaussian(), 0.5, 0.0, Point2::ORIGIN, 4001).expect("exact");
    // the profile's slope satisfies u′² = 0.5 r² / (1 − 0.5 r²)
    let profile_err = exact
        .radii
        .iter()
        .zip(&exact.slopes)
        .map(|(&r, &s)| (s * s - 0.5 * r * r / (1.0 - 0.5 * r * r)).abs())
        .fold(0.0, f64::max);
    let (table, secs) = radial_study(gaussian(), 0.5, 0.0);
    let mut out = decay_outcome(&table, secs);
    out.passed &= profile_err < 1e-12;
    out.detail = format!("{}; profile residual {profile_err:.1e}", out.detail);
    out
}

fn mass_balance() -> Outcome {
    let domain = disk(0.5);
    let mesh = disk_mesh(&domain);
    let report = solve_classical(
        &mesh,
        &domain,
        &unit(),
        &SourceMeasure::lebesgue(1.0),
        &q(),
        &SolveConfig::default(),
    )
    .expect("disk solve");
    let sum_t: f64 = report.targets.iter().sum();
    let sum_a: f64 = report.achieved.iter().sum();
    let bound = mesh.n_interior() as f64 * report.mass_tol;
    let balanced = (sum_a - sum_t).abs() <= bound;

    // μ(Ω) = π equals the total mass of (1 + |p|²)^(−2)
    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("gap.json");
    std::fs::write(
        &config,
        r#"{
            "domain": { "kind": "disk", "radius": 1.0 },
            "boundary": { "kind": "constant", "value": 0.0 },
            "slope_density": { "kind": "gauss_curvature", "q": 2.0 },
            "source": { "density": { "kind": "constant", "value": 1.0 } },
            "mesh": { "n_boundary": 16, "spacing": 0.25 }
        }"#,
    )
    .expect("write config");
    let run = Command::new(env!("CARGO_BIN_EXE_masolve"))
        .args(["solve", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .expect("run masolve");
    let code = run.status.code();
    let stderr = String::from_utf8_lossy(&run.stderr);
    outcome(
        balanced && code == Some(2) && stderr.contains("mass gap"),
        format!(
            "|Σ achieved − Σ targets| = {:.2e} ≤ k_h·mass_tol = {bound:.2e}; equal-mass config exit {code:?}",
            (sum_a - sum_t).abs()
        ),
    )
}

fn comparison() -> Outcome {
    let domain = disk(0.5);
    let mesh = disk_mesh(&domain);
    let base = target_masses(&mesh, &SourceMeasure::lebesgue(1.0), &q());
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let slack = 2.0 * tight().bisection_tol;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let low: Vec<f64> = base.iter().map(|m| m * rng.gen_range(0.2..1.0)).collect();
        // about a third of the components stay equal
        let high: Vec<f64> = low
            .iter()
            .map(|&m| {
                if rng.gen_bool(0.3) {
                    m
                } else {
                    m * (1.0 + rng.gen_range(0.0..1.0))
                }
            })
            .collect();
        let rep = verify::comparison_check(&mesh, &domain, &unit(), &low, &high, &q(), &tight()).expect("comparison");
        violations += rep.violations;
        worst = worst.max(rep.max_violation);
    }
    outcome(
        violations == 0,
        format!("10 pairs, {violations} violations, max z′ − z = {worst:.2e} (slack {slack:.0e})"),
    )
}

fn a_priori() -> Outcome {
    let domain = disk(0.5);
    let mesh = disk_mesh(&domain);
    let mu = SourceMeasure::lebesgue(1.0);
    let rho = unit().g_r_inverse(PI).expect("g_R inverse");
    let bounds = a_priori_bounds(&domain, &unit(), &mu, &q()).expect("bounds");
    let cfg = SolveConfig::default();
    let report = solve_classical(&mesh, &domain, &unit(), &mu, &q(), &cfg).expect("disk solve");
    let (lo, hi) = report.a_priori_bounds;
    let all = report.heights.to_vec();
    let (zmin, zmax) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)));
    outcome(
        rho == 1.0 && bounds == (-1.5, 0.5) && zmin >= lo - cfg.bisection_tol && zmax <= hi,
        format!("g_R⁻¹(π) = {rho}, bounds ({lo}, {hi}), heights in [{zmin:.4}, {zmax:.4}]"),
    )
}

fn weak_monotonicity() -> Outcome {
    let domain = disk(0.5);
    let mesh = disk_mesh(&domain);
    let cfg = SolveConfig::default();
    let weak = solve_weak(
        &mesh,
        &domain,
        &unit(),
        &SourceMeasure::lebesgue(1.0),
        &q(),
        &[0.4, 0.2, 0.1, 0.05],
        &cfg,
    )
    .expect("weak solve");
    let monotone = weak.is_monotone(2.0 * cfg.bisection_tol);
    let gaps_down = weak.level_gaps.windows(2).all(|w| w[1] < w[0]);
    outcome(
        monotone && gaps_down,
        format!(
            "max increase {:.2e} (slack {:.0e}), level gaps {}",
            weak.max_increase,
            2.0 * cfg.bisection_tol,
            weak.level_gaps
                .iter()
                .map(|g| format!("{g:.3e}"))
                .collect::<Vec<_>>()
                .join(" > ")
        ),
    )
}

fn order_independence() -> Outcome {
    let domain = disk(0.5);
    let mesh = disk_mesh(&domain);
    let mu = SourceMeasure::lebesgue(1.0);
    let solve = |order| {
        let cfg = SolveConfig {
            sweep_order: order,
            ..tight()
        };
        solve_classical(&mesh, &domain, &unit(), &mu, &q(), &cfg).expect("disk solve")
    };
    let a = solve(SweepOrder::Index);
    let b = solve(SweepOrder::LargestResidualFirst);
    let diff = a
        .heights
        .interior()
        .iter()
        .zip(b.heights.interior())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let slack = 2.0 * tight().bisection_tol;
    outcome(
        diff <= slack,
        format!(
            "max height difference {diff:.2e} (slack {slack:.0e}); {} vs {} sweeps",
            a.sweeps, b.sweeps
        ),
    )
}

fn border_convergence() -> Outcome {
    let domain = ConvexDomain::unit_disk(BoundaryData::Cosine {
        offset: 0.0,
        amplitude: 1.0,
        frequency: 1,
    });
    let mut diameters = Vec::new();
    let mut gaps = Vec::new();
    for n in [16, 32, 64] {
        let mesh = build_mesh(&domain, n, 0.25).expect("mesh");
        let report = solve_classical(
            &mesh,
            &domain,
            &unit(),
            &SourceMeasure::lebesgue(0.5),
            &q(),
            &SolveConfig::default(),
        )
        .expect("cosine solve");
        let env = build_envelope(&mesh, report.heights).expect("envelope");
        diameters.push(mesh.max_boundary_facet_diameter());
        gaps.push(border_gap(&mesh, &domain, &env, 4096));
    }
    let down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" > ");
    outcome(
        down(&diameters) && down(&gaps),
        format!("facet diameters {}, Hausdorff gaps {}", fmt(&diameters), fmt(&gaps)),
    )
}
