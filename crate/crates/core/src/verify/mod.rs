//! Independent oracles and the convergence harness.
//!
//! - [`radial_exact_solution`]: for radially symmetric `R` and constant
//!   density `f0` on the unit disk, the exact solution has
//!   `g_R(u′(r)) = f0·π·r²` (the subdifferential of the ball `B_r` is the
//!   slope ball `B_{u′(r)}`).
//! - [`comparison_check`]: larger targets must give lower heights.
//! - [`convergence_study`]: `L∞(Ω̄_δ)` error and boundary-graph gap per mesh.
//! - [`border_gap`]: sampled Hausdorff distance between the envelope's
//!   boundary graph and the graph of `g`.
//! - [`monte_carlo_cell_area`]: area of the slopes accepted by the
//!   membership oracle, for cross-checking subdifferential polygons.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::{build_envelope, ConvexEnvelope, EnvelopeError};
use crate::geometry::Point2;
use crate::measures::{MeasureError, QuadratureConfig, SlopeDensity, SourceMeasure};
use crate::mesh::{build_mesh, inner_grid, ConvexDomain, Mesh, EVAL_GRID};
use crate::solver::{initial_heights, solve_classical, solve_discrete, SolveConfig, SolveError};

/// Boundary samples per curve for [`border_gap`] in studies.
pub const BORDER_SAMPLES: usize = 1024;

/// The radially symmetric solution on the unit disk for constant density.
#[derive(Debug, Clone, Serialize)]
pub struct RadialExactSolution {
    pub r: SlopeDensity,
    pub f0: f64,
    pub center: Point2,
    pub boundary_value: f64,
    /// Uniform radii on `[0, 1]`.
    pub radii: Vec<f64>,
    /// `u′` at `radii`.
    pub slopes: Vec<f64>,
    /// `u` at `radii`, with `u(1) = boundary_value`.
    pub values: Vec<f64>,
}

/// Tabulates `u′(r) = g_R⁻¹(f0·π·r²)` and integrates it by the trapezoid
/// rule, shifted so that `u(1)` is the boundary value.
pub fn radial_exact_solution(
    r: &SlopeDensity,
    f0: f64,
    boundary_value: f64,
    center: Point2,
    n_samples: usize,
) -> Result<RadialExactSolution, MeasureError> {
    if !r.is_radial() {
        return Err(MeasureError::InvalidParameter(
            "the slope density is not radially symmetric".into(),
        ));
    }
    if !(f0 >= 0.0 && f0.is_finite()) {
        return Err(MeasureError::InvalidParameter(format!(
            "density {f0} must be finite and ≥ 0"
        )));
    }
    if n_samples < 2 {
        return Err(MeasureError::InvalidParameter(
            "need at least two radial samples".into(),
        ));
    }
    let radii: Vec<f64> = (0..n_samples).map(|k| k as f64 / (n_samples - 1) as f64).collect();
    let slopes = radii
        .iter()
        .map(|&t| r.g_r_inverse(f0 * std::f64::consts::PI * t * t))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut values = vec![0.0; n_samples];
    for k in 1..n_samples {
        values[k] = values[k - 1] + 0.5 * (slopes[k] + slopes[k - 1]) * (radii[k] - radii[k - 1]);
    }
    let shift = boundary_value - values[n_samples - 1];
    values.iter_mut().for_each(|u| *u += shift);
    Ok(RadialExactSolution {
        r: r.clone(),
        f0,
        center,
        boundary_value,
        radii,
        slopes,
        values,
    })
}

impl RadialExactSolution {
    fn interpolate(&self, table: &[f64], rho: f64) -> f64 {
        let n = self.radii.len();
        let s = (rho.clamp(0.0, 1.0) * (n - 1) as f64).min((n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let w = s - k as f64;
        table[k] * (1.0 - w) + table[k + 1] * w
    }

    /// `u` at radius `rho ∈ [0, 1]` (linear interpolation of the table).
    pub fn value_at_radius(&self, rho: f64) -> f64 {
        self.interpolate(&self.values, rho)
    }

    pub fn slope_at_radius(&self, rho: f64) -> f64 {
        self.interpolate(&self.slopes, rho)
    }

    pub fn value(&self, x: Point2) -> f64 {
        self.value_at_radius(x.dist(self.center))
    }

    /// `max |g_R(u′(r)) − f0·π·r²|` over the table.
    pub fn balance_residual(&self) -> f64 {
        self.radii
            .iter()
            .zip(&self.slopes)
            .map(|(&t, &s)| (self.r.g_r(s) - self.f0 * std::f64::consts::PI * t * t).abs())
            .fold(0.0, f64::max)
    }

    /// Whether `u′` is non-decreasing.
    pub fn is_convex(&self) -> bool {
        self.slopes.windows(2).all(|w| w[1] >= w[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// `max_i (z_high − z_low)`; positive values contradict the ordering.
    pub max_violation: f64,
    /// Vertices with `z_high > z_low + 2·bisection_tol`.
    pub violations: usize,
    /// Vertices with `z_high < z_low − 2·bisection_tol`.
    pub strictly_ordered: usize,
    pub n_interior: usize,
    pub passed: bool,
}

/// Solves for two componentwise-ordered target vectors and checks that the
/// larger targets give heights no higher than the smaller ones.
pub fn comparison_check(
    mesh: &Mesh,
    domain: &ConvexDomain,
    r: &SlopeDensity,
    targets_low: &[f64],
    targets_high: &[f64],
    q: &QuadratureConfig,
    cfg: &SolveConfig,
) -> Result<ComparisonReport, SolveError> {
    if targets_low.len() != targets_high.len() || targets_low.iter().zip(targets_high).any(|(a, b)| a > b) {
        return Err(SolveError::InvalidConfig(
            "comparison needs target vectors of equal length with low ≤ high".into(),
        ));
    }
    let start = initial_heights(mesh, domain);
    let low = solve_discrete(mesh, start.clone(), targets_low, r, q, cfg)?;
    let high = solve_discrete(mesh, start, targets_high, r, q, cfg)?;
    let slack = 2.0 * cfg.bisection_tol;
    let mut report = ComparisonReport {
        max_violation: f64::NEG_INFINITY,
        violations: 0,
        strictly_ordered: 0,
        n_interior: mesh.n_interior(),
        passed: true,
    };
    for (zl, zh) in low.heights.interior().iter().zip(high.heights.interior()) {
        let d = zh - zl;
        report.max_violation = report.max_violation.max(d);
        if d > slack {
            report.violations += 1;
        }
        if d < -slack {
            report.strictly_ordered += 1;
        }
    }
    report.passed = report.violations == 0;
    Ok(report)
}

/// Sampled Hausdorff distance in `ℝ³` between `{(x, u_h(x)) : x ∈ ∂Ω_h}` and
/// `{(y, g(y)) : y ∈ ∂Ω}`, with about `n_samples` points on each.
pub fn border_gap(mesh: &Mesh, domain: &ConvexDomain, env: &ConvexEnvelope<'_>, n_samples: usize) -> f64 {
    border_gap_with_resolution(mesh, domain, env, n_samples).0
}

/// [`border_gap`] together with the sampling resolution (largest distance
/// between consecutive samples on either curve).
pub fn border_gap_with_resolution(
    mesh: &Mesh,
    domain: &ConvexDomain,
    env: &ConvexEnvelope<'_>,
    n_samples: usize,
) -> (f64, f64) {
    let m = mesh.n_boundary();
    let per_edge = n_samples.div_ceil(m).max(1);
    let heights = env.heights();
    let mut discrete = Vec::with_capacity(m * per_edge);
    for j in 0..m {
        let (va, vb) = (mesh.n_interior() + j, mesh.n_interior() + (j + 1) % m);
        let (a, b) = (mesh.vertex(va), mesh.vertex(vb));
        let (za, zb) = (heights.get(va), heights.get(vb));
        for k in 0..per_edge {
            let t = k as f64 / per_edge as f64;
            discrete.push((a.lerp(b, t), za + (zb - za) * t));
        }
    }
    let n = n_samples.max(3);
    let exact: Vec<(Point2, f64)> = (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (domain.boundary_point(t), domain.g(t))
        })
        .collect();
    let dist = |a: &(Point2, f64), b: &(Point2, f64)| {
        let d = a.0 - b.0;
        (d.norm_sq() + (a.1 - b.1).powi(2)).sqrt()
    };
    let one_sided = |from: &[(Point2, f64)], to: &[(Point2, f64)]| {
        from.par_iter()
            .map(|a| to.iter().map(|b| dist(a, b)).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    };
    let spacing = |pts: &[(Point2, f64)]| {
        (0..pts.len())
            .map(|k| dist(&pts[k], &pts[(k + 1) % pts.len()]))
            .fold(0.0, f64::max)
    };
    let gap = one_sided(&discrete, &exact).max(one_sided(&exact, &discrete));
    (gap, spacing(&discrete).max(spacing(&exact)))
}

/// Sampled modulus of continuity of `g`: the largest `|g(y) − g(y′)|` over
/// pairs of `n_samples` boundary points at most `radius` apart.
pub fn boundary_modulus(domain: &ConvexDomain, radius: f64, n_samples: usize) -> f64 {
    let pts: Vec<(Point2, f64)> = (0..n_samples)
        .map(|k| {
            let t = k as f64 / n_samples as f64;
            (domain.boundary_point(t), domain.g(t))
        })
        .collect();
    pts.par_iter()
        .enumerate()
        .map(|(k, a)| {
            pts[k + 1..]
                .iter()
                .filter(|b| a.0.dist(b.0) <= radius)
                .map(|b| (a.1 - b.1).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// One mesh of a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub n_boundary: usize,
    pub spacing: f64,
    /// `max |u_h − u|` over the evaluation grid of `Ω̄_δ`.
    pub linf_error: f64,
    pub border_gap: f64,
    /// Sampling resolution of `border_gap`.
    pub border_resolution: f64,
    pub max_boundary_facet_diameter: f64,
    /// Facet diameter plus the modulus of `g` at that scale plus the
    /// sampling resolution; `border_gap` must not exceed it.
    pub border_gap_bound: f64,
    /// `max g − min` of the a priori height bounds; the error cannot exceed it.
    pub a_priori_width: f64,
    pub sweeps: usize,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub delta: f64,
    /// Grid nodes in `Ω̄_δ` where errors are measured.
    pub grid_points: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// CSV `h,n_boundary,spacing,linf_error,border_gap,runtime_ms`.
    pub fn to_csv(&self) -> String {
        use crate::output::fmt_f64;
        let mut out = String::from("h,n_boundary,spacing,linf_error,border_gap,runtime_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_f64(r.h),
                r.n_boundary,
                fmt_f64(r.spacing),
                fmt_f64(r.linf_error),
                fmt_f64(r.border_gap),
                fmt_f64(r.runtime_ms)
            ));
        }
        out
    }

    pub fn h_decreases(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].h < w[0].h)
    }

    /// Whether every row respects its border-gap and a priori error bounds.
    pub fn bounds_hold(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.border_gap <= r.border_gap_bound && r.linf_error <= r.a_priori_width)
    }

    /// Whether `linf_error` strictly decreases down the table.
    pub fn errors_decrease(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].linf_error < w[0].linf_error)
    }
}

/// Solves on each `(n_boundary, spacing)` mesh in order and measures the
/// error against `exact` on the fixed `201 × 201` grid restricted to `Ω̄_δ`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    domain: &ConvexDomain,
    r: &SlopeDensity,
    mu: &SourceMeasure,
    exact: &RadialExactSolution,
    meshes: &[(usize, f64)],
    delta: f64,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
) -> Result<ConvergenceTable, SolveError> {
    let grid = inner_grid(domain, delta, EVAL_GRID);
    let mut rows = Vec::with_capacity(meshes.len());
    for &(n_boundary, spacing) in meshes {
        let started = Instant::now();
        let mesh = build_mesh(domain, n_boundary, spacing)
            .map_err(|e| SolveError::InvalidConfig(format!("mesh ({n_boundary}, {spacing}): {e}")))?;
        let report = solve_classical(&mesh, domain, r, mu, q, cfg)?;
        let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
        let env = build_envelope(&mesh, report.heights.clone())?;
        let linf_error = grid
            .par_iter()
            .map(|&x| Ok((env.evaluate(x)? - exact.value(x)).abs()))
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
            .map_err(|e: EnvelopeError| SolveError::Envelope(e))?;
        let (gap, resolution) = border_gap_with_resolution(&mesh, domain, &env, BORDER_SAMPLES);
        log::info!("study row n_boundary = {n_boundary}: error {linf_error:.3e}, border gap {gap:.3e}");
        let facet = mesh.max_boundary_facet_diameter();
        let modulus = boundary_modulus(domain, facet, BORDER_SAMPLES);
        rows.push(ConvergenceRow {
            h: mesh.h(),
            n_boundary,
            spacing,
            linf_error,
            border_gap: gap,
            border_resolution: resolution,
            max_boundary_facet_diameter: facet,
            border_gap_bound: facet + modulus + resolution,
            a_priori_width: report.a_priori_bounds.1 - report.a_priori_bounds.0,
            sweeps: report.sweeps,
            runtime_ms,
        });
    }
    Ok(ConvergenceTable {
        delta,
        grid_points: grid.len(),
        rows,
    })
}

/// Monte-Carlo estimate of the area accepted by the membership oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloArea {
    pub area: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Samples `n_samples` slopes uniformly in a box around the polygon cell of
/// vertex `i` (1.5 times its extent, or a margin of 5% of the envelope's
/// slope range for degenerate cells) and counts oracle acceptances.
/// Deterministic for a given seed, whatever the thread count.
pub fn monte_carlo_cell_area(env: &ConvexEnvelope<'_>, i: usize, n_samples: usize, seed: u64) -> MonteCarloArea {
    const CHUNK: usize = 65_536;
    let cell = env.subdifferential_cell(i);
    let (mut lo, mut hi) = cell.bounding_box().unwrap_or((Point2::ORIGIN, Point2::ORIGIN));
    let c = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.75;
    let spread = env
        .facets()
        .iter()
        .map(|f| f.gradient.norm())
        .fold(0.0, f64::max)
        .max(1e-6);
    let margin = 0.05 * spread;
    let half = Point2::new(half.x.max(margin), half.y.max(margin));
    (lo, hi) = (c - half, c + half);
    let chunks = n_samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = CHUNK.min(n_samples - k * CHUNK);
            (0..count)
                .filter(|_| {
                    let p = Point2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
                    env.membership_oracle(i, p)
                })
                .count()
        })
        .sum();
    let box_area = (hi.x - lo.x) * (hi.y - lo.y);
    let frac = hits as f64 / n_samples as f64;
    MonteCarloArea {
        area: frac * box_area,
        std_error: (frac * (1.0 - frac) / n_samples as f64).sqrt() * box_area,
        samples: n_samples,
    }
}
