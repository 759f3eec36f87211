//! Monotone relaxation for the discrete Monge-Ampère problem.
//!
//! The discrete solution is the height field whose envelope gives every
//! interior vertex `A_i` an `R`-weighted subdifferential mass equal to its
//! target `m_i = ∫ φ_i dμ`. Starting from heights above the boundary hull
//! (every mass zero), each sweep lowers interior heights one at a time until
//! the local mass meets the target. Lowering `z_i` only grows cell `i` and
//! shrinks its neighbours, so the state stays admissible (`mass ≤ target`)
//! and the heights decrease monotonically to the unique solution.
//!
//! [`solve_weak`] repeats this over a decreasing schedule of truncations
//! `μ^δ`, warm-starting each level from the previous one.

mod cell;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{build_envelope, ConvexEnvelope, EnvelopeError, HeightField};
use crate::measures::{
    integrate_r_over_polygon, mass_gap, target_masses, truncate_measure, MeasureError, QuadratureConfig, SlopeDensity,
    SourceMeasure,
};
use crate::mesh::{boundary_trace, ConvexDomain, Mesh};
use cell::CellSystem;

/// Samples of `∂Ω` used for `min g` and `max g` in the a priori bounds.
pub const BOUNDARY_SAMPLES: usize = 4096;

/// Order in which a sweep visits interior vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Increasing vertex index.
    Index,
    /// Largest residual first, ties by index.
    #[default]
    LargestResidualFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Largest allowed `|achieved − target|` per vertex. `None` means
    /// `1e-8 · Σ m_i` with a floor of `1e-12`.
    pub mass_tol: Option<f64>,
    /// Height resolution of the per-vertex root search.
    pub bisection_tol: f64,
    pub max_sweeps: usize,
    pub sweep_order: SweepOrder,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            mass_tol: None,
            bisection_tol: 1e-12,
            max_sweeps: 20_000,
            sweep_order: SweepOrder::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if let Some(t) = self.mass_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SolveError::InvalidConfig(format!("mass_tol must be positive, got {t}")));
            }
        }
        if !(self.bisection_tol > 0.0 && self.bisection_tol.is_finite()) {
            return Err(SolveError::InvalidConfig(format!(
                "bisection_tol must be positive, got {}",
                self.bisection_tol
            )));
        }
        Ok(())
    }

    /// The mass tolerance for a problem with the given total target mass.
    pub fn mass_tol_for(&self, total_target: f64) -> f64 {
        self.mass_tol.unwrap_or((1e-8 * total_target).max(1e-12))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub heights: HeightField,
    pub targets: Vec<f64>,
    /// Masses recomputed from the envelope of the final heights.
    pub achieved: Vec<f64>,
    /// Largest `|mass_i − m_i|` at the start of each sweep, ending with the
    /// final state.
    pub residual_history: Vec<f64>,
    /// `Σ mass_i − Σ m_i` alongside `residual_history`.
    pub excess_history: Vec<f64>,
    pub sweeps: usize,
    pub relaxations: usize,
    pub mass_evaluations: usize,
    /// Relaxations that had to raise a height because its mass exceeded the
    /// target (never needed from an admissible start).
    pub upward_corrections: usize,
    pub mass_tol: f64,
    pub converged: bool,
    /// `(lower, upper)` height bounds from the boundary data and the source mass.
    pub a_priori_bounds: (f64, f64),
    pub flags: Vec<String>,
}

impl SolveReport {
    pub fn max_residual(&self) -> f64 {
        self.achieved
            .iter()
            .zip(&self.targets)
            .map(|(a, m)| (a - m).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "no bracket at vertex {vertex}: mass {mass} at the a priori lower height {height} is below the target {target}"
    )]
    BracketFailure {
        vertex: usize,
        target: f64,
        mass: f64,
        height: f64,
    },
    #[error("no convergence after {sweeps} sweeps (max residual {residual})")]
    MaxSweepsExceeded {
        sweeps: usize,
        residual: f64,
        report: Box<SolveReport>,
    },
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Boundary heights from the trace of `g`; interior heights `max g + 1`, so
/// every interior vertex starts above the boundary hull with zero mass.
pub fn initial_heights(mesh: &Mesh, domain: &ConvexDomain) -> HeightField {
    let boundary: Vec<f64> = boundary_trace(mesh, domain).into_iter().map(|(_, g)| g).collect();
    let top = boundary.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    HeightField::new(vec![top; mesh.n_interior()], boundary)
}

/// `∫ R` over the subdifferential cell of interior vertex `i`.
pub fn vertex_mass(
    env: &ConvexEnvelope<'_>,
    i: usize,
    r: &SlopeDensity,
    q: &QuadratureConfig,
) -> Result<f64, MeasureError> {
    integrate_r_over_polygon(r, &env.subdifferential_cell(i), q)
}

/// Height bounds for any discrete solution: `max g` above, and
/// `min g − diam(Ω) · g_R⁻¹(μ(Ω))` below.
pub fn a_priori_bounds(
    domain: &ConvexDomain,
    r: &SlopeDensity,
    mu: &SourceMeasure,
    q: &QuadratureConfig,
) -> Result<(f64, f64), MeasureError> {
    let (gmin, gmax) = (0..BOUNDARY_SAMPLES)
        .map(|k| domain.g(k as f64 / BOUNDARY_SAMPLES as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)));
    let omega = mu.total_mass(domain, q);
    let rho = r.g_r_inverse(omega)?;
    Ok((gmin - domain.diameter() * rho, gmax))
}

struct Relaxer<'a> {
    sys: CellSystem<'a>,
    targets: &'a [f64],
    /// `g_R⁻¹(m_i)`: a cell containing this disk has at least the target mass
    radii: Vec<f64>,
    diam: f64,
    mass_tol: f64,
    bisection_tol: f64,
    evaluations: usize,
    upward: usize,
}

impl<'a> Relaxer<'a> {
    fn new(
        mesh: &'a Mesh,
        r: &'a SlopeDensity,
        q: &'a QuadratureConfig,
        targets: &'a [f64],
        mass_tol: f64,
        bisection_tol: f64,
    ) -> Result<Self, SolveError> {
        let radii = targets
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                r.g_r_inverse(m).map_err(|_| SolveError::BracketFailure {
                    vertex: i,
                    target: m,
                    mass: r.total_mass(),
                    height: f64::NEG_INFINITY,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            sys: CellSystem::new(mesh, r, q),
            targets,
            radii,
            diam: mesh.polygon().diameter(),
            mass_tol,
            bisection_tol,
            evaluations: 0,
            upward: 0,
        })
    }

    fn mass(&mut self, i: usize, z: f64, heights: &[f64]) -> Result<cell::MassEval, SolveError> {
        self.evaluations += 1;
        match self.sys.eval(i, z, heights) {
            // deep probes give large cells; only the side of the target matters
            Err(MeasureError::ToleranceNotMet { estimate, error })
                if estimate - 10.0 * error.abs() > self.targets[i] + self.mass_tol =>
            {
                Ok(cell::MassEval {
                    mass: estimate,
                    slope: 0.0,
                })
            }
            r => Ok(r?),
        }
    }

    fn masses(&self, heights: &[f64]) -> Result<Vec<f64>, SolveError> {
        (0..self.targets.len())
            .into_par_iter()
            .map(|i| Ok(self.sys.eval(i, heights[i], heights)?.mass))
            .collect()
    }

    /// Moves `heights[i]` so that its mass meets the target, other heights
    /// fixed. Newton steps on the depth, safeguarded by a bracket
    /// `[lo, hi]` with `mass(lo) ≥ m > mass(hi)`.
    fn relax(&mut self, i: usize, heights: &mut [f64]) -> Result<(), SolveError> {
        let m = self.targets[i];
        let tol = self.mass_tol;
        let z0 = heights[i];
        let f0 = self.mass(i, z0, heights)?;
        if (f0.mass - m).abs() <= tol {
            return Ok(());
        }
        // `f_lo` is evaluated only when the iteration reaches `lo`; by
        // monotonicity a root found above it already implies mass(lo) ≥ m
        let (mut lo, mut f_lo, mut hi, mut f_hi): (f64, Option<cell::MassEval>, f64, cell::MassEval);
        let mut cur;
        if f0.mass < m {
            (hi, f_hi) = (z0, f0);
            // every plane with slope |p| ≤ ρ through (A_i, L) stays below the others
            let zmin = heights
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &z)| z)
                .fold(f64::INFINITY, f64::min);
            lo = zmin - self.diam * self.radii[i] * (1.0 + 1e-9) - self.bisection_tol;
            f_lo = None;
            cur = (hi, f_hi);
        } else {
            // mass above the target: search upward for the other end
            self.upward += 1;
            (lo, f_lo) = (z0, Some(f0));
            let mut step = self.bisection_tol.max(1e-9 * (1.0 + z0.abs()));
            loop {
                let z = lo + step;
                let f = self.mass(i, z, heights)?;
                if (f.mass - m).abs() <= tol {
                    heights[i] = z;
                    return Ok(());
                }
                if f.mass < m {
                    (hi, f_hi) = (z, f);
                    break;
                }
                (lo, f_lo) = (z, Some(f));
                step *= 2.0;
            }
            cur = (lo, f_lo.expect("set in the search"));
        }
        for _ in 0..200 {
            if hi - lo <= self.bisection_tol {
                break;
            }
            let (z, f) = cur;
            let newton = if f.slope > 0.0 {
                z + (f.mass - m) / f.slope
            } else {
                f64::NAN
            };
            let next = if newton > lo && newton < hi {
                newton
            } else if f_lo.is_none() {
                lo
            } else {
                0.5 * (lo + hi)
            };
            let fn_ = self.mass(i, next, heights)?;
            if next == lo && f_lo.is_none() && fn_.mass < m - tol {
                return Err(SolveError::BracketFailure {
                    vertex: i,
                    target: m,
                    mass: fn_.mass,
                    height: lo,
                });
            }
            if (fn_.mass - m).abs() <= tol {
                heights[i] = next;
                return Ok(());
            }
            if fn_.mass >= m {
                (lo, f_lo) = (next, Some(fn_));
            } else {
                (hi, f_hi) = (next, fn_);
            }
            cur = (next, fn_);
        }
        // bracket exhausted: prefer the side that keeps mass ≤ target + tol
        let f_lo = match f_lo {
            Some(f) => f,
            None => self.mass(i, lo, heights)?,
        };
        heights[i] = if f_lo.mass <= m + tol { lo } else { hi };
        debug!(
            "vertex {i}: bracket [{lo}, {hi}] exhausted, masses {} / {} for target {m}",
            f_lo.mass, f_hi.mass
        );
        Ok(())
    }
}

/// Relaxes interior vertex `i` alone: the returned heights differ from
/// `heights` only at `i`, where the mass now meets `target` within the
/// mass tolerance (or the height is resolved to `bisection_tol`).
pub fn relax_vertex(
    mesh: &Mesh,
    heights: &HeightField,
    i: usize,
    target: f64,
    r: &SlopeDensity,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
) -> Result<HeightField, SolveError> {
    cfg.validate()?;
    let mut targets = vec![0.0; mesh.n_interior()];
    targets[i] = target;
    let mut relaxer = Relaxer::new(mesh, r, q, &targets, cfg.mass_tol_for(target), cfg.bisection_tol)?;
    let mut z = heights.to_vec();
    relaxer.relax(i, &mut z)?;
    let mut out = heights.clone();
    out.set_interior(i, z[i]);
    Ok(out)
}

/// Gauss–Seidel sweeps from `initial` until every interior mass meets its
/// target. `initial` must be admissible (`mass_i ≤ m_i + mass_tol`) for
/// the descent to be monotone; larger masses are corrected upward and
/// counted in the report.
pub fn solve_discrete(
    mesh: &Mesh,
    initial: HeightField,
    targets: &[f64],
    r: &SlopeDensity,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    if targets.len() != mesh.n_interior() {
        return Err(SolveError::InvalidConfig(format!(
            "{} targets for {} interior vertices",
            targets.len(),
            mesh.n_interior()
        )));
    }
    let total_target: f64 = targets.iter().sum();
    let mass_tol = cfg.mass_tol_for(total_target);
    let mut relaxer = Relaxer::new(mesh, r, q, targets, mass_tol, cfg.bisection_tol)?;
    // rejects mismatched or non-finite heights
    build_envelope(mesh, initial.clone())?;
    let mut z = initial.to_vec();

    let mut residual_history = Vec::new();
    let mut excess_history = Vec::new();
    let mut relaxations = 0;
    let mut sweeps = 0;
    let converged = loop {
        let masses = relaxer.masses(&z)?;
        let residuals: Vec<f64> = targets.iter().zip(&masses).map(|(m, f)| m - f).collect();
        let worst = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
        residual_history.push(worst);
        excess_history.push(masses.iter().sum::<f64>() - total_target);
        info!("sweep {sweeps}: max residual {worst:.3e}");
        if worst <= mass_tol {
            break true;
        }
        if sweeps == cfg.max_sweeps {
            break false;
        }
        let mut order: Vec<usize> = (0..targets.len()).filter(|&i| residuals[i].abs() > mass_tol).collect();
        if cfg.sweep_order == SweepOrder::LargestResidualFirst {
            order.sort_by(|&a, &b| residuals[b].abs().total_cmp(&residuals[a].abs()).then(a.cmp(&b)));
        }
        for i in order {
            relaxer.relax(i, &mut z)?;
            relaxations += 1;
        }
        sweeps += 1;
    };

    let boundary = z.split_off(mesh.n_interior());
    let heights = HeightField::new(z, boundary);
    let env = build_envelope(mesh, heights.clone())?;
    let achieved = (0..mesh.n_interior())
        .into_par_iter()
        .map(|i| vertex_mass(&env, i, r, q))
        .collect::<Result<Vec<f64>, _>>()?;
    let bmin = heights.boundary().iter().copied().fold(f64::INFINITY, f64::min);
    let bmax = heights.boundary().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rho = r.g_r_inverse(total_target)?;
    let mut report = SolveReport {
        heights,
        targets: targets.to_vec(),
        achieved,
        residual_history,
        excess_history,
        sweeps,
        relaxations,
        mass_evaluations: relaxer.evaluations,
        upward_corrections: relaxer.upward,
        mass_tol,
        converged,
        a_priori_bounds: (bmin - mesh.polygon().diameter() * rho, bmax),
        flags: Vec::new(),
    };
    // the envelope route rounds differently from the half-plane route
    let roundoff = 64.0 * f64::EPSILON * total_target;
    if report.max_residual() > mass_tol + roundoff {
        report.converged = false;
    }
    if !report.converged {
        report.flags.push("tolerance_not_met".into());
        let residual = report.max_residual();
        return Err(SolveError::MaxSweepsExceeded {
            sweeps,
            residual,
            report: Box::new(report),
        });
    }
    Ok(report)
}

/// Solves for the hat-function targets of `μ` with boundary heights `g`.
///
/// Refuses to start unless `μ(Ω) < ∫ R`.
pub fn solve_classical(
    mesh: &Mesh,
    domain: &ConvexDomain,
    r: &SlopeDensity,
    mu: &SourceMeasure,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
) -> Result<SolveReport, SolveError> {
    solve_from(mesh, domain, r, mu, q, cfg, initial_heights(mesh, domain))
}

fn solve_from(
    mesh: &Mesh,
    domain: &ConvexDomain,
    r: &SlopeDensity,
    mu: &SourceMeasure,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
    initial: HeightField,
) -> Result<SolveReport, SolveError> {
    let gap = mass_gap(r, mu, domain, q);
    if !gap.passed {
        return Err(SolveError::AssumptionViolation(format!(
            "mass gap: source mass {} is not below the total slope mass {}",
            gap.source_mass,
            r.total_mass()
        )));
    }
    let targets = target_masses(mesh, mu, q);
    let bounds = a_priori_bounds(domain, r, mu, q)?;
    let attach = |mut report: SolveReport| {
        report.a_priori_bounds = bounds;
        report
    };
    match solve_discrete(mesh, initial, &targets, r, q, cfg) {
        Ok(report) => Ok(attach(report)),
        Err(SolveError::MaxSweepsExceeded {
            sweeps,
            residual,
            report,
        }) => Err(SolveError::MaxSweepsExceeded {
            sweeps,
            residual,
            report: Box::new(attach(*report)),
        }),
        Err(e) => Err(e),
    }
}

/// One level of a δ-continuation.
#[derive(Debug, Clone, Serialize)]
pub struct WeakLevel {
    pub delta: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakReport {
    pub levels: Vec<WeakLevel>,
    /// Largest increase of any interior height from one level to the next
    /// (`≤ 0` when heights are non-increasing).
    pub max_increase: f64,
    /// `max_i |z_i^(k+1) − z_i^(k)|` for consecutive levels.
    pub level_gaps: Vec<f64>,
    pub final_heights: HeightField,
    /// The last inter-level gap, an estimate of the distance to the limit.
    pub cauchy_estimate: f64,
}

impl WeakReport {
    /// Heights non-increasing across levels up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.max_increase <= slack
    }
}

/// Solves with `μ` truncated to `Ω_δ` for each `δ` of a strictly decreasing
/// schedule, starting each level from the previous solution.
pub fn solve_weak(
    mesh: &Mesh,
    domain: &ConvexDomain,
    r: &SlopeDensity,
    mu: &SourceMeasure,
    q: &QuadratureConfig,
    schedule: &[f64],
    cfg: &SolveConfig,
) -> Result<WeakReport, SolveError> {
    if schedule.is_empty() {
        return Err(SolveError::InvalidConfig("empty delta schedule".into()));
    }
    if schedule.iter().any(|&d| !(d > 0.0 && d.is_finite())) || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SolveError::InvalidConfig(format!(
            "delta schedule must be positive and strictly decreasing, got {schedule:?}"
        )));
    }
    let mut levels: Vec<WeakLevel> = Vec::with_capacity(schedule.len());
    let mut heights = initial_heights(mesh, domain);
    for &delta in schedule {
        let truncated = truncate_measure(mu, domain, delta)?;
        let report = solve_from(mesh, domain, r, &truncated, q, cfg, heights)?;
        info!("level delta = {delta}: {} sweeps", report.sweeps);
        heights = report.heights.clone();
        levels.push(WeakLevel { delta, report });
    }
    let mut max_increase = f64::NEG_INFINITY;
    let mut level_gaps = Vec::new();
    for w in levels.windows(2) {
        let (a, b) = (w[0].report.heights.interior(), w[1].report.heights.interior());
        let mut gap: f64 = 0.0;
        for (za, zb) in a.iter().zip(b) {
            max_increase = max_increase.max(zb - za);
            gap = gap.max((zb - za).abs());
        }
        level_gaps.push(gap);
    }
    if levels.len() == 1 {
        max_increase = 0.0;
    }
    Ok(WeakReport {
        cauchy_estimate: level_gaps.last().copied().unwrap_or(0.0),
        final_heights: heights,
        levels,
        max_increase,
        level_gaps,
    })
}
