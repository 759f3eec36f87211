use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::quadrature::{integrate_interval, integrate_polygon, Integral, QuadratureConfig};
use super::MeasureError;
use crate::geometry::{segment_distance, ConvexPolygon, Point2};

/// Positive weight `R` on slope space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlopeDensity {
    Constant {
        value: f64,
    },
    /// `(1 + |p|²)^(−q)`; `q = 3/2` weights by Gaussian curvature of the graph.
    GaussCurvature {
        q: f64,
    },
    /// `c0 · max(|p|, r0)^(−2k)`.
    PowerTail {
        c0: f64,
        k: f64,
        r0: f64,
    },
    Tabulated(TabulatedDensity),
}

/// Values on a uniform rectangular grid, bilinear inside and extended by the
/// nearest grid value outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedDensity {
    pub origin: Point2,
    pub step: Point2,
    pub nx: usize,
    pub ny: usize,
    /// Row-major: `values[j * nx + i]` sits at `origin + (i·step.x, j·step.y)`.
    pub values: Vec<f64>,
}

impl TabulatedDensity {
    /// Parses `px,py,value` rows (header optional) covering a full uniform grid.
    pub fn from_csv(text: &str) -> Result<Self, MeasureError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| MeasureError::Table {
                    line: n + 1,
                    message: e.to_string(),
                })
            };
            if fields.len() != 3 {
                return Err(MeasureError::Table {
                    line: n + 1,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        let axis = |pick: fn(&(f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = rows.iter().map(pick).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let xs = axis(|r| r.0);
        let ys = axis(|r| r.1);
        let table_err = |message: String| MeasureError::Table { line: 0, message };
        if xs.len() < 2 || ys.len() < 2 || rows.len() != xs.len() * ys.len() {
            return Err(table_err(format!(
                "{} rows do not form a full grid of at least 2×2 ({}×{} distinct coordinates)",
                rows.len(),
                xs.len(),
                ys.len()
            )));
        }
        let uniform = |v: &[f64]| {
            let d = v[1] - v[0];
            v.windows(2)
                .all(|w| ((w[1] - w[0]) - d).abs() <= 1e-9 * d.abs().max(1.0))
        };
        if !uniform(&xs) || !uniform(&ys) {
            return Err(table_err("grid spacing is not uniform".into()));
        }
        let (nx, ny) = (xs.len(), ys.len());
        let step = Point2::new(
            (xs[nx - 1] - xs[0]) / (nx - 1) as f64,
            (ys[ny - 1] - ys[0]) / (ny - 1) as f64,
        );
        let origin = Point2::new(xs[0], ys[0]);
        let mut values = vec![f64::NAN; nx * ny];
        for &(x, y, v) in &rows {
            let i = ((x - origin.x) / step.x).round() as usize;
            let j = ((y - origin.y) / step.y).round() as usize;
            values[j * nx + i] = v;
        }
        let table = Self {
            origin,
            step,
            nx,
            ny,
            values,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), MeasureError> {
        if self.nx < 2 || self.ny < 2 || self.values.len() != self.nx * self.ny {
            return Err(MeasureError::InvalidParameter(
                "tabulated grid has inconsistent size".into(),
            ));
        }
        if !(self.step.x > 0.0 && self.step.y > 0.0) {
            return Err(MeasureError::InvalidParameter(
                "tabulated grid steps must be positive".into(),
            ));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(MeasureError::InvalidParameter(
                "tabulated values must be finite and positive".into(),
            ));
        }
        Ok(())
    }

    /// `∫_cell R`, cut along the grid lines so that the density is a
    /// polynomial of degree two on every piece.
    fn integrate_polygon(&self, cell: &ConvexPolygon, cfg: &QuadratureConfig) -> Integral {
        let Some((lo, hi)) = cell.bounding_box() else {
            return Integral::ZERO;
        };
        let lines = |origin: f64, step: f64, count: usize, lo: f64, hi: f64| {
            let mut cuts = vec![lo];
            cuts.extend(
                (0..count)
                    .map(|i| origin + i as f64 * step)
                    .filter(|&c| c > lo && c < hi),
            );
            cuts.push(hi);
            cuts
        };
        let xs = lines(self.origin.x, self.step.x, self.nx, lo.x, hi.x);
        let ys = lines(self.origin.y, self.step.y, self.ny, lo.y, hi.y);
        let f = |p: Point2| self.value(p);
        let mut total = Integral::ZERO;
        for cx in xs.windows(2) {
            let strip = cell
                .clip(Point2::new(-1.0, 0.0), -cx[0])
                .clip(Point2::new(1.0, 0.0), cx[1]);
            for cy in ys.windows(2) {
                let piece = strip
                    .clip(Point2::new(0.0, -1.0), -cy[0])
                    .clip(Point2::new(0.0, 1.0), cy[1]);
                if piece.is_degenerate() {
                    continue;
                }
                let part = integrate_polygon(&f, &piece, cfg);
                total.value += part.value;
                total.error += part.error;
                total.converged &= part.converged;
            }
        }
        total
    }

    pub fn value(&self, p: Point2) -> f64 {
        let u = ((p.x - self.origin.x) / self.step.x).clamp(0.0, (self.nx - 1) as f64);
        let v = ((p.y - self.origin.y) / self.step.y).clamp(0.0, (self.ny - 1) as f64);
        let i = (u.floor() as usize).min(self.nx - 2);
        let j = (v.floor() as usize).min(self.ny - 2);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let at = |i: usize, j: usize| self.values[j * self.nx + i];
        (1.0 - fv) * ((1.0 - fu) * at(i, j) + fu * at(i + 1, j))
            + fv * ((1.0 - fu) * at(i, j + 1) + fu * at(i + 1, j + 1))
    }
}

// five-point Gauss–Legendre on [0, 1]
const SEG_X: [f64; 5] = [
    0.046_910_077_030_668,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
const SEG_W: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_44,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];

impl SlopeDensity {
    pub fn validate(&self) -> Result<(), MeasureError> {
        let bad = |m: &str| Err(MeasureError::InvalidParameter(m.into()));
        match self {
            SlopeDensity::Constant { value } if !(value.is_finite() && *value > 0.0) => {
                bad("constant slope density must be finite and positive")
            }
            SlopeDensity::GaussCurvature { q } if !q.is_finite() => bad("exponent q must be finite"),
            SlopeDensity::PowerTail { c0, k, r0 }
                if !(c0.is_finite() && *c0 > 0.0 && r0.is_finite() && *r0 > 0.0 && k.is_finite() && *k >= 0.0) =>
            {
                bad("power tail needs c0 > 0, r0 > 0 and finite k ≥ 0")
            }
            SlopeDensity::Tabulated(t) => t.validate(),
            _ => Ok(()),
        }
    }

    pub fn value(&self, p: Point2) -> f64 {
        match self {
            SlopeDensity::Constant { value } => *value,
            SlopeDensity::GaussCurvature { q } => {
                let base = 1.0 + p.norm_sq();
                if q.fract() == 0.0 && q.abs() < 64.0 {
                    base.powi(-(*q as i32))
                } else {
                    base.powf(-q)
                }
            }
            SlopeDensity::PowerTail { c0, k, r0 } => c0 * p.norm().max(*r0).powf(-2.0 * k),
            SlopeDensity::Tabulated(t) => t.value(p),
        }
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            SlopeDensity::Constant { value } => Some(*value),
            _ => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, SlopeDensity::Tabulated(_))
    }

    /// `∫_{ℝ²} R`, possibly infinite.
    pub fn total_mass(&self) -> f64 {
        match *self {
            SlopeDensity::Constant { .. } | SlopeDensity::Tabulated(_) => f64::INFINITY,
            SlopeDensity::GaussCurvature { q } if q > 1.0 => PI / (q - 1.0),
            SlopeDensity::GaussCurvature { .. } => f64::INFINITY,
            SlopeDensity::PowerTail { c0, k, r0 } if k > 1.0 => PI * c0 * r0.powf(2.0 - 2.0 * k) * k / (k - 1.0),
            SlopeDensity::PowerTail { .. } => f64::INFINITY,
        }
    }

    /// `g_R(ρ) = ∫_{|p|<ρ} R`.
    pub fn g_r(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        match self {
            SlopeDensity::Constant { value } => value * PI * rho * rho,
            &SlopeDensity::GaussCurvature { q } => {
                let l = (rho * rho).ln_1p();
                if q == 1.0 {
                    PI * l
                } else {
                    -PI * ((1.0 - q) * l).exp_m1() / (q - 1.0)
                }
            }
            &SlopeDensity::PowerTail { c0, k, r0 } => {
                let core = c0 * r0.powf(-2.0 * k) * PI;
                if rho <= r0 {
                    return core * rho * rho;
                }
                let tail = if k == 1.0 {
                    2.0 * PI * c0 * (rho / r0).ln()
                } else {
                    let e = 2.0 - 2.0 * k;
                    2.0 * PI * c0 * (rho.powf(e) - r0.powf(e)) / e
                };
                core * r0 * r0 + tail
            }
            SlopeDensity::Tabulated(_) => self.g_r_polar(rho),
        }
    }

    /// Polar quadrature of `g_R`, used for tabulated densities and as an
    /// independent check of the closed forms.
    pub fn g_r_polar(&self, rho: f64) -> f64 {
        let n = 256;
        let cfg = QuadratureConfig {
            rel_tol: 1e-12,
            ..QuadratureConfig::default()
        };
        let step = std::f64::consts::TAU / n as f64;
        (0..n)
            .map(|k| {
                let (s, c) = (k as f64 * step).sin_cos();
                let f = |r: f64| r * self.value(Point2::new(r * c, r * s));
                integrate_interval(&f, 0.0, rho, &cfg).value
            })
            .sum::<f64>()
            * step
    }

    /// Inverse of `g_R` on `[0, total_mass)`.
    pub fn g_r_inverse(&self, m: f64) -> Result<f64, MeasureError> {
        let total = self.total_mass();
        if !(0.0..f64::INFINITY).contains(&m) {
            return Err(MeasureError::InvalidParameter(format!(
                "mass must be finite and ≥ 0, got {m}"
            )));
        }
        if m >= total {
            return Err(MeasureError::MassExceedsTotal { mass: m, total });
        }
        if m == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            SlopeDensity::Constant { value } => (m / (value * PI)).sqrt(),
            &SlopeDensity::GaussCurvature { q } => {
                let rho2 = if q == 1.0 {
                    (m / PI).exp_m1()
                } else {
                    ((-m * (q - 1.0) / PI).ln_1p() / (1.0 - q)).exp_m1()
                };
                rho2.sqrt()
            }
            &SlopeDensity::PowerTail { c0, k, r0 } => {
                let core = c0 * r0.powf(-2.0 * k) * PI;
                let m0 = core * r0 * r0;
                if m <= m0 {
                    (m / core).sqrt()
                } else if k == 1.0 {
                    r0 * ((m - m0) / (2.0 * PI * c0)).exp()
                } else {
                    let e = 2.0 - 2.0 * k;
                    (r0.powf(e) + (m - m0) * e / (2.0 * PI * c0)).powf(1.0 / e)
                }
            }
            SlopeDensity::Tabulated(_) => self.g_r_inverse_bisection(m),
        })
    }

    /// Inverse of `g_R` by bracketing and bisection.
    pub fn g_r_inverse_bisection(&self, m: f64) -> f64 {
        let mut hi = 1.0;
        while self.g_r(hi) < m {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.g_r(mid) < m {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// `∫_cell R`; exact for constant densities, zero for degenerate cells.
    pub fn integrate_polygon(&self, cell: &ConvexPolygon, cfg: &QuadratureConfig) -> Integral {
        if cell.is_degenerate() {
            return Integral::ZERO;
        }
        if let Some(c) = self.is_constant() {
            return Integral {
                value: c * cell.area(),
                error: 0.0,
                converged: true,
            };
        }
        match self {
            &SlopeDensity::PowerTail { r0, .. } if straddles_circle(cell, r0) => self.radial_flux(cell, r0, cfg),
            SlopeDensity::Tabulated(t) => t.integrate_polygon(cell, cfg),
            _ => integrate_polygon(&|p| self.value(p), cell, cfg),
        }
    }

    /// `∫_cell R` for a radial density as the flux of `G(|p|) p / |p|²`
    /// through the cell boundary, where `2π G = g_R`. Edges are split where
    /// they cross the circle `|p| = r0` so that every piece is smooth.
    fn radial_flux(&self, cell: &ConvexPolygon, r0: f64, cfg: &QuadratureConfig) -> Integral {
        // inside the circle G(ρ)/ρ² is constant
        let inner = self.g_r(r0) / (2.0 * PI * r0 * r0);
        let h = |p: Point2| {
            let rho2 = p.norm_sq();
            if rho2 <= r0 * r0 {
                inner
            } else {
                self.g_r(rho2.sqrt()) / (2.0 * PI * rho2)
            }
        };
        let pts = cell.vertices();
        let n = pts.len();
        let (mut value, mut error) = (0.0, 0.0);
        for k in 0..n {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            let w = a.cross(b);
            if w == 0.0 {
                continue;
            }
            let d = b - a;
            let mut cuts = vec![0.0, 1.0];
            let (qa, qb, qc) = (d.norm_sq(), a.dot(d), a.norm_sq() - r0 * r0);
            let disc = qb * qb - qa * qc;
            if disc > 0.0 {
                let root = disc.sqrt();
                cuts.extend(
                    [(-qb - root) / qa, (-qb + root) / qa]
                        .into_iter()
                        .filter(|t| *t > 0.0 && *t < 1.0),
                );
                cuts.sort_by(f64::total_cmp);
            }
            for span in cuts.windows(2) {
                let piece = integrate_interval(&|t| h(a + d * t), span[0], span[1], cfg);
                value += w * piece.value;
                error += w.abs() * piece.error;
            }
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        Integral {
            value,
            error,
            converged: error <= tol,
        }
    }

    /// `∫_[a,b] R ds` by five-point Gauss–Legendre.
    pub fn integrate_segment(&self, a: Point2, b: Point2) -> f64 {
        let len = a.dist(b);
        if let Some(c) = self.is_constant() {
            return c * len;
        }
        len * SEG_X
            .iter()
            .zip(SEG_W)
            .map(|(&t, w)| w * self.value(a.lerp(b, t)))
            .sum::<f64>()
    }
}

/// Whether the circle `|p| = r` passes through the interior of `cell`.
fn straddles_circle(cell: &ConvexPolygon, r: f64) -> bool {
    let pts = cell.vertices();
    if pts.iter().all(|p| p.norm() <= r) {
        return false;
    }
    let n = pts.len();
    cell.contains(Point2::ORIGIN, 0.0) || (0..n).any(|k| segment_distance(pts[k], pts[(k + 1) % n], Point2::ORIGIN) < r)
}

/// `∫_cell R` with `ToleranceNotMet` when the subdivision budget runs out.
pub fn integrate_r_over_polygon(
    r: &SlopeDensity,
    cell: &ConvexPolygon,
    cfg: &QuadratureConfig,
) -> Result<f64, MeasureError> {
    r.integrate_polygon(cell, cfg).into_result()
}
