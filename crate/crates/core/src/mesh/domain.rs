use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::MeshError;
use crate::geometry::{ConvexPolygon, Point2};

/// Built-in strictly convex domains.
///
/// Every shape is a level set `|X/a|^p + |Y/b|^p = 1` around its center, with
/// `p = 2` for disks and ellipses. Boundaries are parametrized by
/// `t ∈ [0, 1)`, counter-clockwise from the positive x semi-axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainShape {
    Disk {
        #[serde(default)]
        center: Point2,
        radius: f64,
    },
    Ellipse {
        #[serde(default)]
        center: Point2,
        a: f64,
        b: f64,
    },
    /// Rounded rectangle; `p > 2` keeps it strictly convex.
    Superellipse {
        #[serde(default)]
        center: Point2,
        a: f64,
        b: f64,
        p: f64,
    },
    /// Accepted by the parser only to be rejected: polygons have flat sides.
    Polygon { vertices: Vec<Point2> },
}

/// Dirichlet data `g` on the boundary, evaluated through the boundary
/// parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    Constant {
        value: f64,
    },
    /// `offset + amplitude · cos(2π · frequency · t)`.
    Cosine {
        offset: f64,
        amplitude: f64,
        frequency: u32,
    },
    /// Trace of `|x|² / 2`.
    RadialQuadratic,
}

impl BoundaryData {
    /// `g` at boundary parameter `t` with boundary point `x`.
    pub fn value(&self, t: f64, x: Point2) -> f64 {
        match *self {
            BoundaryData::Constant { value } => value,
            BoundaryData::Cosine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (TAU * frequency as f64 * t).cos(),
            BoundaryData::RadialQuadratic => 0.5 * x.norm_sq(),
        }
    }

    fn validate(&self) -> Result<(), MeshError> {
        let finite = match *self {
            BoundaryData::Constant { value } => value.is_finite(),
            BoundaryData::Cosine { offset, amplitude, .. } => offset.is_finite() && amplitude.is_finite(),
            BoundaryData::RadialQuadratic => true,
        };
        if finite {
            Ok(())
        } else {
            Err(MeshError::InvalidParameter("boundary data must be finite".into()))
        }
    }
}

/// A strictly convex planar domain together with its Dirichlet data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexDomain {
    shape: DomainShape,
    boundary_data: BoundaryData,
    #[serde(skip)]
    params: LevelSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct LevelSet {
    center: Point2,
    a: f64,
    b: f64,
    p: f64,
}

const SAMPLES: usize = 2048;

impl ConvexDomain {
    pub fn new(shape: DomainShape, boundary_data: BoundaryData) -> Result<Self, MeshError> {
        let params = match shape {
            DomainShape::Disk { center, radius } => LevelSet {
                center,
                a: radius,
                b: radius,
                p: 2.0,
            },
            DomainShape::Ellipse { center, a, b } => LevelSet { center, a, b, p: 2.0 },
            DomainShape::Superellipse { center, a, b, p } => {
                if !(p > 2.0 && p.is_finite()) {
                    return Err(MeshError::InvalidParameter(format!(
                        "superellipse exponent must be finite and > 2, got {p}"
                    )));
                }
                LevelSet { center, a, b, p }
            }
            DomainShape::Polygon { .. } => return Err(MeshError::NotStrictlyConvex),
        };
        let ok = params.center.is_finite()
            && params.a.is_finite()
            && params.b.is_finite()
            && params.a > 0.0
            && params.b > 0.0;
        if !ok {
            return Err(MeshError::InvalidParameter(
                "domain center must be finite and semi-axes positive".into(),
            ));
        }
        boundary_data.validate()?;
        Ok(Self {
            shape,
            boundary_data,
            params,
        })
    }

    pub fn unit_disk(boundary_data: BoundaryData) -> Self {
        Self::new(
            DomainShape::Disk {
                center: Point2::ORIGIN,
                radius: 1.0,
            },
            boundary_data,
        )
        .expect("unit disk is valid")
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn boundary_data(&self) -> &BoundaryData {
        &self.boundary_data
    }

    pub fn with_boundary_data(&self, boundary_data: BoundaryData) -> Result<Self, MeshError> {
        Self::new(self.shape.clone(), boundary_data)
    }

    pub fn center(&self) -> Point2 {
        self.params.center
    }

    fn is_round(&self) -> bool {
        self.params.p == 2.0 && self.params.a == self.params.b
    }

    /// Boundary point at parameter `t` (period 1).
    pub fn boundary_point(&self, t: f64) -> Point2 {
        let LevelSet { center, a, b, p } = self.params;
        let (s, c) = (TAU * t).sin_cos();
        let e = 2.0 / p;
        center + Point2::new(a * c.signum() * c.abs().powf(e), b * s.signum() * s.abs().powf(e))
    }

    /// Boundary parameter of the ray from the center through `x`.
    pub fn param_of(&self, x: Point2) -> f64 {
        let LevelSet { center, a, b, p } = self.params;
        let d = x - center;
        let (u, v) = (d.x / a, d.y / b);
        let h = p / 2.0;
        let theta = (v.signum() * v.abs().powf(h)).atan2(u.signum() * u.abs().powf(h));
        (theta / TAU).rem_euclid(1.0)
    }

    /// `g` at boundary parameter `t`.
    pub fn g(&self, t: f64) -> f64 {
        self.boundary_data.value(t, self.boundary_point(t))
    }

    /// Outward unit normal at parameter `t`.
    pub fn normal(&self, t: f64) -> Point2 {
        let LevelSet { center, a, b, p } = self.params;
        let d = self.boundary_point(t) - center;
        let gx = d.x.signum() * (d.x / a).abs().powf(p - 1.0) / a;
        let gy = d.y.signum() * (d.y / b).abs().powf(p - 1.0) / b;
        let g = Point2::new(gx, gy);
        g * (1.0 / g.norm())
    }

    /// Level-set value `|X/a|^p + |Y/b|^p`; below 1 inside.
    pub fn level(&self, x: Point2) -> f64 {
        let LevelSet { center, a, b, p } = self.params;
        let d = x - center;
        (d.x / a).abs().powf(p) + (d.y / b).abs().powf(p)
    }

    pub fn contains(&self, x: Point2) -> bool {
        self.level(x) < 1.0
    }

    /// Distance from the center to the boundary along polar angle `theta`.
    pub fn radial_extent(&self, theta: f64) -> f64 {
        let LevelSet { a, b, p, .. } = self.params;
        let (s, c) = theta.sin_cos();
        ((c / a).abs().powf(p) + (s / b).abs().powf(p)).powf(-1.0 / p)
    }

    /// Distance to `∂Ω` for points inside; zero outside.
    pub fn dist_to_boundary(&self, x: Point2) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        if self.is_round() {
            return (self.params.a - x.dist(self.params.center)).max(0.0);
        }
        let f = |t: f64| x.dist(self.boundary_point(t));
        let step = 1.0 / SAMPLES as f64;
        let best = (0..SAMPLES)
            .map(|k| k as f64 * step)
            .min_by(|&s, &t| f(s).total_cmp(&f(t)))
            .unwrap_or(0.0);
        golden_min(f, best - step, best + step, 60)
    }

    /// `sup |x − x'|` over the closed domain.
    pub fn diameter(&self) -> f64 {
        let LevelSet { a, b, p, .. } = self.params;
        if p == 2.0 {
            return 2.0 * a.max(b);
        }
        // centrally symmetric: twice the largest radial extent
        let step = TAU / SAMPLES as f64;
        let best = (0..SAMPLES)
            .map(|k| k as f64 * step)
            .max_by(|&s, &t| self.radial_extent(s).total_cmp(&self.radial_extent(t)))
            .unwrap_or(0.0);
        let r = -golden_min(|th| -self.radial_extent(th), best - step, best + step, 60);
        2.0 * r
    }

    /// Lebesgue measure of the domain.
    pub fn area(&self) -> f64 {
        let LevelSet { a, b, p, .. } = self.params;
        if p == 2.0 {
            return std::f64::consts::PI * a * b;
        }
        let n = 4 * SAMPLES;
        let step = TAU / n as f64;
        (0..n).map(|k| self.radial_extent(k as f64 * step).powi(2)).sum::<f64>() * 0.5 * step
    }

    /// Outer polygonal approximation of `{x : dist(x, ∂Ω) > delta}` as the
    /// intersection of `samples` inward-shifted tangent half-planes. Polygons
    /// built with the same `samples` are nested in `delta`.
    pub fn inner_region(&self, delta: f64, samples: usize) -> ConvexPolygon {
        let c = self.params.center;
        let r = self.params.a.max(self.params.b);
        let mut poly = ConvexPolygon::rectangle(c + Point2::new(-r, -r), c + Point2::new(r, r));
        for k in 0..samples {
            let t = k as f64 / samples as f64;
            let n = self.normal(t);
            poly = poly.clip(n, n.dot(self.boundary_point(t)) - delta);
            if poly.is_empty() {
                break;
            }
        }
        poly
    }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`;
/// returns the minimum value.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(lo)).min(f(hi))
}
