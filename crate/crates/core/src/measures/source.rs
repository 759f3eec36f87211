use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_legendre, integrate_triangles, QuadratureConfig};
use super::MeasureError;
use crate::geometry::{ConvexPolygon, Point2};
use crate::mesh::{barycentric, ConvexDomain, DomainShape, Mesh};

/// Absolutely continuous part of the source measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceDensity {
    Zero,
    Constant {
        value: f64,
    },
    /// `Σ_k coeffs[k] · |x − center|^k`.
    RadialPolynomial {
        #[serde(default)]
        center: Point2,
        coeffs: Vec<f64>,
    },
}

impl SourceDensity {
    pub fn value(&self, x: Point2) -> f64 {
        match self {
            SourceDensity::Zero => 0.0,
            SourceDensity::Constant { value } => *value,
            SourceDensity::RadialPolynomial { center, coeffs } => {
                let r = x.dist(*center);
                coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
            }
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            SourceDensity::Zero => Some(0.0),
            SourceDensity::Constant { value } => Some(*value),
            SourceDensity::RadialPolynomial { .. } => None,
        }
    }
}

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub position: Point2,
    pub mass: f64,
}

/// Non-negative source measure `μ`: a density plus atoms, optionally
/// restricted to an inner region `Ω_δ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceMeasure {
    density: SourceDensity,
    atoms: Vec<Atom>,
    truncation: Option<Truncation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Truncation {
    delta: f64,
    region: ConvexPolygon,
}

/// Tangent samples used for the polygonal inner regions `Ω_δ`; the same count
/// for every `δ` keeps the regions nested.
pub const TRUNCATION_SAMPLES: usize = 4096;

impl SourceMeasure {
    pub fn new(density: SourceDensity, atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        let mu = Self {
            density,
            atoms,
            truncation: None,
        };
        mu.validate()?;
        Ok(mu)
    }

    pub fn zero() -> Self {
        Self {
            density: SourceDensity::Zero,
            atoms: Vec::new(),
            truncation: None,
        }
    }

    pub fn lebesgue(value: f64) -> Self {
        Self::new(SourceDensity::Constant { value }, Vec::new()).expect("non-negative constant")
    }

    fn validate(&self) -> Result<(), MeasureError> {
        match &self.density {
            SourceDensity::Constant { value } if !(value.is_finite() && *value >= 0.0) => {
                return Err(MeasureError::InvalidParameter(
                    "source density must be finite and ≥ 0".into(),
                ));
            }
            SourceDensity::RadialPolynomial { coeffs, center }
                if (!center.is_finite() || coeffs.iter().any(|c| !c.is_finite())) =>
            {
                return Err(MeasureError::InvalidParameter(
                    "radial polynomial must be finite".into(),
                ));
            }
            _ => {}
        }
        if let Some(a) = self
            .atoms
            .iter()
            .find(|a| !(a.mass > 0.0 && a.mass.is_finite() && a.position.is_finite()))
        {
            return Err(MeasureError::InvalidParameter(format!(
                "atoms need a finite position and positive finite mass, got {a:?}"
            )));
        }
        Ok(())
    }

    /// Checks non-negativity of the density on a sample of the domain.
    pub fn validate_on(&self, domain: &ConvexDomain) -> Result<(), MeasureError> {
        let c = domain.center();
        let n = 64;
        for k in 0..n {
            let theta = std::f64::consts::TAU * k as f64 / n as f64;
            let r = domain.radial_extent(theta);
            for j in 0..=32 {
                let x = c + Point2::new(theta.cos(), theta.sin()) * (r * j as f64 / 32.0);
                if self.density.value(x) < 0.0 {
                    return Err(MeasureError::InvalidParameter(format!(
                        "source density is negative at ({}, {})",
                        x.x, x.y
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn density(&self) -> &SourceDensity {
        &self.density
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn truncation_delta(&self) -> Option<f64> {
        self.truncation.as_ref().map(|t| t.delta)
    }

    pub fn is_zero(&self) -> bool {
        self.density.constant() == Some(0.0) && self.atoms.is_empty()
    }

    /// Density at `x`, including the truncation indicator.
    pub fn density_at(&self, x: Point2) -> f64 {
        match &self.truncation {
            Some(t) if !t.region.contains(x, 0.0) => 0.0,
            _ => self.density.value(x),
        }
    }

    /// `μ(Ω)`.
    pub fn total_mass(&self, domain: &ConvexDomain, cfg: &QuadratureConfig) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| domain.contains(a.position))
            .map(|a| a.mass)
            .sum();
        let continuous = match &self.truncation {
            Some(t) => self.density_in_polygon(&t.region, cfg),
            None => self.density_in_domain(domain),
        };
        continuous + atoms
    }

    /// `μ(P)` for a convex polygon `P ⊂ Ω`.
    pub fn mass_in_polygon(&self, poly: &ConvexPolygon, cfg: &QuadratureConfig) -> f64 {
        let region = match &self.truncation {
            Some(t) => poly.intersect(&t.region),
            None => poly.clone(),
        };
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| poly.contains(a.position, 0.0))
            .map(|a| a.mass)
            .sum();
        self.density_in_polygon(&region, cfg) + atoms
    }

    fn density_in_polygon(&self, poly: &ConvexPolygon, cfg: &QuadratureConfig) -> f64 {
        if poly.is_degenerate() {
            return 0.0;
        }
        match self.density.constant() {
            Some(c) => c * poly.area(),
            None => integrate_triangles(&|x| self.density.value(x), poly.fan_triangles(), cfg).value,
        }
    }

    fn density_in_domain(&self, domain: &ConvexDomain) -> f64 {
        if let Some(c) = self.density.constant() {
            return c * domain.area();
        }
        let SourceDensity::RadialPolynomial { center, coeffs } = &self.density else {
            unreachable!("non-constant densities are radial polynomials");
        };
        if let DomainShape::Disk { center: dc, radius } = domain.shape() {
            if dc == center {
                return coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * std::f64::consts::TAU * radius.powi(k as i32 + 2) / (k as f64 + 2.0))
                    .sum();
            }
        }
        // polar coordinates about the domain center: trapezoid in angle,
        // Gauss–Legendre in radius
        let (nodes, weights) = gauss_legendre(24);
        let n = 2048;
        let step = std::f64::consts::TAU / n as f64;
        let c = domain.center();
        (0..n)
            .map(|k| {
                let theta = k as f64 * step;
                let dir = Point2::new(theta.cos(), theta.sin());
                let r = domain.radial_extent(theta);
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&s, &w)| {
                        let rho = 0.5 * r * (s + 1.0);
                        w * self.density.value(c + dir * rho) * rho
                    })
                    .sum::<f64>()
                    * 0.5
                    * r
            })
            .sum::<f64>()
            * step
    }
}

/// `μ^δ(e) = μ(e ∩ Ω_δ)`: the density is cut off outside the inner region
/// and atoms within distance `δ` of `∂Ω` are dropped.
pub fn truncate_measure(mu: &SourceMeasure, domain: &ConvexDomain, delta: f64) -> Result<SourceMeasure, MeasureError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(MeasureError::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let mut region = domain.inner_region(delta, TRUNCATION_SAMPLES);
    if let Some(t) = &mu.truncation {
        region = region.intersect(&t.region);
    }
    let atoms = mu
        .atoms
        .iter()
        .filter(|a| domain.dist_to_boundary(a.position) > delta)
        .copied()
        .collect();
    let delta = mu.truncation_delta().map_or(delta, |d| d.max(delta));
    Ok(SourceMeasure {
        density: mu.density.clone(),
        atoms,
        truncation: Some(Truncation { delta, region }),
    })
}

/// `m_i = ∫_{Ω_h} φ_i dμ` for every interior vertex.
pub fn target_masses(mesh: &Mesh, mu: &SourceMeasure, cfg: &QuadratureConfig) -> Vec<f64> {
    let n = mesh.n_interior();
    let per_triangle: Vec<[f64; 3]> = (0..mesh.triangles().len())
        .into_par_iter()
        .map(|t| triangle_contributions(mesh, mu, t, cfg))
        .collect();
    let mut m = vec![0.0; n];
    for (t, contrib) in per_triangle.iter().enumerate() {
        for (k, &v) in mesh.triangles()[t].iter().enumerate() {
            if v < n {
                m[v] += contrib[k];
            }
        }
    }
    for atom in &mu.atoms {
        if let Some(t) = mesh.locate(atom.position) {
            let bc = barycentric(mesh.triangle_points(t), atom.position);
            for (k, &v) in mesh.triangles()[t].iter().enumerate() {
                if v < n {
                    m[v] += atom.mass * bc[k].clamp(0.0, 1.0);
                }
            }
        }
    }
    m
}

fn triangle_contributions(mesh: &Mesh, mu: &SourceMeasure, t: usize, cfg: &QuadratureConfig) -> [f64; 3] {
    let pts = mesh.triangle_points(t);
    let tri = ConvexPolygon::from_ccw_unchecked(pts.to_vec());
    let region = match &mu.truncation {
        Some(tr) => tri.intersect(&tr.region),
        None => tri,
    };
    if region.is_degenerate() {
        return [0.0; 3];
    }
    let mut out = [0.0; 3];
    match mu.density.constant() {
        Some(0.0) => {}
        Some(c) => {
            // hats are affine, so the centroid value is the mean
            let bc = barycentric(pts, region.centroid());
            let area = region.area();
            for k in 0..3 {
                out[k] = c * area * bc[k];
            }
        }
        None => {
            for (k, slot) in out.iter_mut().enumerate() {
                let f = |x: Point2| mu.density.value(x) * barycentric(pts, x)[k];
                *slot = integrate_triangles(&f, region.fan_triangles(), cfg).value;
            }
        }
    }
    out
}
