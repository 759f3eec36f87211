use serde::Serialize;

use super::{QuadratureConfig, SlopeDensity, SourceMeasure};
use crate::geometry::Point2;
use crate::mesh::{AssumptionProfile, ConvexDomain};

/// Relative margin by which `μ(Ω)` must stay below `∫ R`; masses equal up to
/// rounding are refused.
pub const MASS_GAP_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassGapCheck {
    pub source_mass: f64,
    /// `None` when `∫ R = ∞`.
    pub slope_total: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCheck {
    pub k: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Sampled attestation of an inequality that quantifies over infinitely
/// many sets or points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotCheck {
    pub samples: usize,
    /// Largest `lhs / rhs` over the samples (`≤ 1` means the inequality held).
    pub worst_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub profile_well_formed: bool,
    pub mass_gap: MassGapCheck,
    pub exponent: ExponentCheck,
    /// `R(p) ≥ c0 |p|^(−2k)` for `|p| ≥ r0`.
    pub slope_decay: SpotCheck,
    /// `μ(e) ≤ c1p · (sup_e dist(·, ∂Ω))^λ · |e|` for small boxes at the boundary.
    pub source_decay: SpotCheck,
    /// `n(x₀)·(x₀ − y) ≥ (η/2)|x₀ − y|^(τ+2)` for boundary pairs.
    pub parabolic_support: SpotCheck,
}

impl AssumptionReport {
    /// Whether the solver may run at all.
    pub fn mass_gap_ok(&self) -> bool {
        self.mass_gap.passed
    }

    /// Names of failed checks.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.profile_well_formed {
            out.push("profile");
        }
        if !self.mass_gap.passed {
            out.push("mass_gap");
        }
        if !self.exponent.passed {
            out.push("exponent_condition");
        }
        if !self.slope_decay.passed {
            out.push("slope_decay");
        }
        if !self.source_decay.passed {
            out.push("source_decay");
        }
        if !self.parabolic_support.passed {
            out.push("parabolic_support");
        }
        out
    }
}

/// Strict inequality `μ(Ω) < ∫ R` with a rounding margin.
pub fn mass_gap(r: &SlopeDensity, mu: &SourceMeasure, domain: &ConvexDomain, q: &QuadratureConfig) -> MassGapCheck {
    let source_mass = mu.total_mass(domain, q);
    let total = r.total_mass();
    MassGapCheck {
        source_mass,
        slope_total: total.is_finite().then_some(total),
        passed: source_mass < total * (1.0 - MASS_GAP_MARGIN),
    }
}

pub fn validate_assumptions(
    profile: &AssumptionProfile,
    r: &SlopeDensity,
    mu: &SourceMeasure,
    domain: &ConvexDomain,
    q: &QuadratureConfig,
) -> AssumptionReport {
    AssumptionReport {
        profile_well_formed: profile.is_well_formed(),
        mass_gap: mass_gap(r, mu, domain, q),
        exponent: ExponentCheck {
            k: profile.k,
            bound: profile.exponent_bound(),
            passed: profile.exponent_condition(),
        },
        slope_decay: slope_decay(profile, r),
        source_decay: source_decay(profile, mu, domain),
        parabolic_support: parabolic_support(profile, domain),
    }
}

fn ratio_check(ratios: impl Iterator<Item = f64>) -> SpotCheck {
    let mut samples = 0;
    let mut worst: f64 = 0.0;
    for r in ratios {
        samples += 1;
        worst = worst.max(r);
    }
    SpotCheck {
        samples,
        worst_ratio: worst,
        passed: worst <= 1.0 + 1e-9,
    }
}

fn slope_decay(profile: &AssumptionProfile, r: &SlopeDensity) -> SpotCheck {
    let (c0, k, r0) = (profile.c0, profile.k, profile.r0);
    ratio_check((0..64).flat_map(move |i| {
        let rho = r0 * 10f64.powf(4.0 * i as f64 / 63.0);
        (0..16).map(move |j| {
            let t = std::f64::consts::TAU * j as f64 / 16.0;
            let p = Point2::new(rho * t.cos(), rho * t.sin());
            c0 * rho.powf(-2.0 * k) / r.value(p)
        })
    }))
}

fn source_decay(profile: &AssumptionProfile, mu: &SourceMeasure, domain: &ConvexDomain) -> SpotCheck {
    let sizes = [0.2, 0.1, 0.05, 0.02];
    let grid = 16;
    let mut ratios = Vec::new();
    for k in 0..64 {
        let t = k as f64 / 64.0;
        let (b, n) = (domain.boundary_point(t), domain.normal(t));
        for &s in &sizes {
            // axis-aligned box of side s whose center sits s/2 inside the boundary
            let center = b - n * (0.5 * s);
            let cell = s / grid as f64;
            let (mut inside, mut mass, mut sup_dist) = (0usize, 0.0, 0.0f64);
            for i in 0..grid {
                for j in 0..grid {
                    let x =
                        center + Point2::new(-0.5 * s + (i as f64 + 0.5) * cell, -0.5 * s + (j as f64 + 0.5) * cell);
                    if domain.contains(x) {
                        inside += 1;
                        mass += mu.density_at(x) * cell * cell;
                        sup_dist = sup_dist.max(domain.dist_to_boundary(x));
                    }
                }
            }
            let lo = center - Point2::new(0.5 * s, 0.5 * s);
            mass += mu
                .atoms()
                .iter()
                .filter(|a| {
                    let d = a.position - lo;
                    (0.0..s).contains(&d.x) && (0.0..s).contains(&d.y)
                })
                .map(|a| a.mass)
                .sum::<f64>();
            if inside == 0 {
                continue;
            }
            let measure = inside as f64 * cell * cell;
            let bound = profile.c1p * sup_dist.powf(profile.lambda) * measure;
            ratios.push(if bound > 0.0 {
                mass / bound
            } else if mass > 0.0 {
                f64::INFINITY
            } else {
                0.0
            });
        }
    }
    ratio_check(ratios.into_iter())
}

fn parabolic_support(profile: &AssumptionProfile, domain: &ConvexDomain) -> SpotCheck {
    let (eta, tau) = (profile.eta, profile.tau);
    let m = 128;
    let n = 512;
    ratio_check((0..m).flat_map(move |i| {
        let t0 = i as f64 / m as f64;
        let (x0, nu) = (domain.boundary_point(t0), domain.normal(t0));
        (1..n).map(move |j| {
            let y = domain.boundary_point(t0 + j as f64 / n as f64);
            let gap = nu.dot(x0 - y);
            let need = 0.5 * eta * x0.dist(y).powf(tau + 2.0);
            if gap > 0.0 {
                need / gap
            } else {
                f64::INFINITY
            }
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryData, DomainShape};
    use std::f64::consts::PI;

    fn disk() -> ConvexDomain {
        ConvexDomain::unit_disk(BoundaryData::Constant { value: 0.0 })
    }

    #[test]
    fn infinite_slope_mass_always_passes() {
        let q = QuadratureConfig::default();
        let check = mass_gap(
            &SlopeDensity::Constant { value: 1.0 },
            &SourceMeasure::lebesgue(1e6),
            &disk(),
            &q,
        );
        assert!(check.passed);
        assert_eq!(check.slope_total, None);
    }

    #[test]
    fn equal_totals_fail() {
        let q = QuadratureConfig::default();
        let r = SlopeDensity::GaussCurvature { q: 2.0 };
        let check = mass_gap(&r, &SourceMeasure::lebesgue(1.0), &disk(), &q);
        assert_eq!(check.source_mass, PI);
        assert_eq!(check.slope_total, Some(PI));
        assert!(!check.passed);
        assert!(mass_gap(&r, &SourceMeasure::lebesgue(0.5), &disk(), &q).passed);
    }

    #[test]
    fn gauss_kernel_violates_exponent_condition_on_disk() {
        let profile = AssumptionProfile {
            k: 2.0,
            c0: 0.25,
            r0: 1.0,
            ..AssumptionProfile::default()
        };
        let r = SlopeDensity::GaussCurvature { q: 2.0 };
        let report = validate_assumptions(
            &profile,
            &r,
            &SourceMeasure::lebesgue(0.5),
            &disk(),
            &QuadratureConfig::default(),
        );
        assert_eq!(report.exponent.bound, 1.5);
        assert!(!report.exponent.passed);
        assert!(report.mass_gap_ok());
        assert!(report.slope_decay.passed, "{:?}", report.slope_decay);
        assert!(report.parabolic_support.passed, "{:?}", report.parabolic_support);
        assert!(report.source_decay.passed, "{:?}", report.source_decay);
        assert_eq!(report.failures(), vec!["exponent_condition"]);
    }

    #[test]
    fn unit_disk_has_parabolic_support_of_order_zero() {
        // n·(x₀ − y) = |x₀ − y|²/2 exactly on the unit circle
        let ok = AssumptionProfile::default();
        assert!(parabolic_support(&ok, &disk()).passed);
        let too_strong = AssumptionProfile { eta: 1.1, ..ok };
        assert!(!parabolic_support(&too_strong, &disk()).passed);
        // a flat-sided superellipse needs a higher order
        let square = ConvexDomain::new(
            DomainShape::Superellipse {
                center: Point2::ORIGIN,
                a: 1.0,
                b: 1.0,
                p: 4.0,
            },
            BoundaryData::Constant { value: 0.0 },
        )
        .unwrap();
        assert!(!parabolic_support(&ok, &square).passed);
    }

    #[test]
    fn source_decay_detects_boundary_mass() {
        let strict = AssumptionProfile {
            lambda: 1.0,
            c1p: 1.0,
            ..AssumptionProfile::default()
        };
        // constant density does not vanish at the boundary
        assert!(!source_decay(&strict, &SourceMeasure::lebesgue(1.0), &disk()).passed);
        // f = 1 − |x| vanishes linearly
        let linear = SourceMeasure::new(
            super::super::SourceDensity::RadialPolynomial {
                center: Point2::ORIGIN,
                coeffs: vec![1.0, -1.0],
            },
            vec![],
        )
        .unwrap();
        assert!(source_decay(&strict, &linear, &disk()).passed);
    }
}
