//! Slope densities `R`, source measures `μ` and the integrals that connect
//! them to the discrete problem.
//!
//! - [`SlopeDensity`]: the weight on slope space, with closed-form radial
//!   mass `g_R` and its inverse.
//! - [`SourceMeasure`]: density plus atoms, hat-function target masses and
//!   inner-region truncations `μ^δ`.
//! - [`validate_assumptions`]: the mass gap `μ(Ω) < ∫ R` (which gates the
//!   solver), the exponent condition and sampled decay/support attestations.

mod assumptions;
mod quadrature;
mod slope;
mod source;

pub use assumptions::{
    mass_gap, validate_assumptions, AssumptionReport, ExponentCheck, MassGapCheck, SpotCheck, MASS_GAP_MARGIN,
};
pub use quadrature::{
    gauss_legendre, integrate_interval, integrate_polygon, integrate_triangles, triangle_rule, Integral,
    QuadratureConfig,
};
pub use slope::{integrate_r_over_polygon, SlopeDensity, TabulatedDensity};
pub use source::{target_masses, truncate_measure, Atom, SourceDensity, SourceMeasure, TRUNCATION_SAMPLES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mass {mass} is not below the total slope mass {total}")]
    MassExceedsTotal { mass: f64, total: f64 },
    #[error("quadrature tolerance not met (estimate {estimate}, error {error})")]
    ToleranceNotMet { estimate: f64, error: f64 },
    #[error("tabulated density, line {line}: {message}")]
    Table { line: usize, message: String },
}
