//! Planar and lifted convex-hull primitives.
//!
//! Everything here works in `d = 2`: points of the domain live in the plane,
//! graphs of discrete convex functions live in `ℝ³` as [`LiftedPoint`]s, and
//! subdifferentials are convex polygons in slope space.
//!
//! Tolerances: `EPS_GEOM` is used for 2D orientation (collinearity) tests,
//! `EPS_HULL` for coplanarity of lifted points. Both are relative to the
//! coordinate scale of the input.

mod lower_hull;
mod point;
mod polygon;

pub use lower_hull::{lower_hull_lifted, normal_cell, Facet, LiftedPoint, LowerHull};
pub use point::{orient2d, Point2};
pub(crate) use polygon::segment_distance;
pub use polygon::{convex_hull_2d, hull_lenient, polygon_area, ConvexPolygon};

/// Relative tolerance for 2D collinearity.
pub const EPS_GEOM: f64 = 1e-12;

/// Relative tolerance for coplanarity of lifted points.
pub const EPS_HULL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("non-finite coordinate in input point {index}")]
    NonFinite { index: usize },
}
