//! Convex-envelope finite element solver for generalized Monge-Ampère
//! Dirichlet problems
//!
//! ```text
//!     ∫_{∂u(e)} R(p) dp = μ(e)   for every Borel e ⊂ Ω,     u = g on ∂Ω
//! ```
//!
//! with a general non-negative source measure `μ` and a positive slope
//! density `R`, in two space dimensions.
//!
//! The discrete solution is the lower convex envelope of lifted mesh vertices
//! whose boundary heights are pinned to `g`; the interior heights are found by
//! Gauss–Seidel descent so that the `R`-measure of each vertex's
//! subdifferential equals the hat-function mass of `μ` at that vertex.
//!
//! Module map:
//! - [`geometry`]: 2D hulls, the lower hull of lifted points, normal cells.
//! - [`mesh`]: strictly convex domains, inscribed polygon meshes, boundary traces.
//! - [`envelope`]: discrete convex functions and their subdifferential cells.
//! - [`measures`]: slope densities, source measures, quadrature, assumption checks.
//! - [`solver`]: classical and weak (δ-continuation) Dirichlet solvers.
//! - [`verify`]: exact radial solutions, comparison checks, convergence studies.

pub mod envelope;
pub mod geometry;
pub mod measures;
pub mod mesh;
pub mod output;
pub mod solver;
pub mod verify;

pub use envelope::{ConvexEnvelope, EnvelopeError, HeightField};
pub use geometry::{ConvexPolygon, Facet, GeometryError, LiftedPoint, Point2};
pub use measures::{QuadratureConfig, SlopeDensity, SourceMeasure};
pub use mesh::{BoundaryData, ConvexDomain, DomainShape, Mesh, MeshError};
pub use solver::{SolveConfig, SolveError, SolveReport, SweepOrder};
pub use verify::{ConvergenceTable, RadialExactSolution};
