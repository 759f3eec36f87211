//! Domains, inscribed polygonal meshes and boundary traces.
//!
//! A [`Mesh`] has its boundary vertices on `∂Ω` in counter-clockwise order,
//! so `Ω_h` (the interior of their convex hull) is an inscribed convex
//! polygon; interior vertices come from an axis-aligned grid kept at distance
//! more than half a spacing from `∂Ω_h`. All vertices are triangulated by
//! Delaunay (lower hull of the points lifted to a paraboloid).
//!
//! Vertex ids are global: interior vertices first (`0..n_interior`), then
//! boundary vertices.

mod domain;
mod profile;

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

pub use domain::{BoundaryData, ConvexDomain, DomainShape};
pub use profile::AssumptionProfile;

use crate::geometry::{convex_hull_2d, orient2d, ConvexPolygon, GeometryError, LiftedPoint, LowerHull, Point2};
use crate::output::fmt_f64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("domain is not strictly convex; polygons are rejected")]
    NotStrictlyConvex,
    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Conforming triangulation of an inscribed convex polygon.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point2>,
    n_interior: usize,
    boundary_params: Option<Vec<f64>>,
    triangles: Vec<[usize; 3]>,
    polygon: ConvexPolygon,
    h: f64,
    vertex_triangles: Vec<Vec<usize>>,
}

impl Mesh {
    /// Triangulates custom vertex sets. `boundary` must be in strictly convex
    /// counter-clockwise position and every interior point strictly inside it.
    pub fn new(interior: Vec<Point2>, boundary: Vec<Point2>) -> Result<Self, MeshError> {
        Self::assemble(interior, boundary, None)
    }

    fn assemble(
        interior: Vec<Point2>,
        boundary: Vec<Point2>,
        boundary_params: Option<Vec<f64>>,
    ) -> Result<Self, MeshError> {
        let m = boundary.len();
        if m < 3 {
            return Err(MeshError::InvalidBoundary(format!("{m} boundary vertices")));
        }
        let polygon = convex_hull_2d(&boundary).map_err(|e| MeshError::DegenerateDomain(e.to_string()))?;
        let scale = polygon.diameter();
        for j in 0..m {
            let (a, b, c) = (boundary[j], boundary[(j + 1) % m], boundary[(j + 2) % m]);
            if orient2d(a, b, c) <= 1e-14 * scale * scale {
                return Err(MeshError::InvalidBoundary(format!(
                    "boundary vertex {} is not a strictly convex counter-clockwise corner",
                    (j + 1) % m
                )));
            }
        }
        if polygon.len() != m {
            return Err(MeshError::InvalidBoundary("boundary cycle is not convex".into()));
        }
        if let Some(i) = interior.iter().position(|&x| polygon.inner_distance(x) <= 0.0) {
            return Err(MeshError::InvalidParameter(format!(
                "interior vertex {i} is not strictly inside the boundary polygon"
            )));
        }

        let n_interior = interior.len();
        let mut vertices = interior;
        vertices.extend_from_slice(&boundary);
        let center = polygon.centroid();
        let lifted: Vec<LiftedPoint> = vertices
            .iter()
            .map(|&x| LiftedPoint::new(x, (x - center).norm_sq()))
            .collect();
        let hull = LowerHull::build(&lifted)?;
        if let Some(v) = hull.vertex_flags().iter().position(|&on| !on) {
            return Err(MeshError::DegenerateDomain(format!(
                "vertex {v} was dropped by the triangulation (duplicate point?)"
            )));
        }
        let triangles: Vec<[usize; 3]> = hull.facets().iter().map(|f| f.vertex_ids).collect();
        let mut vertex_triangles = vec![Vec::new(); vertices.len()];
        let mut h: f64 = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                vertex_triangles[tri[k]].push(t);
                h = h.max(vertices[tri[k]].dist(vertices[tri[(k + 1) % 3]]));
            }
        }
        Ok(Self {
            vertices,
            n_interior,
            boundary_params,
            triangles,
            polygon,
            h,
            vertex_triangles,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point2 {
        self.vertices[v]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.vertices.len() - self.n_interior
    }

    pub fn interior_vertices(&self) -> &[Point2] {
        &self.vertices[..self.n_interior]
    }

    pub fn boundary_vertices(&self) -> &[Point2] {
        &self.vertices[self.n_interior..]
    }

    pub fn is_interior(&self, v: usize) -> bool {
        v < self.n_interior
    }

    /// Boundary parameters of the boundary vertices, when built from a domain.
    pub fn boundary_params(&self) -> Option<&[f64]> {
        self.boundary_params.as_deref()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Triangles incident to vertex `v`.
    pub fn star(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    /// `Ω_h` as a convex polygon.
    pub fn polygon(&self) -> &ConvexPolygon {
        &self.polygon
    }

    /// Largest triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Longest boundary edge of `Ω_h`.
    pub fn max_boundary_facet_diameter(&self) -> f64 {
        let b = self.boundary_vertices();
        (0..b.len())
            .map(|j| b[j].dist(b[(j + 1) % b.len()]))
            .fold(0.0, f64::max)
    }

    /// Triangle containing `x` (closed, with tolerance), if any.
    pub fn locate(&self, x: Point2) -> Option<usize> {
        let tol = 1e-12 * self.h.max(1.0);
        (0..self.triangles.len()).find(|&t| {
            let bc = barycentric(self.triangle_points(t), x);
            bc.iter().all(|&l| l >= -tol)
        })
    }

    /// The piecewise-linear hat function of vertex `v` at `x`; zero outside
    /// the star of `v` and outside `Ω̄_h`.
    pub fn hat(&self, v: usize, x: Point2) -> f64 {
        let tol = 1e-12 * self.h.max(1.0);
        let mut value: f64 = 0.0;
        for &t in &self.vertex_triangles[v] {
            let tri = self.triangles[t];
            let bc = barycentric(self.triangle_points(t), x);
            if bc.iter().all(|&l| l >= -tol) {
                let k = tri.iter().position(|&w| w == v).expect("star triangle contains v");
                value = value.max(bc[k].clamp(0.0, 1.0));
            }
        }
        value
    }

    /// Writes `vertex_id,kind,x,y` rows.
    pub fn write_vertices_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertex_id,kind,x,y")?;
        for (v, x) in self.vertices.iter().enumerate() {
            let kind = if self.is_interior(v) { "interior" } else { "boundary" };
            writeln!(w, "{v},{kind},{},{}", fmt_f64(x.x), fmt_f64(x.y))?;
        }
        Ok(())
    }

    /// Writes `triangle_id,v0,v1,v2` rows.
    pub fn write_triangles_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "triangle_id,v0,v1,v2")?;
        for (t, [a, b, c]) in self.triangles.iter().enumerate() {
            writeln!(w, "{t},{a},{b},{c}")?;
        }
        Ok(())
    }
}

/// Barycentric coordinates of `x` in triangle `[a, b, c]`.
pub fn barycentric([a, b, c]: [Point2; 3], x: Point2) -> [f64; 3] {
    let det = orient2d(a, b, c);
    let la = orient2d(x, b, c) / det;
    let lb = orient2d(a, x, c) / det;
    [la, lb, 1.0 - la - lb]
}

/// Inscribed mesh with `n_boundary` vertices at uniform boundary parameters
/// and interior grid spacing `spacing`.
pub fn build_mesh(domain: &ConvexDomain, n_boundary: usize, spacing: f64) -> Result<Mesh, MeshError> {
    if n_boundary < 4 {
        return Err(MeshError::InvalidParameter(format!(
            "n_boundary must be at least 4, got {n_boundary}"
        )));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(MeshError::InvalidParameter(format!(
            "interior spacing must be positive and finite, got {spacing}"
        )));
    }
    let params: Vec<f64> = (0..n_boundary).map(|j| j as f64 / n_boundary as f64).collect();
    let boundary: Vec<Point2> = params.iter().map(|&t| domain.boundary_point(t)).collect();
    let polygon = convex_hull_2d(&boundary).map_err(|e| MeshError::DegenerateDomain(e.to_string()))?;
    if polygon.len() != n_boundary {
        return Err(MeshError::DegenerateDomain(format!(
            "only {} of {n_boundary} boundary samples are extreme",
            polygon.len()
        )));
    }

    let c = domain.center();
    let (lo, hi) = polygon.bounding_box().expect("non-empty polygon");
    let i0 = ((lo.x - c.x) / spacing).ceil() as i64;
    let i1 = ((hi.x - c.x) / spacing).floor() as i64;
    let j0 = ((lo.y - c.y) / spacing).ceil() as i64;
    let j1 = ((hi.y - c.y) / spacing).floor() as i64;
    let mut interior = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let x = c + Point2::new(i as f64 * spacing, j as f64 * spacing);
            if polygon.inner_distance(x) > 0.5 * spacing {
                interior.push(x);
            }
        }
    }
    interior.sort_by(|a, b| a.lex_cmp(b));
    Mesh::assemble(interior, boundary, Some(params))
}

/// Side length of the fixed evaluation grid over `Ω̄_δ`.
pub const EVAL_GRID: usize = 201;

/// Nodes of an `n × n` grid over the bounding square of `Ω` that lie in
/// `Ω̄_δ = {x ∈ Ω : dist(x, ∂Ω) ≥ δ}`, row by row.
pub fn inner_grid(domain: &ConvexDomain, delta: f64, n: usize) -> Vec<Point2> {
    let (c, r) = (domain.center(), 0.5 * domain.diameter());
    let step = 2.0 * r / (n - 1) as f64;
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let x = c + Point2::new(-r + step * i as f64, -r + step * j as f64);
            if domain.contains(x) && domain.dist_to_boundary(x) >= delta {
                out.push(x);
            }
        }
    }
    out
}

/// Outcome of [`check_mesh`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    /// Triangles are positively oriented, meet edge-to-edge and tile `Ω_h`.
    pub conforming: bool,
    /// The boundary cycle is strictly convex, so `Ω_h` is convex.
    pub convex: bool,
    /// Every boundary vertex lies on `∂Ω`.
    pub boundary_on_domain: bool,
    /// Every interior vertex lies strictly inside `Ω_h`.
    pub interior_strictly_inside: bool,
    /// Sampled check of `Ω̄_δ ⊂ Ω_h`.
    pub inner_region_contained: bool,
    pub delta: f64,
    pub max_boundary_facet_diameter: f64,
    pub h: f64,
    pub n_interior: usize,
    pub n_boundary: usize,
}

impl MeshReport {
    /// All triangulation conditions (containment of `Ω̄_δ` excluded).
    pub fn is_valid_mesh(&self) -> bool {
        self.conforming && self.convex && self.boundary_on_domain && self.interior_strictly_inside
    }
}

/// Checks the mesh conditions and whether `Ω̄_δ ⊂ Ω_h`, sampling `Ω̄_δ` on a
/// 201×201 grid plus its boundary curve.
pub fn check_mesh(mesh: &Mesh, domain: &ConvexDomain, delta: f64) -> MeshReport {
    let scale = mesh.polygon.diameter().max(1.0);

    let mut conforming = true;
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let mut area = 0.0;
    for t in 0..mesh.triangles.len() {
        let tri = mesh.triangles[t];
        let a2 = orient2d(mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2]));
        conforming &= a2 > 0.0;
        area += 0.5 * a2;
        for k in 0..3 {
            let (u, v) = (tri[k], tri[(k + 1) % 3]);
            *edges.entry((u.min(v), u.max(v))).or_default() += 1;
        }
    }
    let nb = mesh.n_boundary();
    let boundary_edge = |u: usize, v: usize| {
        let (u, v) = (u.min(v), u.max(v));
        !mesh.is_interior(u) && (v - u == 1 || v - u == nb - 1) && !mesh.is_interior(v)
    };
    for (&(u, v), &count) in &edges {
        let expected = if boundary_edge(u, v) { 1 } else { 2 };
        conforming &= count == expected;
    }
    conforming &= (area - mesh.polygon.area()).abs() <= 1e-10 * scale * scale;

    let b = mesh.boundary_vertices();
    let convex = (0..nb).all(|j| orient2d(b[j], b[(j + 1) % nb], b[(j + 2) % nb]) > 0.0);
    let boundary_on_domain = b.iter().all(|&x| (domain.level(x) - 1.0).abs() <= 1e-9);
    let interior_strictly_inside = mesh
        .interior_vertices()
        .iter()
        .all(|&x| mesh.polygon.inner_distance(x) > 0.0);

    let tol = 1e-9 * scale;
    let mut contained = inner_grid(domain, delta, EVAL_GRID)
        .into_iter()
        .all(|x| mesh.polygon.contains(x, tol));
    for k in 0..1024 {
        let t = k as f64 / 1024.0;
        let x = domain.boundary_point(t) - domain.normal(t) * delta;
        if domain.contains(x) && domain.dist_to_boundary(x) >= delta - 1e-12 && !mesh.polygon.contains(x, tol) {
            contained = false;
        }
    }

    MeshReport {
        conforming,
        convex,
        boundary_on_domain,
        interior_strictly_inside,
        inner_region_contained: contained,
        delta,
        max_boundary_facet_diameter: mesh.max_boundary_facet_diameter(),
        h: mesh.h,
        n_interior: mesh.n_interior,
        n_boundary: nb,
    }
}

/// `(global vertex id, g(B_j))` for every boundary vertex.
pub fn boundary_trace(mesh: &Mesh, domain: &ConvexDomain) -> Vec<(usize, f64)> {
    mesh.boundary_vertices()
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let t = match mesh.boundary_params() {
                Some(ts) => ts[j],
                None => domain.param_of(x),
            };
            (mesh.n_interior + j, domain.boundary_data().value(t, x))
        })
        .collect()
}
