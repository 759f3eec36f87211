//! Discrete convex functions as lower envelopes of lifted mesh vertices.
//!
//! A [`HeightField`] assigns a height to every mesh vertex; the boundary
//! heights are pinned to the trace of `g`. [`build_envelope`] takes the lower
//! convex hull of the lifted vertices, which is the largest convex function
//! lying below all of them. Vertices strictly above that hull are *inactive*:
//! the envelope passes below them and their subdifferential has measure zero.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    hull_lenient, normal_cell, ConvexPolygon, GeometryError, LiftedPoint, LowerHull, Point2, EPS_HULL,
};
use crate::mesh::{boundary_trace, ConvexDomain, Mesh};
use crate::output::fmt_f64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvelopeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("expected {expected} {what} heights, got {got}")]
    HeightCount {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("height of vertex {vertex} is not finite")]
    NonFinite { vertex: usize },
    #[error("point ({x}, {y}) lies outside the mesh polygon")]
    OutsideDomain { x: f64, y: f64 },
    #[error("vertex table line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Heights `z_i` at interior vertices and pinned values at boundary vertices,
/// indexed like the mesh (interior first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    interior: Vec<f64>,
    boundary: Vec<f64>,
}

impl HeightField {
    pub fn new(interior: Vec<f64>, boundary: Vec<f64>) -> Self {
        Self { interior, boundary }
    }

    /// Interior heights as given, boundary heights from the trace of `g`.
    pub fn pinned(mesh: &Mesh, domain: &ConvexDomain, interior: Vec<f64>) -> Self {
        let boundary = boundary_trace(mesh, domain).into_iter().map(|(_, g)| g).collect();
        Self { interior, boundary }
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Height of mesh vertex `v`.
    pub fn get(&self, v: usize) -> f64 {
        if v < self.interior.len() {
            self.interior[v]
        } else {
            self.boundary[v - self.interior.len()]
        }
    }

    pub fn set_interior(&mut self, i: usize, z: f64) {
        self.interior[i] = z;
    }

    /// All heights in mesh vertex order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.interior.iter().chain(&self.boundary).copied().collect()
    }

    fn check(&self, mesh: &Mesh) -> Result<(), EnvelopeError> {
        if self.interior.len() != mesh.n_interior() {
            return Err(EnvelopeError::HeightCount {
                what: "interior",
                expected: mesh.n_interior(),
                got: self.interior.len(),
            });
        }
        if self.boundary.len() != mesh.n_boundary() {
            return Err(EnvelopeError::HeightCount {
                what: "boundary",
                expected: mesh.n_boundary(),
                got: self.boundary.len(),
            });
        }
        match self.interior.iter().chain(&self.boundary).position(|z| !z.is_finite()) {
            Some(vertex) => Err(EnvelopeError::NonFinite { vertex }),
            None => Ok(()),
        }
    }
}

/// The piecewise-linear convex function spanned by a height field.
///
/// Immutable once built; all queries take `&self` and may run concurrently.
#[derive(Debug, Clone)]
pub struct ConvexEnvelope<'m> {
    mesh: &'m Mesh,
    heights: HeightField,
    facets: Vec<crate::geometry::Facet>,
    active: Vec<bool>,
    vertex_facets: Vec<Vec<usize>>,
    values: Vec<f64>,
    scale: f64,
}

/// Lower convex hull of the lifted mesh vertices.
///
/// Boundary vertices are inserted first, so an interior vertex that is
/// coplanar with the hull (within tolerance) is treated as inactive.
pub fn build_envelope<'m>(mesh: &'m Mesh, heights: HeightField) -> Result<ConvexEnvelope<'m>, EnvelopeError> {
    heights.check(mesh)?;
    let n = mesh.n_vertices();
    let ni = mesh.n_interior();
    // insertion position k -> mesh vertex
    let order: Vec<usize> = (ni..n).chain(0..ni).collect();
    let lifted: Vec<LiftedPoint> = order
        .iter()
        .map(|&v| LiftedPoint::new(mesh.vertex(v), heights.get(v)))
        .collect();
    let hull = LowerHull::build(&lifted)?;
    let mut active = vec![false; n];
    for (k, &v) in order.iter().enumerate() {
        active[v] = hull.is_vertex(k);
    }
    let mut facets = hull.into_facets();
    for f in &mut facets {
        f.vertex_ids = f.vertex_ids.map(|k| order[k]);
    }
    facets.sort_by_key(|a| a.vertex_ids);
    let mut vertex_facets = vec![Vec::new(); n];
    for (t, f) in facets.iter().enumerate() {
        for &v in &f.vertex_ids {
            vertex_facets[v].push(t);
        }
    }
    let zspan = heights
        .to_vec()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
            (lo.min(z), hi.max(z))
        });
    let scale = mesh.polygon().diameter().max(zspan.1 - zspan.0).max(f64::MIN_POSITIVE);
    let mut env = ConvexEnvelope {
        mesh,
        heights,
        facets,
        active,
        vertex_facets,
        values: Vec::new(),
        scale,
    };
    env.values = mesh.vertices().iter().map(|&x| env.max_of_planes(x)).collect();
    Ok(env)
}

impl<'m> ConvexEnvelope<'m> {
    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn heights(&self) -> &HeightField {
        &self.heights
    }

    pub fn facets(&self) -> &[crate::geometry::Facet] {
        &self.facets
    }

    /// Whether the lifted vertex `v` is a vertex of the lower hull.
    pub fn is_active(&self, v: usize) -> bool {
        self.active[v]
    }

    pub fn active_flags(&self) -> &[bool] {
        &self.active
    }

    /// Envelope values at the mesh vertices.
    pub fn vertex_values(&self) -> &[f64] {
        &self.values
    }

    /// Coordinate and height scale used for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn max_of_planes(&self, x: Point2) -> f64 {
        self.facets
            .iter()
            .map(|f| f.plane_value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Envelope value at `x`, as the maximum of the facet planes.
    pub fn evaluate(&self, x: Point2) -> Result<f64, EnvelopeError> {
        if !self.mesh.polygon().contains(x, 1e-12 * self.scale) {
            return Err(EnvelopeError::OutsideDomain { x: x.x, y: x.y });
        }
        Ok(self.max_of_planes(x))
    }

    /// Subdifferential of the envelope at interior vertex `i`.
    ///
    /// Active vertices get the normal cell of their incident facets. Inactive
    /// vertices get the (flagged, zero-area) set of gradients of the facets
    /// containing `A_i`.
    ///
    /// # Panics
    /// If `i` is not an interior vertex index.
    pub fn subdifferential_cell(&self, i: usize) -> ConvexPolygon {
        assert!(i < self.mesh.n_interior(), "vertex {i} is not interior");
        if self.active[i] {
            let incident: Vec<_> = self.vertex_facets[i].iter().map(|&t| self.facets[t]).collect();
            return normal_cell(&incident);
        }
        let x = self.mesh.vertex(i);
        let tol = 1e-12 * self.scale;
        let grads: Vec<Point2> = self
            .facets
            .iter()
            .filter(|f| {
                let [a, b, c] = f.vertex_ids.map(|v| self.mesh.vertex(v));
                ConvexPolygon::from_ccw_unchecked(vec![a, b, c]).contains(x, tol)
            })
            .map(|f| f.gradient)
            .collect();
        hull_lenient(&grads).collapsed()
    }

    /// Whether the plane through `(A_i, u(A_i))` with slope `p` supports the
    /// envelope at every mesh vertex, up to `EPS_HULL` relative slack.
    pub fn membership_oracle(&self, i: usize, p: Point2) -> bool {
        let xi = self.mesh.vertex(i);
        let ui = self.values[i];
        let slack = EPS_HULL * self.scale;
        self.mesh
            .vertices()
            .iter()
            .zip(&self.values)
            .all(|(&v, &uv)| uv >= ui + p.dot(v - xi) - slack)
    }

    /// Writes `vertex_id,x,y,height,active,cell_area`. Boundary vertices have
    /// unbounded cells, written as `inf`.
    pub fn write_vertices_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertex_id,x,y,height,active,cell_area")?;
        for (v, x) in self.mesh.vertices().iter().enumerate() {
            let area = if self.mesh.is_interior(v) {
                self.subdifferential_cell(v).area()
            } else {
                f64::INFINITY
            };
            writeln!(
                w,
                "{v},{},{},{},{},{}",
                fmt_f64(x.x),
                fmt_f64(x.y),
                fmt_f64(self.heights.get(v)),
                u8::from(self.active[v]),
                fmt_f64(area)
            )?;
        }
        Ok(())
    }

    /// Writes `facet_id,v0,v1,v2,px,py` with the facet gradient `(px, py)`.
    pub fn write_facets_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "facet_id,v0,v1,v2,px,py")?;
        for (t, f) in self.facets.iter().enumerate() {
            let [a, b, c] = f.vertex_ids;
            writeln!(w, "{t},{a},{b},{c},{},{}", fmt_f64(f.gradient.x), fmt_f64(f.gradient.y))?;
        }
        Ok(())
    }
}

/// Reads heights back from a vertex table written by
/// [`ConvexEnvelope::write_vertices_csv`], checking positions against `mesh`.
pub fn heights_from_csv(mesh: &Mesh, text: &str) -> Result<HeightField, EnvelopeError> {
    let mut all = vec![f64::NAN; mesh.n_vertices()];
    let tol = 1e-9 * mesh.polygon().diameter();
    let mut seen = 0;
    for (k, line) in text.lines().enumerate().skip(1) {
        let line_no = k + 1;
        let bad = |message: String| EnvelopeError::Csv { line: line_no, message };
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad(format!("expected 6 columns, got {}", cols.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let v: usize = cols[0].trim().parse().map_err(|e| bad(format!("vertex id: {e}")))?;
        if v >= all.len() {
            return Err(bad(format!("vertex id {v} out of range")));
        }
        let x = Point2::new(num(cols[1])?, num(cols[2])?);
        if x.dist(mesh.vertex(v)) > tol {
            return Err(bad(format!("vertex {v} does not match the mesh position")));
        }
        all[v] = num(cols[3])?;
        seen += 1;
    }
    if seen != all.len() || all.iter().any(|z| z.is_nan()) {
        return Err(EnvelopeError::Csv {
            line: text.lines().count(),
            message: format!("expected {} vertices, found {seen}", all.len()),
        });
    }
    let boundary = all.split_off(mesh.n_interior());
    Ok(HeightField::new(all, boundary))
}
