//! Lower convex hull of lifted planar points.
//!
//! The lower hull of `{(x_i, z_i)}` projects to a regular triangulation of a
//! subset of the `x_i`. It is built incrementally: each new point removes the
//! facets it lies strictly below (its conflict region) and is joined to the
//! horizon. Hull edges carry "ghost" triangles standing for the vertical walls
//! of the 3D hull, so points outside the current planar hull are handled by
//! the same cavity rule. Only downward-facing facets are ever represented.
//!
//! Points that lie on (within tolerance) or above the current lower hull are
//! skipped, so coplanar configurations are triangulated by insertion order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{hull_lenient, orient2d, ConvexPolygon, GeometryError, Point2, EPS_GEOM, EPS_HULL};

/// A point of the graph space `ℝ² × ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub base: Point2,
    pub height: f64,
}

impl LiftedPoint {
    pub fn new(base: Point2, height: f64) -> Self {
        Self { base, height }
    }
}

/// A lower-supporting triangle of the lifted hull, with its plane
/// `z = offset + gradient · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub vertex_ids: [usize; 3],
    pub gradient: Point2,
    pub offset: f64,
}

impl Facet {
    #[inline]
    pub fn plane_value(&self, x: Point2) -> f64 {
        self.offset + self.gradient.dot(x)
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.vertex_ids.contains(&v)
    }
}

const GHOST: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    nb: [usize; 3],
    alive: bool,
    gradient: Point2,
}

impl Tri {
    fn ghost_index(&self) -> Option<usize> {
        self.v.iter().position(|&v| v == GHOST)
    }
}

struct Builder<'a> {
    pts: &'a [LiftedPoint],
    tris: Vec<Tri>,
    in_cavity: Vec<bool>,
    eps_orient: f64,
    eps_height: f64,
    dead: usize,
}

fn plane_gradient(a: LiftedPoint, b: LiftedPoint, c: LiftedPoint) -> Point2 {
    let (ab, ac) = (b.base - a.base, c.base - a.base);
    let (dzb, dzc) = (b.height - a.height, c.height - a.height);
    let det = ab.cross(ac);
    Point2::new((dzb * ac.y - dzc * ab.y) / det, (ab.x * dzc - ac.x * dzb) / det)
}

impl<'a> Builder<'a> {
    fn new(pts: &'a [LiftedPoint]) -> Self {
        let (mut lo, mut hi) = (pts[0].base, pts[0].base);
        let (mut zlo, mut zhi) = (pts[0].height, pts[0].height);
        for p in pts {
            lo = Point2::new(lo.x.min(p.base.x), lo.y.min(p.base.y));
            hi = Point2::new(hi.x.max(p.base.x), hi.y.max(p.base.y));
            zlo = zlo.min(p.height);
            zhi = zhi.max(p.height);
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
        let zspan = zhi - zlo;
        Self {
            pts,
            tris: Vec::new(),
            in_cavity: Vec::new(),
            eps_orient: EPS_GEOM * span * span,
            eps_height: EPS_HULL * span.max(zspan).max(f64::MIN_POSITIVE),
            dead: 0,
        }
    }

    fn base(&self, v: usize) -> Point2 {
        self.pts[v].base
    }

    fn push(&mut self, v: [usize; 3]) -> usize {
        let gradient = if v.contains(&GHOST) {
            Point2::ORIGIN
        } else {
            plane_gradient(self.pts[v[0]], self.pts[v[1]], self.pts[v[2]])
        };
        self.tris.push(Tri {
            v,
            nb: [usize::MAX; 3],
            alive: true,
            gradient,
        });
        self.in_cavity.push(false);
        self.tris.len() - 1
    }

    fn conflicts(&self, t: usize, p: usize) -> bool {
        let tri = &self.tris[t];
        let q = self.pts[p];
        match tri.ghost_index() {
            None => {
                let a = self.pts[tri.v[0]];
                let plane = a.height + tri.gradient.dot(q.base - a.base);
                q.height < plane - self.eps_height
            }
            Some(k) => {
                let s = self.pts[tri.v[(k + 1) % 3]];
                let t = self.pts[tri.v[(k + 2) % 3]];
                let o = orient2d(s.base, t.base, q.base);
                if o > self.eps_orient {
                    true
                } else if o < -self.eps_orient {
                    false
                } else {
                    let e = t.base - s.base;
                    let lambda = (q.base - s.base).dot(e) / e.norm_sq();
                    let line = s.height + lambda * (t.height - s.height);
                    q.height < line - self.eps_height
                }
            }
        }
    }

    fn init(&mut self) -> Result<[usize; 3], GeometryError> {
        let n = self.pts.len();
        let a = 0;
        let tol = self.eps_orient.sqrt();
        let b = (1..n)
            .find(|&j| self.base(j).dist(self.base(a)) > tol)
            .ok_or_else(|| GeometryError::DegenerateInput("all points coincide".into()))?;
        let c = (1..n)
            .filter(|&j| j != b)
            .find(|&j| orient2d(self.base(a), self.base(b), self.base(j)).abs() > self.eps_orient)
            .ok_or_else(|| GeometryError::DegenerateInput("all base points are collinear".into()))?;
        let (b, c) = if orient2d(self.base(a), self.base(b), self.base(c)) > 0.0 {
            (b, c)
        } else {
            (c, b)
        };
        let ids = [
            self.push([a, b, c]),
            self.push([b, a, GHOST]),
            self.push([c, b, GHOST]),
            self.push([a, c, GHOST]),
        ];
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for &t in &ids {
            for k in 0..3 {
                let v = self.tris[t].v;
                edges.insert((v[(k + 1) % 3], v[(k + 2) % 3]), t);
            }
        }
        for &t in &ids {
            for k in 0..3 {
                let v = self.tris[t].v;
                self.tris[t].nb[k] = edges[&(v[(k + 2) % 3], v[(k + 1) % 3])];
            }
        }
        Ok([a, b, c])
    }

    fn insert(&mut self, p: usize) {
        let Some(seed) = (0..self.tris.len()).find(|&t| self.tris[t].alive && self.conflicts(t, p)) else {
            return;
        };
        let mut cavity = vec![seed];
        self.in_cavity[seed] = true;
        let mut i = 0;
        while i < cavity.len() {
            let t = cavity[i];
            i += 1;
            for k in 0..3 {
                let nb = self.tris[t].nb[k];
                if !self.in_cavity[nb] && self.conflicts(nb, p) {
                    self.in_cavity[nb] = true;
                    cavity.push(nb);
                }
            }
        }

        // Grow the cavity until it is star-shaped from p.
        let xp = self.base(p);
        loop {
            let mut grown = false;
            let mut idx = 0;
            while idx < cavity.len() {
                let t = cavity[idx];
                idx += 1;
                for k in 0..3 {
                    let nb = self.tris[t].nb[k];
                    if self.in_cavity[nb] {
                        continue;
                    }
                    let v = self.tris[t].v;
                    let (u, w) = (v[(k + 1) % 3], v[(k + 2) % 3]);
                    if u != GHOST && w != GHOST && orient2d(self.base(u), self.base(w), xp) <= self.eps_orient {
                        self.in_cavity[nb] = true;
                        cavity.push(nb);
                        grown = true;
                    }
                }
            }
            if !grown {
                break;
            }
        }

        let mut boundary = Vec::new();
        for &t in &cavity {
            for k in 0..3 {
                let nb = self.tris[t].nb[k];
                if !self.in_cavity[nb] {
                    let v = self.tris[t].v;
                    boundary.push((v[(k + 1) % 3], v[(k + 2) % 3], nb, t));
                }
            }
        }

        let mut starts: HashMap<usize, usize> = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for (u, w, nb, old) in boundary {
            let t = self.push([u, w, p]);
            self.tris[t].nb[2] = nb;
            let slot = self.tris[nb]
                .nb
                .iter()
                .position(|&x| x == old)
                .expect("adjacency is symmetric");
            self.tris[nb].nb[slot] = t;
            starts.insert(u, t);
            created.push(t);
        }
        for &t in &created {
            let w = self.tris[t].v[1];
            let next = starts[&w];
            self.tris[t].nb[0] = next;
            self.tris[next].nb[1] = t;
        }
        for &t in &cavity {
            self.tris[t].alive = false;
            self.in_cavity[t] = false;
        }
        self.dead += cavity.len();
        if self.dead > 64 && self.dead * 2 > self.tris.len() {
            self.compact();
        }
    }

    fn compact(&mut self) {
        let mut map = vec![usize::MAX; self.tris.len()];
        let mut next = 0;
        for (i, t) in self.tris.iter().enumerate() {
            if t.alive {
                map[i] = next;
                next += 1;
            }
        }
        self.tris.retain(|t| t.alive);
        for t in &mut self.tris {
            for nb in &mut t.nb {
                *nb = map[*nb];
            }
        }
        self.in_cavity = vec![false; self.tris.len()];
        self.dead = 0;
    }
}

/// The lower hull of a lifted point set together with vertex incidence.
#[derive(Debug, Clone)]
pub struct LowerHull {
    facets: Vec<Facet>,
    on_hull: Vec<bool>,
}

impl LowerHull {
    pub fn build(points: &[LiftedPoint]) -> Result<Self, GeometryError> {
        if let Some(index) = points.iter().position(|p| !p.base.is_finite() || !p.height.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
        if points.len() < 3 {
            return Err(GeometryError::DegenerateInput(format!(
                "need at least three points, got {}",
                points.len()
            )));
        }
        let mut builder = Builder::new(points);
        let first = builder.init()?;
        for p in 0..points.len() {
            if !first.contains(&p) {
                builder.insert(p);
            }
        }
        let mut on_hull = vec![false; points.len()];
        let mut facets = Vec::new();
        for t in builder.tris.iter().filter(|t| t.alive && !t.v.contains(&GHOST)) {
            for &v in &t.v {
                on_hull[v] = true;
            }
            let a = points[t.v[0]];
            facets.push(Facet {
                vertex_ids: t.v,
                gradient: t.gradient,
                offset: a.height - t.gradient.dot(a.base),
            });
        }
        facets.sort_by_key(|a| a.vertex_ids);
        Ok(Self { facets, on_hull })
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn into_facets(self) -> Vec<Facet> {
        self.facets
    }

    /// Whether input point `i` is a vertex of the lower hull.
    pub fn is_vertex(&self, i: usize) -> bool {
        self.on_hull[i]
    }

    pub fn vertex_flags(&self) -> &[bool] {
        &self.on_hull
    }
}

/// Downward-facing facets of the convex hull of `points`.
pub fn lower_hull_lifted(points: &[LiftedPoint]) -> Result<Vec<Facet>, GeometryError> {
    LowerHull::build(points).map(LowerHull::into_facets)
}

/// Subdifferential of a lower-hull vertex: the convex hull of the gradients
/// of its incident facets. Degenerate (flagged) when the vertex is not
/// strictly extreme.
pub fn normal_cell(incident_facets: &[Facet]) -> ConvexPolygon {
    let grads: Vec<Point2> = incident_facets.iter().map(|f| f.gradient).collect();
    hull_lenient(&grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::convex_hull_2d;
    use proptest::prelude::*;

    fn lp(x: f64, y: f64, z: f64) -> LiftedPoint {
        LiftedPoint::new(Point2::new(x, y), z)
    }

    fn total_area(points: &[LiftedPoint], facets: &[Facet]) -> f64 {
        facets
            .iter()
            .map(|f| {
                let [a, b, c] = f.vertex_ids;
                0.5 * orient2d(points[a].base, points[b].base, points[c].base)
            })
            .sum()
    }

    #[test]
    fn flat_square_gives_two_flat_facets() {
        let pts = [
            lp(0.0, 0.0, 0.0),
            lp(1.0, 0.0, 0.0),
            lp(1.0, 1.0, 0.0),
            lp(0.0, 1.0, 0.0),
        ];
        let facets = lower_hull_lifted(&pts).unwrap();
        assert_eq!(facets.len(), 2);
        for f in &facets {
            assert_eq!(f.gradient, Point2::ORIGIN);
        }
        // deterministic: same triangulation on repeated builds
        assert_eq!(facets, lower_hull_lifted(&pts).unwrap());
    }

    #[test]
    fn cone_over_square() {
        let t = 0.3;
        let pts = [
            lp(0.0, 0.0, -t),
            lp(1.0, 1.0, 0.0),
            lp(-1.0, 1.0, 0.0),
            lp(-1.0, -1.0, 0.0),
            lp(1.0, -1.0, 0.0),
        ];
        let hull = LowerHull::build(&pts).unwrap();
        let facets = hull.facets();
        assert_eq!(facets.len(), 4);
        let mut grads: Vec<(i64, i64)> = facets
            .iter()
            .map(|f| ((f.gradient.x / t).round() as i64, (f.gradient.y / t).round() as i64))
            .collect();
        grads.sort();
        assert_eq!(grads, vec![(-1, 0), (0, -1), (0, 1), (1, 0)]);
        for f in facets {
            assert!(f.contains_vertex(0));
            assert!((f.gradient.norm() - t).abs() < 1e-14);
        }
        let cell = normal_cell(facets);
        assert!((cell.area() - 2.0 * t * t).abs() < 1e-14);
        assert!(hull.vertex_flags().iter().all(|&a| a));
    }

    #[test]
    fn point_above_is_not_a_vertex() {
        let pts = [
            lp(0.0, 0.0, 0.1),
            lp(1.0, 1.0, 0.0),
            lp(-1.0, 1.0, 0.0),
            lp(-1.0, -1.0, 0.0),
            lp(1.0, -1.0, 0.0),
        ];
        let hull = LowerHull::build(&pts).unwrap();
        assert!(!hull.is_vertex(0));
        assert_eq!(hull.facets().len(), 2);
        // a coplanar point inserted after the hull is spanned is skipped
        let mut flat = pts;
        flat.rotate_left(1);
        flat[4].height = 0.0;
        assert!(!LowerHull::build(&flat).unwrap().is_vertex(4));
    }

    #[test]
    fn lowered_hull_point_on_edge() {
        // a boundary point on the segment between two hull vertices, below it
        let pts = [
            lp(0.0, 0.0, 0.0),
            lp(2.0, 0.0, 0.0),
            lp(1.0, 1.0, 0.0),
            lp(1.0, 0.0, -0.5),
        ];
        let hull = LowerHull::build(&pts).unwrap();
        assert!(hull.is_vertex(3));
        assert_eq!(hull.facets().len(), 2);
        assert!((total_area(&pts, hull.facets()) - 1.0).abs() < 1e-14);
        // same point above the segment is not on the lower hull
        let mut up = pts;
        up[3].height = 0.5;
        let hull = LowerHull::build(&up).unwrap();
        assert!(!hull.is_vertex(3));
    }

    #[test]
    fn collinear_bases_are_rejected() {
        let pts = [lp(0.0, 0.0, 1.0), lp(1.0, 1.0, 0.0), lp(2.0, 2.0, 3.0)];
        assert!(matches!(
            lower_hull_lifted(&pts),
            Err(GeometryError::DegenerateInput(_))
        ));
        assert!(lower_hull_lifted(&pts[..2]).is_err());
    }

    #[test]
    fn quadratic_grid_gradients_match_finite_differences() {
        let n = 9;
        let h = 1.0 / (n - 1) as f64;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 * h, j as f64 * h);
                pts.push(lp(x, y, 0.5 * (x * x + y * y)));
            }
        }
        let hull = LowerHull::build(&pts).unwrap();
        assert!(hull.vertex_flags().iter().all(|&a| a));
        assert!((total_area(&pts, hull.facets()) - 1.0).abs() < 1e-12);
        for f in hull.facets() {
            let [a, b, c] = f.vertex_ids.map(|v| pts[v].base);
            // the plane interpolating |x|²/2 has the circumcenter as gradient
            let d = 2.0 * orient2d(a, b, c);
            let (ab, ac) = (b - a, c - a);
            let center = a + Point2::new(
                (ac.y * ab.norm_sq() - ab.y * ac.norm_sq()) / d,
                (ab.x * ac.norm_sq() - ac.x * ab.norm_sq()) / d,
            );
            assert!((f.gradient - center).norm() < 1e-12, "{:?} vs {:?}", f.gradient, center);
            // and the exact gradient at the centroid is within O(h)
            let centroid = (a + b + c) * (1.0 / 3.0);
            assert!((f.gradient - centroid).norm() <= h);
        }
    }

    fn random_lifted(seed: u64, n: usize) -> Vec<LiftedPoint> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = rng.gen_range(-1.0..1.0);
                let y = rng.gen_range(-1.0..1.0);
                lp(x, y, 0.5 * (x * x + y * y) + rng.gen_range(-0.2..0.2))
            })
            .collect()
    }

    #[test]
    fn union_of_facets_covers_planar_hull() {
        for seed in 0..10 {
            let pts = random_lifted(seed, 60);
            let facets = lower_hull_lifted(&pts).unwrap();
            let bases: Vec<Point2> = pts.iter().map(|p| p.base).collect();
            let hull = convex_hull_2d(&bases).unwrap();
            assert!((total_area(&pts, &facets) - hull.area()).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_cells_are_disjoint_and_additive() {
        for seed in 0..10 {
            let pts = random_lifted(100 + seed, 40);
            let hull = LowerHull::build(&pts).unwrap();
            let bases: Vec<Point2> = pts.iter().map(|p| p.base).collect();
            let planar = convex_hull_2d(&bases).unwrap();
            let mut total = 0.0;
            let mut cells = Vec::new();
            #[allow(clippy::needless_range_loop)]
            for v in 0..pts.len() {
                if !hull.is_vertex(v) {
                    continue;
                }
                let incident: Vec<Facet> = hull.facets().iter().filter(|f| f.contains_vertex(v)).copied().collect();
                let cell = normal_cell(&incident);
                // restrict to interior vertices: cells of planar-hull vertices are unbounded
                if planar.inner_distance(pts[v].base) > 1e-9 {
                    total += cell.area();
                    cells.push(cell);
                }
            }
            for i in 0..cells.len() {
                for j in i + 1..cells.len() {
                    let overlap = cells[i].intersect(&cells[j]).area();
                    assert!(overlap < 1e-12, "cells {i} and {j} overlap by {overlap}");
                }
            }
            assert!(total > 0.0);
        }
    }

    proptest! {
        #[test]
        fn lower_hull_supports_every_point(seed in 0u64..10_000, n in 4usize..40) {
            let pts = random_lifted(seed, n);
            if let Ok(facets) = lower_hull_lifted(&pts) {
                let scale = 2.0;
                for f in &facets {
                    for q in &pts {
                        prop_assert!(q.height >= f.plane_value(q.base) - EPS_HULL * scale * 10.0);
                    }
                }
            }
        }
    }
}
