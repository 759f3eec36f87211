use serde::{Deserialize, Serialize};

use super::{orient2d, GeometryError, Point2, EPS_GEOM};

/// A convex polygon given by its extreme points in counter-clockwise order.
///
/// Degenerate polygons (a single point or a segment) appear as subdifferentials
/// of non-strict vertices; they carry `degenerate = true` and zero area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
    degenerate: bool,
}

impl ConvexPolygon {
    /// Wraps vertices that are already known to be in strictly convex
    /// counter-clockwise position.
    pub fn from_ccw_unchecked(vertices: Vec<Point2>) -> Self {
        let degenerate = vertices.len() < 3;
        Self { vertices, degenerate }
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            degenerate: true,
        }
    }

    /// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
    pub fn rectangle(min: Point2, max: Point2) -> Self {
        Self::from_ccw_unchecked(vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)])
    }

    /// The same point set flagged as a measure-zero cell.
    pub fn collapsed(mut self) -> Self {
        self.degenerate = true;
        self
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Shoelace area; zero for degenerate polygons.
    pub fn area(&self) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        let n = self.vertices.len();
        let origin = self.vertices[0];
        let mut twice = 0.0;
        for i in 1..n - 1 {
            twice += orient2d(origin, self.vertices[i], self.vertices[i + 1]);
        }
        0.5 * twice.max(0.0)
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len();
        if n == 0 {
            return Point2::ORIGIN;
        }
        let area = self.area();
        if area <= 0.0 {
            let sum = self.vertices.iter().fold(Point2::ORIGIN, |acc, &v| acc + v);
            return sum * (1.0 / n as f64);
        }
        let o = self.vertices[0];
        let mut c = Point2::ORIGIN;
        for i in 1..n - 1 {
            let (a, b) = (self.vertices[i], self.vertices[i + 1]);
            let w = 0.5 * orient2d(o, a, b);
            c += (o + a + b) * (w / 3.0);
        }
        c * (1.0 / area)
    }

    pub fn bounding_box(&self) -> Option<(Point2, Point2)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                Point2::new(lo.x.min(v.x), lo.y.min(v.y)),
                Point2::new(hi.x.max(v.x), hi.y.max(v.y)),
            )
        }))
    }

    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    /// Closed membership with an absolute tolerance on the edge distance.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => self.vertices[0].dist(p) <= tol,
            2 => segment_distance(self.vertices[0], self.vertices[1], p) <= tol,
            n => (0..n).all(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let len = a.dist(b);
                orient2d(a, b, p) >= -tol * len
            }),
        }
    }

    /// Signed distance from `p` to the nearest edge line, positive inside.
    /// Only meaningful for non-degenerate polygons.
    pub fn inner_distance(&self, p: Point2) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                orient2d(a, b, p) / a.dist(b)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Intersection with the half-plane `normal · x ≤ bound`.
    pub fn clip(&self, normal: Point2, bound: f64) -> ConvexPolygon {
        let n = self.vertices.len();
        if n == 0 {
            return ConvexPolygon::empty();
        }
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let fa = normal.dot(a) - bound;
            let fb = normal.dot(b) - bound;
            if fa <= 0.0 {
                out.push(a);
            }
            if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
                let t = fa / (fa - fb);
                out.push(a.lerp(b, t));
            }
        }
        dedup_cycle(&mut out);
        let degenerate = out.len() < 3 || {
            let area2: f64 = (1..out.len().saturating_sub(1))
                .map(|i| orient2d(out[0], out[i], out[i + 1]))
                .sum();
            area2 <= 0.0
        };
        ConvexPolygon {
            vertices: out,
            degenerate,
        }
    }

    /// Intersection with another convex polygon.
    pub fn intersect(&self, other: &ConvexPolygon) -> ConvexPolygon {
        let n = other.vertices.len();
        if n < 3 {
            return ConvexPolygon::empty();
        }
        let mut acc = self.clone();
        for i in 0..n {
            let a = other.vertices[i];
            let b = other.vertices[(i + 1) % n];
            // keep the left side of a -> b
            let e = b - a;
            let normal = Point2::new(e.y, -e.x);
            acc = acc.clip(normal, normal.dot(a));
            if acc.is_empty() {
                break;
            }
        }
        acc
    }

    /// Fan triangulation from the first vertex.
    pub fn fan_triangles(&self) -> impl Iterator<Item = [Point2; 3]> + '_ {
        let n = if self.degenerate { 0 } else { self.vertices.len() };
        (1..n.saturating_sub(1)).map(move |i| [self.vertices[0], self.vertices[i], self.vertices[i + 1]])
    }

    /// Sample points on the boundary, `per_edge` per edge (endpoints included once).
    pub fn boundary_samples(&self, per_edge: usize) -> Vec<Point2> {
        let n = self.vertices.len();
        let per_edge = per_edge.max(1);
        let mut out = Vec::with_capacity(n * per_edge);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            for k in 0..per_edge {
                out.push(a.lerp(b, k as f64 / per_edge as f64));
            }
        }
        out
    }
}

pub(crate) fn segment_distance(a: Point2, b: Point2, p: Point2) -> f64 {
    let e = b - a;
    let len2 = e.norm_sq();
    if len2 == 0.0 {
        return a.dist(p);
    }
    let t = ((p - a).dot(e) / len2).clamp(0.0, 1.0);
    a.lerp(b, t).dist(p)
}

fn dedup_cycle(pts: &mut Vec<Point2>) {
    let scale = pts.iter().map(|p| p.norm()).fold(1e-300, f64::max);
    let tol = 1e-14 * scale;
    pts.dedup_by(|a, b| a.dist(*b) <= tol);
    while pts.len() > 1 && pts[0].dist(pts[pts.len() - 1]) <= tol {
        pts.pop();
    }
}

fn coordinate_scale(points: &[Point2]) -> f64 {
    points
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE)
}

/// Drops points within `tol` of an earlier kept point. Near-duplicates need
/// not be adjacent in lexicographic order, so the scan looks back over the
/// kept points whose x lies within `tol`.
fn merge_near_duplicates(sorted: &mut Vec<Point2>, tol: f64) {
    let mut kept: Vec<Point2> = Vec::with_capacity(sorted.len());
    for &p in sorted.iter() {
        let dup = kept
            .iter()
            .rev()
            .take_while(|q| p.x - q.x <= tol)
            .any(|q| q.dist(p) <= tol);
        if !dup {
            kept.push(p);
        }
    }
    *sorted = kept;
}

/// Andrew's monotone chain, keeping only strictly extreme points.
fn monotone_chain(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.lex_cmp(b));
    let scale = coordinate_scale(&pts);
    merge_near_duplicates(&mut pts, EPS_GEOM * scale);
    if pts.len() < 3 {
        return pts;
    }
    let eps = EPS_GEOM * scale * scale;
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && orient2d(hull[hull.len() - 2], hull[hull.len() - 1], p) <= eps {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && orient2d(hull[hull.len() - 2], hull[hull.len() - 1], p) <= eps {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Convex hull of a planar point set, as extreme points in counter-clockwise
/// order starting from the lexicographically smallest one.
pub fn convex_hull_2d(points: &[Point2]) -> Result<ConvexPolygon, GeometryError> {
    if let Some(index) = points.iter().position(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite { index });
    }
    let hull = monotone_chain(points);
    if hull.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "{} input points span fewer than three extreme points",
            points.len()
        )));
    }
    Ok(ConvexPolygon::from_ccw_unchecked(hull))
}

/// Like [`convex_hull_2d`] but returns a flagged degenerate polygon (point or
/// segment) instead of failing.
pub fn hull_lenient(points: &[Point2]) -> ConvexPolygon {
    let hull = monotone_chain(points);
    if hull.len() >= 3 {
        return ConvexPolygon::from_ccw_unchecked(hull);
    }
    // collinear or tiny input: keep the two extreme points along the spread
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.lex_cmp(b));
    let scale = coordinate_scale(&pts);
    let mut out = Vec::new();
    if let (Some(&a), Some(&b)) = (pts.first(), pts.last()) {
        out.push(a);
        if a.dist(b) > EPS_GEOM * scale {
            out.push(b);
        }
    }
    ConvexPolygon {
        vertices: out,
        degenerate: true,
    }
}

/// Shoelace area of a convex polygon; zero when degenerate.
pub fn polygon_area(poly: &ConvexPolygon) -> f64 {
    poly.area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn interior_point_is_dropped() {
        let hull = convex_hull_2d(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0), p(0.25, 0.25)]).unwrap();
        assert_eq!(hull.vertices(), &[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]);
        assert!((hull.area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rotated_square() {
        let hull = convex_hull_2d(&[p(1.0, 0.0), p(-1.0, 0.0), p(0.0, 1.0), p(0.0, -1.0)]).unwrap();
        assert_eq!(hull.len(), 4);
        assert!((polygon_area(&hull) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_input_is_rejected() {
        let err = convex_hull_2d(&[p(0.0, 0.0), p(1.0, 1.0), p(2.0, 2.0), p(3.0, 3.0)]);
        assert!(matches!(err, Err(GeometryError::DegenerateInput(_))));
        assert!(convex_hull_2d(&[p(0.0, 0.0), p(1.0, 0.0)]).is_err());
        assert!(matches!(
            convex_hull_2d(&[p(0.0, 0.0), p(1.0, 0.0), p(f64::NAN, 1.0)]),
            Err(GeometryError::NonFinite { index: 2 })
        ));
    }

    #[test]
    fn collinear_boundary_points_are_not_extreme() {
        let hull = convex_hull_2d(&[p(0.0, 0.0), p(0.5, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)]).unwrap();
        assert_eq!(hull.len(), 4);
    }

    #[test]
    fn near_duplicate_points_keep_true_corners() {
        // two copies of one corner, 1e-16 apart, straddle another corner in
        // lexicographic order
        let pts = [
            p(-1.7411714861237175, -0.5411714861237176),
            p(-1.6418690664909126, -0.7499999999999999),
            p(-1.3499999999999992, -0.7499999999999998),
            p(-1.3499999999999999, -0.7500000000000003),
            p(-1.3499999999999999, -0.45),
            p(-1.6499999999999997, -0.4499999999999999),
        ];
        let hull = convex_hull_2d(&pts).unwrap();
        assert_eq!(hull.len(), 5);
        assert!(hull.vertices().contains(&p(-1.3499999999999999, -0.45)));
    }

    #[test]
    fn lenient_hull_flags_degenerate() {
        let single = hull_lenient(&[p(0.3, 0.2), p(0.3, 0.2)]);
        assert!(single.is_degenerate());
        assert_eq!(single.len(), 1);
        assert_eq!(single.area(), 0.0);
        let seg = hull_lenient(&[p(0.0, 0.0), p(1.0, 1.0), p(0.5, 0.5)]);
        assert!(seg.is_degenerate());
        assert_eq!(seg.len(), 2);
        assert_eq!(polygon_area(&seg), 0.0);
    }

    #[test]
    fn areas() {
        let unit = ConvexPolygon::rectangle(p(0.0, 0.0), p(1.0, 1.0));
        assert_eq!(unit.area(), 1.0);
        let t = 0.2;
        let diamond = convex_hull_2d(&[p(t, 0.0), p(0.0, t), p(-t, 0.0), p(0.0, -t)]).unwrap();
        assert!((diamond.area() - 0.08).abs() < 1e-16);
        assert_eq!(hull_lenient(&[p(1.0, 2.0)]).area(), 0.0);
    }

    #[test]
    fn clip_square_by_diagonal() {
        let unit = ConvexPolygon::rectangle(p(0.0, 0.0), p(1.0, 1.0));
        let half = unit.clip(p(1.0, 1.0), 1.0);
        assert!((half.area() - 0.5).abs() < 1e-15);
        let none = unit.clip(p(1.0, 0.0), -1.0);
        assert!(none.is_empty());
        let all = unit.clip(p(1.0, 0.0), 5.0);
        assert_eq!(all.area(), 1.0);
    }

    /// Brute-force extreme point test: a point is extreme iff it is not in
    /// any triangle formed by three other points (and not on a segment
    /// between two others).
    fn brute_force_extreme(points: &[Point2]) -> Vec<bool> {
        let n = points.len();
        let in_tri = |q: Point2, a: Point2, b: Point2, c: Point2| {
            let o = orient2d(a, b, c);
            if o.abs() < 1e-14 {
                return false;
            }
            let s = o.signum();
            s * orient2d(a, b, q) >= 0.0 && s * orient2d(b, c, q) >= 0.0 && s * orient2d(c, a, q) >= 0.0
        };
        (0..n)
            .map(|i| {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            if a == i || b == i || c == i || a == b || b == c || a == c {
                                continue;
                            }
                            if in_tri(points[i], points[a], points[b], points[c]) {
                                return false;
                            }
                        }
                    }
                }
                true
            })
            .collect()
    }

    #[test]
    fn random_disk_points_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point2> = (0..100)
            .map(|_| loop {
                let q = p(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if q.norm() < 1.0 {
                    break q;
                }
            })
            .collect();
        let hull = convex_hull_2d(&pts).unwrap();
        let extreme = brute_force_extreme(&pts);
        let expected: Vec<Point2> = pts.iter().zip(&extreme).filter(|(_, &e)| e).map(|(&q, _)| q).collect();
        assert_eq!(hull.len(), expected.len());
        for q in &expected {
            assert!(hull.vertices().contains(q));
        }
        for q in &pts {
            assert!(hull.contains(*q, 1e-12));
        }
    }

    proptest! {
        #[test]
        fn hull_is_idempotent(coords in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..60)) {
            let pts: Vec<Point2> = coords.into_iter().map(|(x, y)| p(x, y)).collect();
            if let Ok(h1) = convex_hull_2d(&pts) {
                let h2 = convex_hull_2d(h1.vertices()).unwrap();
                prop_assert_eq!(h1.vertices(), h2.vertices());
                for q in &pts {
                    prop_assert!(h1.contains(*q, 1e-9));
                }
            }
        }
    }
}
