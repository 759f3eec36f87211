//! Subdifferential cells computed directly from heights.
//!
//! For interior vertex `i` with height `z` and the other heights fixed, the
//! slopes of planes through `(A_i, z)` lying below every other lifted vertex
//! form `{p : p·(A_j − A_i) ≤ z_j − z  ∀ j ≠ i}`. When `(A_i, z)` is a vertex
//! of the lower hull this is its normal cell; otherwise it is empty or
//! degenerate. Edges remember which constraint cut them, which gives the
//! derivative of the cell mass with respect to the depth `−z` in closed form.

use std::sync::Mutex;

use crate::geometry::{orient2d, ConvexPolygon, Point2};
use crate::measures::{MeasureError, QuadratureConfig, SlopeDensity};
use crate::mesh::Mesh;

const BOX: u32 = u32::MAX;

/// A convex polygon whose edge `k` (from vertex `k` to `k + 1`) lies on the
/// constraint line `labels[k]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct LabeledCell {
    pts: Vec<Point2>,
    labels: Vec<u32>,
    scratch_pts: Vec<Point2>,
    scratch_labels: Vec<u32>,
}

impl LabeledCell {
    #[cfg(test)]
    fn square(half: f64) -> Self {
        let mut cell = Self::default();
        cell.reset(half);
        cell
    }

    fn reset(&mut self, half: f64) {
        self.pts.clear();
        self.pts.extend([
            Point2::new(-half, -half),
            Point2::new(half, -half),
            Point2::new(half, half),
            Point2::new(-half, half),
        ]);
        self.labels.clear();
        self.labels.extend([BOX; 4]);
    }

    fn max_dot(&self, d: Point2) -> f64 {
        self.pts.iter().map(|p| p.dot(d)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Vertex centroid and the largest distance from it to a vertex.
    fn enclosing_disk(&self) -> (Point2, f64) {
        let n = self.pts.len() as f64;
        let sum = self.pts.iter().fold(Point2::ORIGIN, |acc, &p| acc + p);
        let center = sum * (1.0 / n);
        let r2 = self.pts.iter().map(|p| (*p - center).norm_sq()).fold(0.0, f64::max);
        (center, r2.sqrt() * (1.0 + 1e-12))
    }

    fn max_norm_sq(&self) -> f64 {
        self.pts.iter().map(|p| p.norm_sq()).fold(0.0, f64::max)
    }

    /// Keeps `d·p ≤ c`; returns false when nothing of positive area is left.
    fn clip(&mut self, d: Point2, c: f64, label: u32) -> bool {
        let n = self.pts.len();
        let (pts, labels) = (&mut self.scratch_pts, &mut self.scratch_labels);
        pts.clear();
        labels.clear();
        for k in 0..n {
            let (a, b) = (self.pts[k], self.pts[(k + 1) % n]);
            let l = self.labels[k];
            let (fa, fb) = (d.dot(a) - c, d.dot(b) - c);
            if fa <= 0.0 {
                if fb > 0.0 {
                    if fa < 0.0 {
                        pts.push(a);
                        labels.push(l);
                        pts.push(a.lerp(b, fa / (fa - fb)));
                    } else {
                        pts.push(a);
                    }
                    labels.push(label);
                } else {
                    pts.push(a);
                    labels.push(l);
                }
            } else if fb < 0.0 {
                pts.push(a.lerp(b, fa / (fa - fb)));
                labels.push(l);
            }
        }
        std::mem::swap(&mut self.pts, &mut self.scratch_pts);
        std::mem::swap(&mut self.labels, &mut self.scratch_labels);
        self.pts.len() >= 3 && self.area2() > 0.0
    }

    fn area2(&self) -> f64 {
        let n = self.pts.len();
        (0..n).map(|k| self.pts[k].cross(self.pts[(k + 1) % n])).sum()
    }

    /// Same rounding as [`ConvexPolygon::area`].
    fn fan_area(&self) -> f64 {
        let o = self.pts[0];
        let twice: f64 = self.pts.windows(2).skip(1).map(|w| orient2d(o, w[0], w[1])).sum();
        0.5 * twice.max(0.0)
    }

    pub(crate) fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon::from_ccw_unchecked(self.pts.clone())
    }
}

/// Another vertex as seen from an interior vertex.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    j: u32,
    d: Point2,
    dist: f64,
}

/// Per-solve data for evaluating cell masses of interior vertices.
pub(crate) struct CellSystem<'a> {
    r: &'a SlopeDensity,
    quad: &'a QuadratureConfig,
    /// other vertices of each interior vertex, nearest first
    candidates: Vec<Vec<Candidate>>,
    /// distance from each interior vertex to the mesh boundary
    inner: Vec<f64>,
    positions: Vec<Point2>,
    /// constraint labels of each vertex's most recent non-empty cell, tried
    /// first so that the remaining candidates are rejected cheaply
    hints: Vec<Mutex<Vec<u32>>>,
}

/// Mass of a cell and its derivative with respect to the depth `−z_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MassEval {
    pub mass: f64,
    pub slope: f64,
}

impl MassEval {
    const EMPTY: MassEval = MassEval { mass: 0.0, slope: 0.0 };
}

impl<'a> CellSystem<'a> {
    pub(crate) fn new(mesh: &'a Mesh, r: &'a SlopeDensity, quad: &'a QuadratureConfig) -> Self {
        let n = mesh.n_vertices();
        let candidates = (0..mesh.n_interior())
            .map(|i| {
                let xi = mesh.vertex(i);
                let mut others: Vec<Candidate> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d = mesh.vertex(j) - xi;
                        Candidate {
                            j: j as u32,
                            d,
                            dist: d.norm(),
                        }
                    })
                    .collect();
                others.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.j.cmp(&b.j)));
                others
            })
            .collect();
        let inner = (0..mesh.n_interior())
            .map(|i| mesh.polygon().inner_distance(mesh.vertex(i)))
            .collect();
        Self {
            r,
            quad,
            candidates,
            inner,
            positions: mesh.vertices().to_vec(),
            hints: (0..mesh.n_interior()).map(|_| Mutex::default()).collect(),
        }
    }

    /// The slope cell of vertex `i` at height `zi`, others at `heights`.
    #[cfg(test)]
    pub(crate) fn cell(&self, i: usize, zi: f64, heights: &[f64]) -> Option<LabeledCell> {
        let mut cell = LabeledCell::default();
        self.cell_into(i, zi, heights, &mut cell).then_some(cell)
    }

    fn cell_into(&self, i: usize, zi: f64, heights: &[f64], cell: &mut LabeledCell) -> bool {
        // the supporting plane stays below the boundary vertices, whose hull
        // contains the disk of radius inner[i] about A_i
        let zmax = heights
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &z)| z)
            .fold(f64::NEG_INFINITY, f64::max);
        let reach = (zmax - zi) / self.inner[i];
        if reach.is_nan() || reach <= 0.0 {
            return false;
        }
        cell.reset(reach * 1.01);
        let xi = self.positions[i];
        let mut hint = self.hints[i].lock().expect("hint lock");
        for &j in hint.iter() {
            let d = self.positions[j as usize] - xi;
            let c = heights[j as usize] - zi;
            if cell.max_dot(d) > c && !cell.clip(d, c, j) {
                return false;
            }
        }
        let (mut center, mut spread) = cell.enclosing_disk();
        let mut scale = cell.max_norm_sq().sqrt();
        for cand in &self.candidates[i] {
            let c = heights[cand.j as usize] - zi;
            if center.dot(cand.d) + spread * cand.dist <= c {
                continue;
            }
            // violations at rounding level would only add slivers
            let slack = 8.0 * f64::EPSILON * (scale * cand.dist + heights[cand.j as usize].abs() + zi.abs());
            if cell.max_dot(cand.d) <= c + slack {
                continue;
            }
            if !cell.clip(cand.d, c, cand.j) {
                return false;
            }
            (center, spread) = cell.enclosing_disk();
            scale = cell.max_norm_sq().sqrt();
        }
        hint.clear();
        hint.extend(cell.labels.iter().copied().filter(|&l| l != BOX));
        true
    }

    /// R-mass of the cell of `i` at height `zi` and its depth derivative.
    pub(crate) fn eval(&self, i: usize, zi: f64, heights: &[f64]) -> Result<MassEval, MeasureError> {
        thread_local! {
            static CELL: std::cell::RefCell<LabeledCell> = std::cell::RefCell::default();
        }
        CELL.with_borrow_mut(|cell| {
            if !self.cell_into(i, zi, heights, cell) {
                return Ok(MassEval::EMPTY);
            }
            let mass = match self.r.is_constant() {
                Some(v) => v * cell.fan_area(),
                None => crate::measures::integrate_r_over_polygon(self.r, &cell.polygon(), self.quad)?,
            };
            let n = cell.pts.len();
            let xi = self.positions[i];
            let dist_of = |j: u32| self.positions[j as usize].dist(xi);
            let slope = (0..n)
                .filter(|&k| cell.labels[k] != BOX)
                .map(|k| {
                    let (a, b) = (cell.pts[k], cell.pts[(k + 1) % n]);
                    self.r.integrate_segment(a, b) / dist_of(cell.labels[k])
                })
                .sum();
            Ok(MassEval { mass, slope })
        })
    }
}
