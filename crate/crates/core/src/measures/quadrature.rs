//! Fixed triangle rules, adaptive triangle/polygon integration and adaptive
//! Gauss–Kronrod quadrature on intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::geometry::{orient2d, ConvexPolygon, Point2};

/// Tolerances and rule selection for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Polynomial degree integrated exactly by the base triangle rule:
    /// 1, 2 or 5.
    pub triangle_rule_order: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-15,
            max_subdivisions: 10_000,
            triangle_rule_order: 5,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), MeasureError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(MeasureError::InvalidParameter(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if !matches!(self.triangle_rule_order, 1 | 2 | 5) {
            return Err(MeasureError::InvalidParameter(format!(
                "unsupported triangle rule order {}; use 1, 2 or 5",
                self.triangle_rule_order
            )));
        }
        Ok(())
    }

    fn rule(&self) -> &'static [([f64; 3], f64)] {
        match self.triangle_rule_order {
            1 => &CENTROID,
            2 => &EDGE_INTERIOR,
            _ => &DEGREE5,
        }
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl Integral {
    pub const ZERO: Integral = Integral {
        value: 0.0,
        error: 0.0,
        converged: true,
    };

    /// The value, or `ToleranceNotMet` carrying the best estimate.
    pub fn into_result(self) -> Result<f64, MeasureError> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(MeasureError::ToleranceNotMet {
                estimate: self.value,
                error: self.error,
            })
        }
    }
}

const CENTROID: [([f64; 3], f64); 1] = [([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];

const EDGE_INTERIOR: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

// Seven-point degree-5 rule; the values are (9 ∓ 2√15)/21, (6 ± √15)/21 and
// (155 ± √15)/1200.
const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const W1: f64 = 0.132_394_152_788_506_2;
const A2: f64 = 0.797_426_985_353_087_3;
const B2: f64 = 0.101_286_507_323_456_34;
const W2: f64 = 0.125_939_180_544_827_15;
const DEGREE5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

fn apply_rule<F: Fn(Point2) -> f64>(f: &F, rule: &[([f64; 3], f64)], [a, b, c]: [Point2; 3]) -> f64 {
    let area = 0.5 * orient2d(a, b, c).abs();
    let sum: f64 = rule.iter().map(|&(l, w)| w * f(a * l[0] + b * l[1] + c * l[2])).sum();
    area * sum
}

/// Applies the configured fixed rule once, without adaptivity.
pub fn triangle_rule<F: Fn(Point2) -> f64>(f: &F, tri: [Point2; 3], cfg: &QuadratureConfig) -> f64 {
    apply_rule(f, cfg.rule(), tri)
}

fn bisect_longest([a, b, c]: [Point2; 3]) -> [[Point2; 3]; 2] {
    let (lab, lbc, lca) = (a.dist(b), b.dist(c), c.dist(a));
    if lab >= lbc && lab >= lca {
        let m = a.lerp(b, 0.5);
        [[a, m, c], [m, b, c]]
    } else if lbc >= lca {
        let m = b.lerp(c, 0.5);
        [[a, b, m], [a, m, c]]
    } else {
        let m = c.lerp(a, 0.5);
        [[a, b, m], [m, b, c]]
    }
}

struct Element {
    /// The two halves, each with its rule value and its own halves.
    kids: [Half; 2],
    value: f64,
    error: f64,
    seq: usize,
}

#[derive(Clone, Copy)]
struct Half {
    value: f64,
    halves: [([Point2; 3], f64); 2],
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Element {}
impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Adaptive integration over a set of triangles with a global error budget.
///
/// Elements are refined by longest-edge bisection. The error estimate of an
/// element compares the rule on it with the rule on its four grandchildren
/// (two bisection levels): a single bisection can produce halves that are
/// affine images of the parent along a kink, which hides the error. The
/// worst element is split until the summed estimate meets
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_triangles<F: Fn(Point2) -> f64>(
    f: &F,
    triangles: impl IntoIterator<Item = [Point2; 3]>,
    cfg: &QuadratureConfig,
) -> Integral {
    let rule = cfg.rule();
    let half = |tri: [Point2; 3], value: f64| {
        let h = bisect_longest(tri);
        Half {
            value,
            halves: [(h[0], apply_rule(f, rule, h[0])), (h[1], apply_rule(f, rule, h[1]))],
        }
    };
    let mut seq = 0;
    let mut make = |coarse: f64, kids: [([Point2; 3], f64); 2]| {
        let kids = kids.map(|(tri, v)| half(tri, v));
        let value: f64 = kids.iter().flat_map(|k| k.halves).map(|(_, v)| v).sum();
        seq += 1;
        Element {
            kids,
            value,
            error: (value - coarse).abs(),
            seq,
        }
    };
    let mut heap = BinaryHeap::new();
    let (mut value, mut error) = (0.0, 0.0);
    for tri in triangles {
        let first = half(tri, apply_rule(f, rule, tri));
        let el = make(first.value, first.halves);
        value += el.value;
        error += el.error;
        heap.push(el);
    }
    let mut subdivisions = 0;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= tol || subdivisions >= cfg.max_subdivisions {
            // re-sum to shed drift from the running totals
            let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), el| (v + el.value, e + el.error));
            let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
            return Integral {
                value,
                error,
                converged: error <= tol,
            };
        }
        let worst = heap.pop().expect("non-empty when error is positive");
        value -= worst.value;
        error -= worst.error;
        for kid in worst.kids {
            let el = make(kid.value, kid.halves);
            value += el.value;
            error += el.error;
            heap.push(el);
        }
        subdivisions += 1;
    }
}

/// Adaptive integral over a convex polygon; zero on degenerate polygons.
pub fn integrate_polygon<F: Fn(Point2) -> f64>(f: &F, poly: &ConvexPolygon, cfg: &QuadratureConfig) -> Integral {
    if poly.is_degenerate() {
        return Integral::ZERO;
    }
    integrate_triangles(f, poly.fan_triangles(), cfg)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]`.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadratureConfig) -> Integral {
    let mut parts = vec![{
        let (v, e) = gk15(f, a, b);
        (a, b, v, e)
    }];
    loop {
        let (value, error) = parts.iter().fold((0.0, 0.0), |(v, e), p| (v + p.2, e + p.3));
        let tol = cfg.abs_tol.max(cfg.rel_tol * value.abs());
        if error <= tol || parts.len() > cfg.max_subdivisions {
            return Integral {
                value,
                error,
                converged: error <= tol,
            };
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].3.total_cmp(&parts[j].3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        for (l, r) in [(lo, mid), (mid, hi)] {
            let (v, e) = gk15(f, l, r);
            parts.push((l, r, v, e));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_triangle() -> [Point2; 3] {
        [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]
    }

    /// ∫ over the unit right triangle of x^i y^j = i! j! / (i + j + 2)!.
    fn monomial_exact(i: u32, j: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(i) * fact(j) / fact(i + j + 2)
    }

    #[test]
    fn rule_constants_match_closed_forms() {
        let s = 15f64.sqrt();
        assert_relative_eq!(A1, (9.0 - 2.0 * s) / 21.0, epsilon = 1e-16);
        assert_relative_eq!(B1, (6.0 + s) / 21.0, epsilon = 1e-16);
        assert_relative_eq!(W1, (155.0 + s) / 1200.0, epsilon = 1e-16);
        assert_relative_eq!(A2, (9.0 + 2.0 * s) / 21.0, epsilon = 1e-16);
        assert_relative_eq!(B2, (6.0 - s) / 21.0, epsilon = 1e-16);
        assert_relative_eq!(W2, (155.0 - s) / 1200.0, epsilon = 1e-16);
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        for (order, rule) in [(1u32, &CENTROID[..]), (2, &EDGE_INTERIOR[..]), (5, &DEGREE5[..])] {
            for i in 0..=order {
                for j in 0..=(order - i) {
                    let f = |p: Point2| p.x.powi(i as i32) * p.y.powi(j as i32);
                    let got = apply_rule(&f, rule, unit_triangle());
                    assert_relative_eq!(got, monomial_exact(i, j), epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn adaptive_handles_kinks() {
        // a kink line converges only algebraically, so ask for less than
        // the smooth-integrand default
        let cfg = QuadratureConfig {
            rel_tol: 1e-8,
            max_subdivisions: 200_000,
            ..QuadratureConfig::default()
        };
        // |x - 0.3| over the unit triangle
        let f = |p: Point2| (p.x - 0.3).abs();
        let r = integrate_triangles(&f, [unit_triangle()], &cfg);
        assert!(r.converged);
        // ∫_0^1 |x − 0.3| (1 − x) dx, split at the kink
        let exact = 0.0405 + 0.343 / 6.0;
        assert_relative_eq!(r.value, exact, max_relative = 1e-7);
        assert!((r.value - exact).abs() <= 10.0 * r.error.max(1e-15));
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let cfg = QuadratureConfig {
            max_subdivisions: 3,
            rel_tol: 1e-14,
            ..QuadratureConfig::default()
        };
        let f = |p: Point2| (p.x - 0.3).abs().sqrt();
        let r = integrate_triangles(&f, [unit_triangle()], &cfg);
        assert!(!r.converged);
        assert!(matches!(r.into_result(), Err(MeasureError::ToleranceNotMet { .. })));
    }

    #[test]
    fn gauss_legendre_weights() {
        for n in [1, 2, 5, 16, 24] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            // exact for degree 2n − 1
            let d = (2 * n - 2) as i32;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d)).sum();
            assert_relative_eq!(got, 2.0 / (d + 1) as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn gauss_kronrod_on_smooth_and_peaked() {
        let cfg = QuadratureConfig::default();
        let r = integrate_interval(&|x: f64| x.exp(), 0.0, 1.0, &cfg);
        assert_relative_eq!(r.value, std::f64::consts::E - 1.0, epsilon = 1e-14);
        let r = integrate_interval(&|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, &cfg);
        assert_relative_eq!(r.value, 2.0 * (1.0f64 / 1e-2).atan() / 1e-2, max_relative = 1e-10);
    }
}
