use serde::{Deserialize, Serialize};

/// Regularity and decay constants under which convergence of the discrete
/// solutions is guaranteed.
///
/// `tau`/`eta` describe the boundary (parabolic support of order `tau` with
/// constant `eta`), `k`/`c0`/`r0` the slope density tail
/// `R(p) ≥ c0 |p|^(−2k)` for `|p| ≥ r0`, and `lambda`/`c1p` the source decay
/// `μ(e) ≤ c1p · dist(e, ∂Ω)^lambda · |e|` near the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionProfile {
    pub tau: f64,
    pub eta: f64,
    pub k: f64,
    pub c0: f64,
    pub r0: f64,
    pub lambda: f64,
    pub c1p: f64,
    #[serde(default = "two")]
    pub d: u32,
}

fn two() -> u32 {
    2
}

impl Default for AssumptionProfile {
    fn default() -> Self {
        Self {
            tau: 0.0,
            eta: 1.0,
            k: 0.0,
            c0: 1.0,
            r0: 1.0,
            lambda: 0.0,
            c1p: 1.0,
            d: 2,
        }
    }
}

impl AssumptionProfile {
    /// `K = (d + τ + 1) / (τ + 2) + λ / 2`.
    pub fn exponent_bound(&self) -> f64 {
        (self.d as f64 + self.tau + 1.0) / (self.tau + 2.0) + 0.5 * self.lambda
    }

    /// `k ≤ K` when `k < 1` or `k ≥ d/2`, and `k < K` in between.
    pub fn exponent_condition(&self) -> bool {
        let big_k = self.exponent_bound();
        let half_d = 0.5 * self.d as f64;
        if self.k < 0.0 {
            false
        } else if self.k < 1.0 || self.k >= half_d {
            self.k <= big_k
        } else {
            self.k < big_k
        }
    }

    /// Sign and finiteness constraints on the constants.
    pub fn is_well_formed(&self) -> bool {
        let finite = [self.tau, self.eta, self.k, self.c0, self.r0, self.lambda, self.c1p]
            .iter()
            .all(|v| v.is_finite());
        finite
            && self.tau >= 0.0
            && self.eta > 0.0
            && self.k >= 0.0
            && self.c0 > 0.0
            && self.r0 > 0.0
            && self.lambda >= 0.0
            && self.c1p > 0.0
            && self.d == 2
    }
}
