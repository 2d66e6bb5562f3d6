//! Gaussian rotation alternatives and the detection boundary of the `ξ^±` test.

use num_rational::Ratio;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, XiError};
use crate::ranks::{NeighborCount, Sample};

/// Standard bivariate normal with correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRotation {
    rho: f64,
}

impl GaussianRotation {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho.abs() < 1.0 {
            Ok(GaussianRotation { rho })
        } else {
            Err(XiError::RhoRange(rho))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `X ~ N(0,1)`, `Y = ρX + √(1-ρ²) Z` with independent `Z ~ N(0,1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Sample> {
        let c = (1.0 - self.rho * self.rho).sqrt();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(rng);
            let z: f64 = StandardNormal.sample(rng);
            x.push(a);
            y.push(self.rho * a + c * z);
        }
        Sample::new(x, y)
    }
}

pub fn sample_rotation<R: Rng + ?Sized>(rng: &mut R, n: usize, rho: f64) -> Result<Sample> {
    GaussianRotation::new(rho)?.sample(rng, n)
}

/// A point on the detection boundary, either at concrete `(n, M)` or as an exponent pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundaryPoint {
    Rate {
        n: usize,
        #[serde(rename = "M")]
        m: usize,
        zeta: f64,
    },
    Exponent { gamma: f64, beta: f64 },
}

/// `ln ζ_{n,M}` where
/// `ζ = [(n^{1/2} M^{-3/2}) ∨ M^{-1/2}] ∧ [(nM)^{-1/4} ∨ (n^{-1/2} M^{1/4})]`.
pub fn log_zeta(n: usize, m: NeighborCount) -> Result<f64> {
    let m = m.check(n)? as f64;
    let (ln_n, ln_m) = ((n as f64).ln(), m.ln());
    let first = (0.5 * ln_n - 1.5 * ln_m).max(-0.5 * ln_m);
    let second = (-0.25 * (ln_n + ln_m)).max(-0.5 * ln_n + 0.25 * ln_m);
    Ok(first.min(second))
}

/// The sufficient detection boundary `ζ_{n,M}`, evaluated in log space.
pub fn zeta(n: usize, m: NeighborCount) -> Result<f64> {
    Ok(log_zeta(n, m)?.exp())
}

/// Boundary exponent `β(γ)` with `ζ = n^{-β}` when `M = n^γ`:
/// `[(3γ/2 - 1/2) ∧ γ/2] ∨ [(1/4 + γ/4) ∧ (1/2 - γ/4)]`.
pub fn beta_of_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(XiError::GammaRange(gamma));
    }
    let left = (1.5 * gamma - 0.5).min(0.5 * gamma);
    let right = (0.25 + 0.25 * gamma).min(0.5 - 0.25 * gamma);
    Ok(left.max(right))
}

/// [`beta_of_gamma`] in exact rational arithmetic.
pub fn beta_of_gamma_exact(gamma: Ratio<i64>) -> Result<Ratio<i64>> {
    let (zero, one) = (Ratio::from_integer(0), Ratio::from_integer(1));
    if gamma <= zero || gamma >= one {
        return Err(XiError::GammaRange(*gamma.numer() as f64 / *gamma.denom() as f64));
    }
    let r = |a, b| Ratio::new(a, b);
    let left = (r(3, 2) * gamma - r(1, 2)).min(r(1, 2) * gamma);
    let right = (r(1, 4) + r(1, 4) * gamma).min(r(1, 2) - r(1, 4) * gamma);
    Ok(left.max(right))
}

/// Side conditions of the local power theory, `M / ln n` large and
/// `M (ln n)^{3/2} / n` small. Advisory only: both are asymptotic statements;
/// here "large" means at least 1 and "small" means below 1.
pub fn regime_ok(n: usize, m: usize) -> bool {
    if n < 3 || m == 0 || m >= n {
        return false;
    }
    let ln_n = (n as f64).ln();
    m as f64 / ln_n >= 1.0 && m as f64 * ln_n.powf(1.5) / (n as f64) < 1.0
}
