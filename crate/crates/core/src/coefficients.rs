//! Rank correlation coefficients.
//!
//! The nearest-neighbor coefficients are evaluated from exact integer sums and
//! a single rational-to-float conversion, so equal rank configurations always
//! produce bit-identical values regardless of platform or evaluation path.

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Result, XiError};
use crate::kernels;
use crate::ranks::{compute_ranks, reflect_ranks, x_order, NeighborCount, RankVector, Sample, XOrder};

/// Which coefficient produced a [`CoefficientValue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Chatterjee's original 1-NN coefficient.
    XiClassic,
    /// The M right nearest neighbor coefficient.
    XiNm,
    /// `XiNm` computed on `(x, -y)`.
    XiNmReflected,
    /// `max(XiNm, XiNmReflected)`.
    XiPm,
    /// Raw min-rank sum over M symmetric neighbors.
    SymmetricNn,
    Pearson,
    HoeffdingD,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::XiClassic => "xi-classic",
            Method::XiNm => "xi-nm",
            Method::XiNmReflected => "xi-nm-reflected",
            Method::XiPm => "xi-pm",
            Method::SymmetricNn => "symmetric-nn",
            Method::Pearson => "pearson",
            Method::HoeffdingD => "hoeffding-d",
        }
    }

    pub fn uses_m(self) -> bool {
        matches!(
            self,
            Method::XiNm | Method::XiNmReflected | Method::XiPm | Method::SymmetricNn
        )
    }
}

/// Evaluates `method` on `s`. `m` is required exactly when [`Method::uses_m`] holds.
pub fn coefficient(method: Method, s: &Sample, m: Option<NeighborCount>) -> Result<CoefficientValue> {
    let need = || m.ok_or_else(|| XiError::Config(format!("method {method} needs M")));
    match method {
        Method::XiClassic => chatterjee_xi(s),
        Method::XiNm => xi_nm(s, need()?),
        Method::XiNmReflected => xi_nm_reflected(s, need()?),
        Method::XiPm => xi_pm(s, need()?),
        Method::SymmetricNn => symmetric_nn_sum(s, need()?),
        Method::Pearson => pearson_r(s),
        Method::HoeffdingD => hoeffding_d(s),
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = XiError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Method::XiClassic,
            Method::XiNm,
            Method::XiNmReflected,
            Method::XiPm,
            Method::SymmetricNn,
            Method::Pearson,
            Method::HoeffdingD,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| XiError::Config(format!("unknown coefficient method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientValue {
    pub method: Method,
    pub value: f64,
    pub n: usize,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
}

impl CoefficientValue {
    fn new(method: Method, value: f64, n: usize, m: Option<usize>) -> Self {
        CoefficientValue { method, value, n, m }
    }
}

/// Converts `num / den` to the nearest `f64`.
///
/// When both parts fit in 53 bits the single IEEE division is correctly
/// rounded, so any two integer representations of the same rational give the
/// same float.
pub(crate) fn ratio_to_f64(num: i128, den: i128) -> f64 {
    const EXACT: i128 = 1 << 53;
    let (mut num, mut den) = (num, den);
    if num.abs() >= EXACT || den.abs() >= EXACT {
        let g = num.gcd(&den);
        if g > 1 {
            num /= g;
            den /= g;
        }
    }
    num as f64 / den as f64
}

/// `4 (n+1) [nM + M(M+1)/4] = (n+1) M (4n + M + 1)`; the min-sum normalizer times 4.
fn xi_nm_denominator(n: usize, m: usize) -> i128 {
    let (n, m) = (n as i128, m as i128);
    (n + 1) * m * (4 * n + m + 1)
}

/// `-2 + 6 S / ((n+1)[nM + M(M+1)/4])` from the integer min-rank sum `S`.
pub(crate) fn xi_from_min_sum(sum: u64, n: usize, m: usize) -> f64 {
    let den = xi_nm_denominator(n, m);
    ratio_to_f64(24 * sum as i128 - 2 * den, den)
}

fn check_len(r: &RankVector, ord: &XOrder) -> Result<usize> {
    if r.len() != ord.len() {
        return Err(XiError::LengthMismatch {
            x_len: ord.len(),
            y_len: r.len(),
        });
    }
    if r.len() < 2 {
        return Err(XiError::Size { n: r.len(), min: 2 });
    }
    Ok(r.len())
}

/// Y ranks and X order of a sample, computed once and shared by coefficients.
#[derive(Debug, Clone)]
pub struct RankedSample {
    pub y_ranks: RankVector,
    pub x_order: XOrder,
}

impl RankedSample {
    pub fn new(s: &Sample) -> Result<Self> {
        Ok(RankedSample {
            y_ranks: compute_ranks(s.y())?,
            x_order: x_order(s.x())?,
        })
    }

    pub fn len(&self) -> usize {
        self.y_ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_ranks.is_empty()
    }

    /// Y ranks listed in ascending X order.
    pub fn sorted_ranks(&self) -> Vec<u32> {
        self.x_order.gather(self.y_ranks.as_slice())
    }
}

/// Chatterjee's `ξ_n = 1 - 3 Σ|R_{j_1(i)} - R_i| / (n² - 1)`.
pub fn chatterjee_xi(s: &Sample) -> Result<CoefficientValue> {
    let ranked = RankedSample::new(s)?;
    let n = ranked.len();
    let sum = kernels::successive_abs_diff_sum(&ranked.sorted_ranks()) as i128;
    let den = (n * n - 1) as i128;
    Ok(CoefficientValue::new(
        Method::XiClassic,
        ratio_to_f64(den - 3 * sum, den),
        n,
        None,
    ))
}

/// The revised coefficient `ξ_{n,M}` using `M` right nearest neighbors.
///
/// Cost is `O(n log n)` for the two sorts plus `O(nM)` for the neighbor sum.
pub fn xi_nm(s: &Sample, m: NeighborCount) -> Result<CoefficientValue> {
    let ranked = RankedSample::new(s)?;
    xi_nm_from_ranks(&ranked.y_ranks, &ranked.x_order, m)
}

/// `ξ_{n,M}` from precomputed Y ranks and X order.
///
/// With the identity order this is the null replicate formula where the
/// `m`-th neighbor of `i` is `i + m`.
pub fn xi_nm_from_ranks(r: &RankVector, ord: &XOrder, m: NeighborCount) -> Result<CoefficientValue> {
    let n = check_len(r, ord)?;
    let m = m.check(n)?;
    let sum = kernels::right_min_sum(&ord.gather(r.as_slice()), m);
    Ok(CoefficientValue::new(
        Method::XiNm,
        xi_from_min_sum(sum, n, m),
        n,
        Some(m),
    ))
}

/// `ξ_{n,M}` on `(x, -y)`, obtained by reflecting the Y ranks.
pub fn xi_nm_reflected(s: &Sample, m: NeighborCount) -> Result<CoefficientValue> {
    let ranked = RankedSample::new(s)?;
    let reflected = reflect_ranks(&ranked.y_ranks);
    let mut v = xi_nm_from_ranks(&reflected, &ranked.x_order, m)?;
    v.method = Method::XiNmReflected;
    Ok(v)
}

/// `ξ^± = max(ξ_{n,M}(x, y), ξ_{n,M}(x, -y))`.
pub fn xi_pm(s: &Sample, m: NeighborCount) -> Result<CoefficientValue> {
    let ranked = RankedSample::new(s)?;
    xi_pm_from_ranks(&ranked.y_ranks, &ranked.x_order, m)
}

pub fn xi_pm_from_ranks(r: &RankVector, ord: &XOrder, m: NeighborCount) -> Result<CoefficientValue> {
    let n = check_len(r, ord)?;
    let m = m.check(n)?;
    Ok(CoefficientValue::new(
        Method::XiPm,
        xi_pm_sorted(&ord.gather(r.as_slice()), m),
        n,
        Some(m),
    ))
}

/// `ξ^±` for ranks already laid out in X order.
pub(crate) fn xi_pm_sorted(s: &[u32], m: usize) -> f64 {
    let n = s.len();
    let (direct, reflected) = kernels::right_min_sums(s, m);
    xi_from_min_sum(direct, n, m).max(xi_from_min_sum(reflected, n, m))
}

/// Raw `Σ_i Σ_{j ∈ N_M(i)} min(R_i, R_j)` over the `M` nearest positions in
/// X order, right side first on equal distance. Not centered.
pub fn symmetric_nn_sum(s: &Sample, m: NeighborCount) -> Result<CoefficientValue> {
    let ranked = RankedSample::new(s)?;
    symmetric_nn_from_ranks(&ranked.y_ranks, &ranked.x_order, m)
}

pub fn symmetric_nn_from_ranks(r: &RankVector, ord: &XOrder, m: NeighborCount) -> Result<CoefficientValue> {
    let n = check_len(r, ord)?;
    let m = m.check(n)?;
    let sum = kernels::symmetric_min_sum(&ord.gather(r.as_slice()), m);
    Ok(CoefficientValue::new(Method::SymmetricNn, sum as f64, n, Some(m)))
}

/// Sample Pearson correlation.
pub fn pearson_r(s: &Sample) -> Result<CoefficientValue> {
    let n = s.len();
    if n < 3 {
        return Err(XiError::Size { n, min: 3 });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(s.x()), mean(s.y()));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in s.x().iter().zip(s.y()) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(XiError::Degenerate(
            "zero variance in at least one coordinate".into(),
        ));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CoefficientValue::new(Method::Pearson, r, n, None))
}

/// Hoeffding's D (1948 form, unscaled; the maximum is 1/30).
pub fn hoeffding_d(s: &Sample) -> Result<CoefficientValue> {
    let n = s.len();
    if n < 5 {
        return Err(XiError::Size { n, min: 5 });
    }
    let ranked = RankedSample::new(s)?;
    Ok(CoefficientValue::new(
        Method::HoeffdingD,
        hoeffding_sorted(&ranked.sorted_ranks()),
        n,
        None,
    ))
}

pub fn hoeffding_d_from_ranks(r: &RankVector, ord: &XOrder) -> Result<CoefficientValue> {
    let n = check_len(r, ord)?;
    if n < 5 {
        return Err(XiError::Size { n, min: 5 });
    }
    Ok(CoefficientValue::new(
        Method::HoeffdingD,
        hoeffding_sorted(&ord.gather(r.as_slice())),
        n,
        None,
    ))
}

pub(crate) fn hoeffding_sorted(s: &[u32]) -> f64 {
    let (num, den) = kernels::hoeffding_terms(s);
    ratio_to_f64(num, den)
}

/// Exact rational `(numerator, denominator)` of a value that depends only on `(n, M)`.
fn extremal_ratio(n: usize, m: usize) -> (i128, i128, i128, i128) {
    let (n, m) = (n as i128, m as i128);
    let base = 4 * n + m + 1;
    // 1 - (3(M+1)/4) / (n + (M+1)/4)
    let upper = (4 * n - 2 * m - 2, base);
    // -1/2 + 3[n - (n+1)(M+1)/4] / (2(n+1)[n + (M+1)/4])
    let lower_den = 2 * (n + 1) * base;
    let lower_num = -(n + 1) * base + 3 * (4 * n - (n + 1) * (m + 1));
    (upper.0, upper.1, lower_num, lower_den)
}

/// `(upper, lower)` finite-sample bounds on `ξ_{n,M}`. The upper bound is
/// attained when `y` is a strictly increasing function of `x`.
pub fn extremal_bounds(n: usize, m: NeighborCount) -> Result<(f64, f64)> {
    let m = m.check(n)?;
    let (un, ud, ln, ld) = extremal_ratio(n, m);
    Ok((ratio_to_f64(un, ud), ratio_to_f64(ln, ld)))
}

/// `ξ_{n,M}` when `y` is a strictly decreasing function of `x`:
/// `1 - 3(M+1)[(5n+1)/4 - (2M+1)/3] / ((n+1)[n + (M+1)/4])`.
pub fn decreasing_extremal_value(n: usize, m: NeighborCount) -> Result<f64> {
    let m = m.check(n)? as i128;
    let n = n as i128;
    let den = (n + 1) * (4 * n + m + 1);
    let num = den - (m + 1) * (15 * n - 8 * m - 1);
    Ok(ratio_to_f64(num, den))
}

/// Population dependence measure for the standard bivariate normal with correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationXi {
    pub rho: f64,
    pub xi: f64,
    /// Reported absolute error bound of the quadrature.
    pub quadrature_tolerance: f64,
}

const STD_NORMAL_DENSITY: f64 = 0.398_942_280_401_432_7;
/// Integration range; the standard normal density below -10 is < 1e-22.
const TAIL: f64 = 10.0;
const INNER_TOL: f64 = 1e-11;
const OUTER_TOL: f64 = 1e-9;

fn phi(x: f64) -> f64 {
    STD_NORMAL_DENSITY * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// ∫ f(x) dx over `[-TAIL, TAIL]`, split at `kink` where the integrand turns sharply.
fn integrate_split(f: impl Fn(f64) -> f64, kink: f64, tol: f64) -> (f64, f64) {
    use quadrature::double_exponential::integrate;
    if kink > -TAIL && kink < TAIL {
        let a = integrate(&f, -TAIL, kink, tol / 2.0);
        let b = integrate(&f, kink, TAIL, tol / 2.0);
        (a.integral + b.integral, a.error_estimate + b.error_estimate)
    } else {
        let a = integrate(&f, -TAIL, TAIL, tol);
        (a.integral, a.error_estimate)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(XiError::RhoRange(rho))
    }
}

/// `ξ(ρ) = ∫ Var(E[1(Y ≥ y) | X]) dF_Y(y) / ∫ Var(1(Y ≥ y)) dF_Y(y)` for the
/// Gaussian rotation model, by nested double-exponential quadrature. The
/// denominator equals 1/6.
pub fn gaussian_population_xi(rho: f64) -> Result<PopulationXi> {
    check_rho(rho)?;
    if rho == 0.0 {
        return Ok(PopulationXi {
            rho,
            xi: 0.0,
            quadrature_tolerance: 0.0,
        });
    }
    let sd = (1.0 - rho * rho).sqrt();
    let inner_err = std::cell::Cell::new(0.0f64);
    let outer = |y: f64| {
        // E_X[P(Y <= y | X)^2] - P(Y <= y)^2; the variance of the conditional
        // upper tail is the same quantity.
        let (second, err) = integrate_split(
            |x| {
                let c = normal_cdf((y - rho * x) / sd);
                phi(x) * c * c
            },
            y / rho,
            INNER_TOL,
        );
        inner_err.set(inner_err.get().max(err));
        let fy = normal_cdf(y);
        phi(y) * (second - fy * fy)
    };
    let (integral, err) = integrate_split(outer, 0.0, OUTER_TOL);
    Ok(PopulationXi {
        rho,
        xi: 6.0 * integral,
        quadrature_tolerance: 6.0 * (err + 2.0 * TAIL * inner_err.get()),
    })
}

/// `dξ/dρ` for the Gaussian rotation model, by quadrature of the differentiated integrand.
pub fn gaussian_population_xi_derivative(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let sd = (1.0 - rho * rho).sqrt();
    let sd3 = sd * sd * sd;
    let outer = |y: f64| {
        let kink = if rho != 0.0 { y / rho } else { f64::INFINITY };
        let (inner, _) = integrate_split(
            |x| {
                let u = (y - rho * x) / sd;
                let du = -x / sd + (y - rho * x) * rho / sd3;
                phi(x) * 2.0 * normal_cdf(u) * phi(u) * du
            },
            kink,
            INNER_TOL,
        );
        phi(y) * inner
    };
    let (integral, _) = integrate_split(outer, 0.0, OUTER_TOL);
    Ok(6.0 * integral)
}
