//! Independence tests and null moments.
//!
//! The permutation test draws `B` uniform rank permutations and evaluates the
//! statistic on the identity X order, where the `m`-th right neighbor of
//! position `i` is simply `i + m`. Each replicate costs `O(nM)` for the
//! nearest-neighbor statistics, so a full test costs `O(BnM)`; budget `B`
//! accordingly. Replicate `b` always uses the generator derived from
//! `(seed, b)`, so results do not depend on the number of worker threads.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::coefficients::{self, normal_cdf, xi_from_min_sum, RankedSample};
use crate::error::{Result, XiError};
use crate::kernels;
use crate::ranks::{fill_random_permutation, for_each_permutation, NeighborCount, RankVector, Sample};
use crate::rng::{derive_rng, Domain};

/// Asymptotic null variance of `√(nM) ξ_{n,M}`.
pub const CLT_VARIANCE: f64 = 0.4;

/// Independence tests known to the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    /// Permutation test on `ξ^±_{n,M}`.
    XiPm,
    /// Permutation test on the symmetric-neighbor min-rank sum (right-tailed).
    SymmetricNn,
    /// Permutation test on Hoeffding's D (right-tailed).
    HoeffdingD,
    /// Two-sided t test on Pearson's r.
    Pearson,
    /// One-sided normal approximation for `ξ_{n,M}`.
    XiAsymptotic,
}

impl TestMethod {
    pub const ALL: [TestMethod; 5] = [
        TestMethod::XiPm,
        TestMethod::SymmetricNn,
        TestMethod::HoeffdingD,
        TestMethod::Pearson,
        TestMethod::XiAsymptotic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestMethod::XiPm => "xi-pm",
            TestMethod::SymmetricNn => "symmetric-nn",
            TestMethod::HoeffdingD => "hoeffding-d",
            TestMethod::Pearson => "pearson",
            TestMethod::XiAsymptotic => "xi-asymptotic",
        }
    }

    /// Whether the test is calibrated by rank permutations.
    pub fn is_permutation(self) -> bool {
        matches!(
            self,
            TestMethod::XiPm | TestMethod::SymmetricNn | TestMethod::HoeffdingD
        )
    }

    /// Whether the statistic depends on the neighbor count `M`.
    pub fn uses_m(self) -> bool {
        matches!(
            self,
            TestMethod::XiPm | TestMethod::SymmetricNn | TestMethod::XiAsymptotic
        )
    }
}

impl std::fmt::Display for TestMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TestMethod {
    type Err = XiError;

    fn from_str(s: &str) -> Result<Self> {
        TestMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| XiError::Config(format!("unknown test method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestConfig {
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: NeighborCount,
    pub seed: u64,
    pub method: TestMethod,
}

impl PermutationTestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(XiError::Config("B must be at least 1".into()));
        }
        check_alpha(self.alpha)?;
        if !self.method.is_permutation() {
            return Err(XiError::Config(format!(
                "method '{}' is not a permutation test",
                self.method
            )));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(XiError::Config(format!("alpha={alpha} must lie in (0, 1)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub n: usize,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b: Option<usize>,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

/// Evaluates a permutation-calibrated statistic on ranks laid out in X order.
fn sorted_statistic(method: TestMethod, s: &[u32], m: usize) -> f64 {
    match method {
        TestMethod::XiPm => coefficients::xi_pm_sorted(s, m),
        TestMethod::SymmetricNn => kernels::symmetric_min_sum(s, m) as f64,
        TestMethod::HoeffdingD => coefficients::hoeffding_sorted(s),
        TestMethod::Pearson | TestMethod::XiAsymptotic => {
            unreachable!("not a permutation statistic")
        }
    }
}

fn check_size(method: TestMethod, n: usize, m: NeighborCount) -> Result<usize> {
    match method {
        TestMethod::HoeffdingD if n < 5 => Err(XiError::Size { n, min: 5 }),
        TestMethod::HoeffdingD => Ok(0),
        _ => m.check(n),
    }
}

/// The `B` null statistics for sample size `n` under `cfg`, in replicate order.
pub fn null_replicates(n: usize, cfg: &PermutationTestConfig) -> Result<Vec<f64>> {
    null_replicates_on_stream(n, cfg, 0)
}

/// As [`null_replicates`], drawing from stream `stream` of `cfg.seed`.
/// Distinct streams give independent replicate sets.
pub fn null_replicates_on_stream(n: usize, cfg: &PermutationTestConfig, stream: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let m = check_size(cfg.method, n, cfg.m)?;
    Ok((0..cfg.b as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, b| {
            let mut rng = derive_rng(Domain::NullReplicate, cfg.seed, stream, b);
            fill_random_permutation(&mut rng, n, buf);
            sorted_statistic(cfg.method, buf, m)
        })
        .collect())
}

/// `(1 + #{b : T_b >= T}) / (1 + B)`.
pub fn permutation_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&t| t >= observed).count();
    (1 + exceed) as f64 / (1 + replicates.len()) as f64
}

/// The statistic of `cfg.method` evaluated on the observed sample.
pub fn observed_statistic(s: &Sample, cfg: &PermutationTestConfig) -> Result<f64> {
    let ranked = RankedSample::new(s)?;
    let m = check_size(cfg.method, ranked.len(), cfg.m)?;
    Ok(sorted_statistic(cfg.method, &ranked.sorted_ranks(), m))
}

/// Simulation-based independence test. Rejects when the permutation p-value is at most `alpha`.
pub fn permutation_test(s: &Sample, cfg: &PermutationTestConfig) -> Result<TestResult> {
    permutation_test_on_stream(s, cfg, 0)
}

/// As [`permutation_test`] with null replicates from stream `stream` of `cfg.seed`.
pub fn permutation_test_on_stream(
    s: &Sample,
    cfg: &PermutationTestConfig,
    stream: u64,
) -> Result<TestResult> {
    cfg.validate()?;
    let n = s.len();
    let statistic = observed_statistic(s, cfg)?;
    let replicates = null_replicates_on_stream(n, cfg, stream)?;
    let p_value = permutation_p_value(statistic, &replicates);
    Ok(TestResult {
        method: cfg.method,
        statistic,
        p_value,
        reject: p_value <= cfg.alpha,
        n,
        m: cfg.method.uses_m().then_some(cfg.m.get()),
        b: Some(cfg.b),
        alpha: cfg.alpha,
        seed: Some(cfg.seed),
    })
}

/// One-sided test based on `√(nM) ξ_{n,M} → N(0, 2/5)`; requires `M⁴ <= n`.
pub fn asymptotic_test(s: &Sample, m: NeighborCount, alpha: f64) -> Result<TestResult> {
    asymptotic_test_with(s, m, alpha, false)
}

/// [`asymptotic_test`] with an explicit override of the `M⁴ <= n` guard.
pub fn asymptotic_test_with(
    s: &Sample,
    m: NeighborCount,
    alpha: f64,
    allow_outside_regime: bool,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let n = s.len();
    let mm = m.check(n)?;
    let m4 = (mm as u128).pow(4);
    if !allow_outside_regime && m4 > n as u128 {
        return Err(XiError::Regime { n, m4 });
    }
    let xi = coefficients::xi_nm(s, m)?.value;
    let p_value = asymptotic_p_value(xi, n, mm);
    Ok(TestResult {
        method: TestMethod::XiAsymptotic,
        statistic: xi,
        p_value,
        reject: p_value <= alpha,
        n,
        m: Some(mm),
        b: None,
        alpha,
        seed: None,
    })
}

/// `1 - Φ(√(nM) ξ / √(2/5))`.
pub fn asymptotic_p_value(xi: f64, n: usize, m: usize) -> f64 {
    let z = ((n * m) as f64).sqrt() * xi / CLT_VARIANCE.sqrt();
    normal_cdf(-z)
}

/// Two-sided t test of zero Pearson correlation.
pub fn pearson_test(s: &Sample, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let n = s.len();
    let r = coefficients::pearson_r(s)?.value;
    let df = (n - 2) as f64;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| XiError::Degenerate(e.to_string()))?;
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(TestResult {
        method: TestMethod::Pearson,
        statistic: r,
        p_value,
        reject: p_value <= alpha,
        n,
        m: None,
        b: None,
        alpha,
        seed: None,
    })
}

/// `(2/5)/(nM) + (8/15) M/n²`, the large-sample null variance of `ξ_{n,M}`.
pub fn null_variance_asymptotic(n: usize, m: NeighborCount) -> Result<f64> {
    let mm = m.check(n)? as f64;
    let nf = n as f64;
    Ok(0.4 / (nf * mm) + (8.0 / 15.0) * mm / (nf * nf))
}

/// Null mean and variance of `ξ_{n,M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullMoments {
    pub n: usize,
    pub m: usize,
    pub mean: f64,
    pub variance_asymptotic: f64,
    pub variance_exact: Option<f64>,
    pub exact_mean: Option<Ratio<i128>>,
    pub exact_variance: Option<Ratio<i128>>,
}

/// Largest `n` accepted by [`null_moments_enumerate`] (8! = 40,320 permutations).
pub const MAX_ENUMERATION_N: usize = 8;

/// Exact null moments by enumerating all `n!` rank permutations with `x = (1..n)`.
pub fn null_moments_enumerate(n: usize, m: NeighborCount) -> Result<NullMoments> {
    if n > MAX_ENUMERATION_N {
        return Err(XiError::Config(format!(
            "enumeration limited to n <= {MAX_ENUMERATION_N}, got n={n}"
        )));
    }
    let mm = m.check(n)?;
    let den = (n as i128 + 1) * (mm as i128) * (4 * n as i128 + mm as i128 + 1);
    // ξ = (24 S - 2 den) / den for the min-rank sum S.
    let (mut count, mut sum, mut sum_sq) = (0i128, 0i128, 0i128);
    for_each_permutation(n, |perm| {
        let s = kernels::right_min_sum(perm, mm) as i128;
        let num = 24 * s - 2 * den;
        count += 1;
        sum += num;
        sum_sq += num * num;
    });
    let mean = Ratio::new(sum, count * den);
    let second = Ratio::new(sum_sq, count * den * den);
    let variance = second - mean * mean;
    let to_f64 = |r: &Ratio<i128>| coefficients::ratio_to_f64(*r.numer(), *r.denom());
    Ok(NullMoments {
        n,
        m: mm,
        mean: to_f64(&mean),
        variance_asymptotic: null_variance_asymptotic(n, m)?,
        variance_exact: Some(to_f64(&variance)),
        exact_mean: Some(mean),
        exact_variance: Some(variance),
    })
}

/// Evaluates one null replicate two ways: through the explicit `g_m(i) = i + m`
/// neighbor rule on `r`, and through [`coefficients::xi_nm`] on the synthetic
/// sample `(x_i, y_i) = (i, r_i)`.
pub fn permutation_test_fast_path_equivalence(r: &RankVector, m: NeighborCount) -> Result<(f64, f64)> {
    let n = r.len();
    let mm = m.check(n)?;
    let ranks = r.as_slice();
    let mut sum = 0u64;
    for i in 0..n {
        for k in 1..=mm {
            let g = if i + k < n { i + k } else { i };
            sum += ranks[i].min(ranks[g]) as u64;
        }
    }
    let a = xi_from_min_sum(sum, n, mm);
    let synthetic = Sample::new(
        (1..=n).map(|i| i as f64).collect(),
        ranks.iter().map(|&v| v as f64).collect(),
    )?;
    let b = coefficients::xi_nm(&synthetic, m)?.value;
    Ok((a, b))
}

/// The statistic used for null replicates of `ξ_{n,M}` on a uniform permutation.
pub fn null_xi_nm(perm: &[u32], m: usize) -> f64 {
    xi_from_min_sum(kernels::right_min_sum(perm, m), perm.len(), m)
}
