//! Deterministic Monte Carlo studies: power tables, null calibration,
//! consistency trajectories and timing.
//!
//! Work is split into `(cell, replicate)` items. Every item draws from a
//! generator keyed by ids only, never by worker, so a study produces the same
//! report for any worker count. Data for a replicate is keyed by the data cell
//! (`n`, alternative) so that all methods and neighbor counts are compared on
//! the same samples.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{self, gaussian_population_xi, normal_cdf, RankedSample};
use crate::error::{Result, XiError};
use crate::inference::{
    self, null_variance_asymptotic, null_xi_nm, PermutationTestConfig, TestMethod, CLT_VARIANCE,
};
use crate::power::GaussianRotation;
use crate::ranks::{fill_random_permutation, NeighborCount};
use crate::rng::{derive_rng, Domain};

pub const SCHEMA_VERSION: u32 = 1;

/// Desk-scale defaults; the full-scale counterparts are 1,000 and 10,000.
pub const DESK_REPLICATES: usize = 500;
pub const DESK_B: usize = 999;
pub const FULL_REPLICATES: usize = 1000;
pub const FULL_B: usize = 10_000;

pub const TIMING_WARMUP: usize = 5;
pub const TIMING_MIN_REPETITIONS: usize = 30;

/// A rayon pool of a fixed size. Results never depend on the size.
pub struct WorkerPool {
    pool: rayon::ThreadPool,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(XiError::Config("workers must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| XiError::Config(e.to_string()))?;
        Ok(WorkerPool { pool })
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.pool.install(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Power,
    NullCalibration,
    Consistency,
    Timing,
}

/// One flat row of a study report; columns that do not apply are `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub n: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub replicates: usize,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaled_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q25: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q75: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_seconds_ranked: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema_version: u32,
    pub kind: StudyKind,
    pub master_seed: u64,
    pub rows: Vec<ReportRow>,
}

impl StudyReport {
    fn new(kind: StudyKind, master_seed: u64, rows: Vec<ReportRow>) -> Self {
        StudyReport {
            schema_version: SCHEMA_VERSION,
            kind,
            master_seed,
            rows,
        }
    }

    /// First row matching `method`, `n` and `M`.
    pub fn find(&self, method: &str, n: usize, m: Option<usize>) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.n == n && r.m == m)
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(XiError::Config(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

fn cell_error(cell: String) -> impl FnOnce(XiError) -> XiError {
    move |e| XiError::Cell {
        cell,
        source: Box::new(e),
    }
}

/// Packs a cell id and replicate id into one stream id (both below 2^32).
fn stream_id(cell: usize, replicate: usize) -> u64 {
    ((cell as u64) << 32) | replicate as u64
}

fn check_ids(cells: usize, replicates: usize) -> Result<()> {
    if cells as u64 > u32::MAX as u64 || replicates as u64 > u32::MAX as u64 {
        return Err(XiError::Config("too many cells or replicates".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStudyConfig {
    pub n_values: Vec<usize>,
    #[serde(rename = "M_values")]
    pub m_values: Vec<usize>,
    /// Local alternatives `ρ_n = ρ₀ / √n`.
    pub rho0_values: Vec<f64>,
    pub methods: Vec<TestMethod>,
    pub replicates: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: f64,
    pub master_seed: u64,
    pub workers: usize,
}

impl PowerStudyConfig {
    /// Desk-scale configuration: 500 replicates and B = 999.
    pub fn desk(
        n_values: Vec<usize>,
        m_values: Vec<usize>,
        rho0_values: Vec<f64>,
        methods: Vec<TestMethod>,
        master_seed: u64,
    ) -> Self {
        PowerStudyConfig {
            n_values,
            m_values,
            rho0_values,
            methods,
            replicates: DESK_REPLICATES,
            b: DESK_B,
            alpha: 0.05,
            master_seed,
            workers: 1,
        }
    }

    /// Switches to the full-scale budget: 1,000 replicates and B = 10,000.
    pub fn full_scale(mut self) -> Self {
        self.replicates = FULL_REPLICATES;
        self.b = FULL_B;
        self
    }

    pub fn validate(&self) -> Result<()> {
        nonempty("n_values", &self.n_values)?;
        nonempty("rho0_values", &self.rho0_values)?;
        nonempty("methods", &self.methods)?;
        if self.methods.iter().any(|m| m.uses_m()) {
            nonempty("M_values", &self.m_values)?;
        }
        if self.replicates == 0 || self.b == 0 {
            return Err(XiError::Config("replicates and B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(XiError::Config(format!("alpha={} must lie in (0, 1)", self.alpha)));
        }
        for &n in &self.n_values {
            for &rho0 in &self.rho0_values {
                GaussianRotation::new(rho0 / (n as f64).sqrt())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct PowerCell {
    data_cell: usize,
    method: TestMethod,
    n: usize,
    m: Option<usize>,
    rho0: f64,
}

impl PowerCell {
    fn label(&self) -> String {
        match self.m {
            Some(m) => format!("{} n={} M={} rho0={}", self.method, self.n, m, self.rho0),
            None => format!("{} n={} rho0={}", self.method, self.n, self.rho0),
        }
    }
}

fn power_cells(cfg: &PowerStudyConfig) -> Vec<PowerCell> {
    let mut cells = vec![];
    let mut data_cell = 0;
    for &n in &cfg.n_values {
        for &rho0 in &cfg.rho0_values {
            for &method in &cfg.methods {
                let ms: Vec<Option<usize>> = if method.uses_m() {
                    cfg.m_values.iter().map(|&m| Some(m)).collect()
                } else {
                    vec![None]
                };
                for m in ms {
                    cells.push(PowerCell {
                        data_cell,
                        method,
                        n,
                        m,
                        rho0,
                    });
                }
            }
            data_cell += 1;
        }
    }
    cells
}

/// Runs one test on one replicate; returns whether it rejected.
fn power_trial(cfg: &PowerStudyConfig, cell_id: usize, cell: &PowerCell, replicate: usize) -> Result<bool> {
    let rho = cell.rho0 / (cell.n as f64).sqrt();
    let mut rng = derive_rng(
        Domain::StudyData,
        cfg.master_seed,
        cell.data_cell as u64,
        replicate as u64,
    );
    let sample = GaussianRotation::new(rho)?.sample(&mut rng, cell.n)?;
    let m = NeighborCount::new(cell.m.unwrap_or(1))?;
    let result = match cell.method {
        TestMethod::Pearson => inference::pearson_test(&sample, cfg.alpha)?,
        TestMethod::XiAsymptotic => inference::asymptotic_test(&sample, m, cfg.alpha)?,
        method => {
            let test_cfg = PermutationTestConfig {
                b: cfg.b,
                alpha: cfg.alpha,
                m,
                seed: cfg.master_seed,
                method,
            };
            inference::permutation_test_on_stream(&sample, &test_cfg, stream_id(cell_id, replicate))?
        }
    };
    Ok(result.reject)
}

/// Rejection frequencies over `replicates` draws from the Gaussian rotation
/// model with `ρ = ρ₀/√n`, for every `(method, n, M, ρ₀)` cell.
pub fn power_study(cfg: &PowerStudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let cells = power_cells(cfg);
    check_ids(cells.len(), cfg.replicates)?;
    let pool = WorkerPool::new(cfg.workers)?;
    let work: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.replicates).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<Result<bool>> = pool.install(|| {
        work.par_iter()
            .map(|&(c, r)| power_trial(cfg, c, &cells[c], r).map_err(cell_error(cells[c].label())))
            .collect()
    });
    let mut rejections = vec![0usize; cells.len()];
    for (&(c, _), outcome) in work.iter().zip(outcomes) {
        rejections[c] += outcome? as usize;
    }
    let rows = cells
        .iter()
        .zip(rejections)
        .map(|(cell, rej)| ReportRow {
            method: cell.method.name().to_string(),
            n: cell.n,
            m: cell.m,
            rho0: Some(cell.rho0),
            rho: Some(cell.rho0 / (cell.n as f64).sqrt()),
            replicates: cfg.replicates,
            b: cell.method.is_permutation().then_some(cfg.b),
            alpha: Some(cfg.alpha),
            master_seed: cfg.master_seed,
            rejection_frequency: Some(rej as f64 / cfg.replicates as f64),
            ..ReportRow::default()
        })
        .collect();
    Ok(StudyReport::new(StudyKind::Power, cfg.master_seed, rows))
}

/// Sample mean and unbiased sample variance.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kolmogorov-Smirnov distance between the empirical law of `values` and `N(0, variance)`.
pub fn ks_distance_normal(values: &[f64], variance: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let sd = variance.sqrt();
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x / sd);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Null behaviour of `ξ_{n,M}` from `replicates` uniform rank permutations.
///
/// The KS distance of `√(nM) ξ` to `N(0, 2/5)` is reported only when `M⁴ <= n`.
pub fn null_calibration_study(
    n: usize,
    m: NeighborCount,
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<StudyReport> {
    let mm = m.check(n)?;
    if replicates < 2 {
        return Err(XiError::Config("null calibration needs at least 2 replicates".into()));
    }
    let pool = WorkerPool::new(workers)?;
    let values: Vec<f64> = pool.install(|| {
        (0..replicates as u64)
            .into_par_iter()
            .map_init(Vec::new, |buf, r| {
                let mut rng = derive_rng(Domain::StudyData, seed, 0, r);
                fill_random_permutation(&mut rng, n, buf);
                null_xi_nm(buf, mm)
            })
            .collect()
    });
    let (mean, variance) = mean_variance(&values);
    let scale = ((n * mm) as f64).sqrt();
    let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
    let in_regime = (mm as u128).pow(4) <= n as u128;
    let row = ReportRow {
        method: coefficients::Method::XiNm.name().to_string(),
        n,
        m: Some(mm),
        replicates,
        master_seed: seed,
        mean: Some(mean),
        variance: Some(variance),
        variance_ratio: Some(variance / null_variance_asymptotic(n, m)?),
        scaled_variance: Some(variance * (n * mm) as f64),
        ks_distance: in_regime.then(|| ks_distance_normal(&scaled, CLT_VARIANCE)),
        ..ReportRow::default()
    };
    Ok(StudyReport::new(StudyKind::NullCalibration, seed, vec![row]))
}

/// Mean and quartiles of `ξ_{n,M}` on Gaussian rotation samples, next to the population value.
pub fn consistency_study(
    rho_values: &[f64],
    n_values: &[usize],
    m_values: &[usize],
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<StudyReport> {
    nonempty("rho_values", rho_values)?;
    nonempty("n_values", n_values)?;
    nonempty("M_values", m_values)?;
    if replicates == 0 {
        return Err(XiError::Config("replicates must be at least 1".into()));
    }
    check_ids(rho_values.len() * n_values.len(), replicates)?;
    let pool = WorkerPool::new(workers)?;
    let mut rows = vec![];
    for (ri, &rho) in rho_values.iter().enumerate() {
        let model = GaussianRotation::new(rho)?;
        let population = gaussian_population_xi(rho)?.xi;
        for (ni, &n) in n_values.iter().enumerate() {
            let data_cell = (ri * n_values.len() + ni) as u64;
            let ms: Vec<NeighborCount> = m_values
                .iter()
                .map(|&m| {
                    let mc = NeighborCount::new(m)?;
                    mc.check(n)?;
                    Ok(mc)
                })
                .collect::<Result<_>>()
                .map_err(cell_error(format!("rho={rho} n={n}")))?;
            // values[r][k] = ξ_{n, M_k} on replicate r
            let values: Vec<Result<Vec<f64>>> = pool.install(|| {
                (0..replicates as u64)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = derive_rng(Domain::StudyData, seed, data_cell, r);
                        let sample = model.sample(&mut rng, n)?;
                        let ranked = RankedSample::new(&sample)?;
                        ms.iter()
                            .map(|&m| {
                                coefficients::xi_nm_from_ranks(&ranked.y_ranks, &ranked.x_order, m)
                                    .map(|v| v.value)
                            })
                            .collect()
                    })
                    .collect()
            });
            let values: Vec<Vec<f64>> = values
                .into_iter()
                .collect::<Result<_>>()
                .map_err(cell_error(format!("rho={rho} n={n}")))?;
            for (k, m) in ms.iter().enumerate() {
                let mut column: Vec<f64> = values.iter().map(|v| v[k]).collect();
                let (mean, variance) = mean_variance(&column);
                column.sort_by(f64::total_cmp);
                rows.push(ReportRow {
                    method: coefficients::Method::XiNm.name().to_string(),
                    n,
                    m: Some(m.get()),
                    rho: Some(rho),
                    replicates,
                    master_seed: seed,
                    mean: Some(mean),
                    variance: Some(variance),
                    q25: Some(quantile_sorted(&column, 0.25)),
                    median: Some(quantile_sorted(&column, 0.5)),
                    q75: Some(quantile_sorted(&column, 0.75)),
                    population_xi: Some(population),
                    ..ReportRow::default()
                });
            }
        }
    }
    Ok(StudyReport::new(StudyKind::Consistency, seed, rows))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Median wall time of one `ξ^±_{n,M}` evaluation per `(n, M)` cell on
/// independent standard Gaussian data, after `TIMING_WARMUP` unrecorded runs.
///
/// `median_seconds` covers the full evaluation from raw data (both sorts plus
/// the neighbor sums); `median_seconds_ranked` covers the evaluation from
/// precomputed ranks, which is the per-replicate cost inside a permutation
/// test. Runs sequentially on the calling thread. Wall times are not
/// reproducible, unlike every other study.
pub fn timing_study(
    n_values: &[usize],
    m_values: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<StudyReport> {
    nonempty("n_values", n_values)?;
    nonempty("M_values", m_values)?;
    if replicates < TIMING_MIN_REPETITIONS {
        return Err(XiError::Config(format!(
            "timing needs at least {TIMING_MIN_REPETITIONS} repetitions, got {replicates}"
        )));
    }
    let model = GaussianRotation::new(0.0)?;
    let mut rows = vec![];
    for (ni, &n) in n_values.iter().enumerate() {
        let samples = (0..replicates)
            .map(|r| model.sample(&mut derive_rng(Domain::StudyData, seed, ni as u64, r as u64), n))
            .collect::<Result<Vec<_>>>()?;
        let ranked = samples
            .iter()
            .map(RankedSample::new)
            .collect::<Result<Vec<_>>>()?;
        for &m in m_values {
            let mc = NeighborCount::new(m)?;
            mc.check(n).map_err(cell_error(format!("n={n} M={m}")))?;
            for s in samples.iter().take(TIMING_WARMUP) {
                std::hint::black_box(coefficients::xi_pm(s, mc)?);
            }
            let mut full = Vec::with_capacity(replicates);
            for s in &samples {
                let t = Instant::now();
                std::hint::black_box(coefficients::xi_pm(std::hint::black_box(s), mc)?);
                full.push(t.elapsed().as_secs_f64());
            }
            let mut from_ranks = Vec::with_capacity(replicates);
            for r in &ranked {
                let t = Instant::now();
                std::hint::black_box(coefficients::xi_pm_from_ranks(
                    std::hint::black_box(&r.y_ranks),
                    &r.x_order,
                    mc,
                )?);
                from_ranks.push(t.elapsed().as_secs_f64());
            }
            rows.push(ReportRow {
                method: coefficients::Method::XiPm.name().to_string(),
                n,
                m: Some(m),
                replicates,
                master_seed: seed,
                median_seconds: Some(median(full)),
                median_seconds_ranked: Some(median(from_ranks)),
                ..ReportRow::default()
            });
        }
    }
    Ok(StudyReport::new(StudyKind::Timing, seed, rows))
}
