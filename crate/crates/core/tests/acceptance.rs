//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. `ACCEPTANCE_ONLY=3,7` restricts the run.

use std::time::Instant;

use num_rational::Ratio;
use rand::Rng;
use xi_boost::coefficients::{chatterjee_xi, decreasing_extremal_value, extremal_bounds, xi_nm};
use xi_boost::inference::{
    null_moments_enumerate, null_variance_asymptotic, null_xi_nm,
    permutation_test_fast_path_equivalence, TestMethod, CLT_VARIANCE,
};
use xi_boost::power::{beta_of_gamma, beta_of_gamma_exact, log_zeta};
use xi_boost::ranks::{for_each_permutation, random_rank_permutation};
use xi_boost::rng::{derive_rng, seeded, Domain};
use xi_boost::simulation::{
    consistency_study, ks_distance_normal, mean_variance, null_calibration_study, power_study,
    timing_study, PowerStudyConfig, StudyReport,
};
use xi_boost::{io, NeighborCount, Sample};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn nc(m: usize) -> NeighborCount {
    NeighborCount::new(m).unwrap()
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// ξ_{n,M} straight from its definition, with X in increasing order so that
/// the m-th right neighbor of position i is i+m (or i itself past the end).
fn xi_by_definition(r: &[u32], m: usize) -> Ratio<i64> {
    let n = r.len();
    let mut s = 0i64;
    for i in 0..n {
        for k in 1..=m {
            let j = if i + k < n { i + k } else { i };
            s += r[i].min(r[j]) as i64;
        }
    }
    let (n, m) = (n as i64, m as i64);
    // (n+1)[nM + M(M+1)/4], kept integral by scaling with 4
    Ratio::new(24 * s, (n + 1) * (4 * n * m + m * (m + 1))) - 2
}

fn c1_exact_null_mean() -> Outcome {
    let mut checked = 0;
    for n in 3..=6usize {
        for m in 1..n {
            let mut total = Ratio::from_integer(0i64);
            let mut count = 0i64;
            for_each_permutation(n, |p| {
                total += xi_by_definition(p, m);
                count += 1;
            });
            let lib = null_moments_enumerate(n, nc(m)).unwrap();
            if total != Ratio::from_integer(0) || lib.exact_mean != Some(Ratio::from_integer(0)) {
                return (false, format!("n={n} M={m}: oracle sum {total}, library mean {:?}", lib.exact_mean));
            }
            checked += count;
        }
    }
    (true, format!("mean exactly 0 for n=3..6, all M ({checked} permutation evaluations)"))
}

fn c2_permutation_moments() -> Outcome {
    let n = 5i64;
    let q = Ratio::new;
    let (mut cnt, mut s) = (0i64, [Ratio::from_integer(0i64); 14]);
    for_each_permutation(n as usize, |p| {
        let r: Vec<i64> = p.iter().map(|&v| v as i64).collect();
        let m12 = r[0].min(r[1]);
        let m34 = r[2].min(r[3]);
        let m13 = r[0].min(r[2]);
        let m23 = r[1].min(r[2]);
        let vals = [
            r[0], m12, r[0] * r[0], r[0] * r[1], r[1], r[0] * m23, m23, r[0] * m12, m12 * m34, m34,
            m12 * m13, m13, m12 * m12, 0,
        ];
        for (acc, v) in s.iter_mut().zip(vals) {
            *acc += Ratio::from_integer(v);
        }
        cnt += 1;
    });
    let e = |k: usize| s[k] / cnt;
    let got = [
        ("E[R1]", e(0), q(n + 1, 2)),
        ("E[min(R1,R2)]", e(1), q(n + 1, 3)),
        ("Var[R1]", e(2) - e(0) * e(0), q((n + 1) * (n - 1), 12)),
        ("Cov[R1,R2]", e(3) - e(0) * e(4), q(-(n + 1), 12)),
        ("Cov[R1,min(R2,R3)]", e(5) - e(0) * e(6), q(-(n + 1), 12)),
        ("Cov[R1,min(R1,R2)]", e(7) - e(0) * e(1), q((n - 2) * (n + 1), 24)),
        ("Cov[min12,min34]", e(8) - e(1) * e(9), q(-4 * (n + 1), 45)),
        ("Cov[min12,min13]", e(10) - e(1) * e(11), q((n + 1) * (4 * n - 17), 180)),
        ("Var[min12]", e(12) - e(1) * e(1), q((n - 2) * (n + 1), 18)),
    ];
    for (name, observed, formula) in &got {
        if observed != formula {
            return (false, format!("{name}: enumeration {observed} vs formula {formula}"));
        }
    }
    let listed: Vec<String> = got.iter().map(|(k, v, _)| format!("{k}={v}")).collect();
    (true, format!("n=5 all nine exact: {}", listed.join(", ")))
}

fn c3_null_variance() -> Outcome {
    let (n, m) = (1000usize, nc(20));
    let rep = null_calibration_study(n, m, 20_000, 303, workers()).unwrap();
    let var = rep.rows[0].variance.unwrap();
    let formula = null_variance_asymptotic(n, m).unwrap();
    let rel = (var / formula - 1.0).abs();
    let mut ok = rel <= 0.15 && (formula - 3.0667e-5).abs() < 1e-8;
    // argmin over M of the formula against √n
    let mut slopes = vec![];
    let mut prev: Option<(f64, f64)> = None;
    let mut ratios = vec![];
    for &nn in &[1_000usize, 10_000, 100_000, 1_000_000] {
        let best = (1..nn)
            .min_by(|&a, &b| {
                let va = null_variance_asymptotic(nn, nc(a)).unwrap();
                let vb = null_variance_asymptotic(nn, nc(b)).unwrap();
                va.total_cmp(&vb)
            })
            .unwrap();
        ratios.push(best as f64 / (nn as f64).sqrt());
        if let Some((ln_n, ln_m)) = prev {
            slopes.push(((best as f64).ln() - ln_m) / ((nn as f64).ln() - ln_n));
        }
        prev = Some(((nn as f64).ln(), (best as f64).ln()));
    }
    ok &= slopes.iter().all(|s| (s - 0.5).abs() < 0.02);
    (
        ok,
        format!(
            "MC var {var:.4e} vs formula {formula:.4e} ({:.1}% off); argmin/sqrt(n) {:?}, log-slopes {:?}",
            100.0 * rel,
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            slopes.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn c4_clt() -> Outcome {
    let (n, m) = (4096usize, 4usize);
    let scale = ((n * m) as f64).sqrt();
    let values: Vec<f64> = (0..2000u64)
        .map(|r| {
            let mut rng = derive_rng(Domain::User, 404, 0, r);
            let p = random_rank_permutation(&mut rng, n);
            scale * null_xi_nm(p.as_slice(), m)
        })
        .collect();
    let (_, var) = mean_variance(&values);
    let ks = ks_distance_normal(&values, CLT_VARIANCE);
    ((0.36..=0.44).contains(&var) && ks < 0.05, format!("var {var:.4}, KS {ks:.4}"))
}

fn freq(rep: &StudyReport, method: TestMethod, m: usize, rho0: f64) -> f64 {
    rep.rows
        .iter()
        .find(|r| r.method == method.name() && r.m == Some(m) && r.rho0 == Some(rho0))
        .and_then(|r| r.rejection_frequency)
        .unwrap()
}

fn c5_size() -> Outcome {
    let mut cfg = PowerStudyConfig::desk(vec![1000], vec![1, 20], vec![0.0], vec![TestMethod::XiPm], 505);
    cfg.replicates = 1000;
    cfg.workers = workers();
    let rep = power_study(&cfg).unwrap();
    let (f1, f20) = (freq(&rep, TestMethod::XiPm, 1, 0.0), freq(&rep, TestMethod::XiPm, 20, 0.0));
    let ok = f1 <= 0.071 && f20 <= 0.071 && (f1 - 0.056).abs() <= 0.02 && (f20 - 0.057).abs() <= 0.02;
    (ok, format!("rejection frequency M=1 {f1:.3} (reference 0.056), M=20 {f20:.3} (reference 0.057)"))
}

fn c6_power() -> Outcome {
    let ms = [1usize, 20, 100, 200];
    let mut cfg = PowerStudyConfig::desk(vec![1000], ms.to_vec(), vec![5.0, 2.0], vec![TestMethod::XiPm], 606);
    cfg.workers = workers();
    let rep = power_study(&cfg).unwrap();
    let strong: Vec<f64> = ms.iter().map(|&m| freq(&rep, TestMethod::XiPm, m, 5.0)).collect();
    let weak: Vec<f64> = ms.iter().map(|&m| freq(&rep, TestMethod::XiPm, m, 2.0)).collect();
    let t5 = [0.176, 0.851, 0.982, 0.997];
    let t2 = [0.075, 0.154, 0.365, 0.427];
    let near5 = strong.iter().zip(t5).all(|(a, b)| (a - b).abs() <= 0.06);
    let near2 = weak.iter().zip(t2).all(|(a, b)| (a - b).abs() <= 0.07);
    let increasing = strong.windows(2).all(|w| w[1] > w[0]);
    (
        near5 && near2 && increasing,
        format!("rho0=5 {strong:.3?} vs {t5:?}; rho0=2 {weak:.3?} vs {t2:?}; increasing={increasing}"),
    )
}

fn c7_dominance() -> Outcome {
    let mut cfg = PowerStudyConfig::desk(
        vec![1000],
        vec![100],
        vec![5.0],
        vec![TestMethod::XiPm, TestMethod::SymmetricNn],
        707,
    );
    cfg.replicates = 300;
    cfg.workers = workers();
    let rep = power_study(&cfg).unwrap();
    let a = freq(&rep, TestMethod::XiPm, 100, 5.0);
    let b = freq(&rep, TestMethod::SymmetricNn, 100, 5.0);
    (a - b >= 0.1, format!("xi-pm {a:.3} vs symmetric-nn {b:.3}, gap {:.3}", a - b))
}

fn c8_extremal() -> Outcome {
    let mut rng = seeded(808);
    for _ in 0..200 {
        let n = rng.random_range(2..=500usize);
        let m = rng.random_range(1..n);
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let up = xi_nm(&Sample::new(x.clone(), x.clone()).unwrap(), nc(m)).unwrap().value;
        let down = xi_nm(&Sample::new(x.clone(), x.iter().map(|v| -v).collect()).unwrap(), nc(m))
            .unwrap()
            .value;
        let (n, mm) = (n as i64, m as i64);
        // 1 - 3(M+1)/4 / (n + (M+1)/4), as one reduced fraction
        let up_oracle = Ratio::new(4 * n - 2 * mm - 2, 4 * n + mm + 1);
        let up_oracle = *up_oracle.numer() as f64 / *up_oracle.denom() as f64;
        let dn = (n + 1) * (4 * n + mm + 1);
        let down_oracle = Ratio::new(dn - (mm + 1) * (15 * n - 8 * mm - 1), dn);
        let down_oracle = *down_oracle.numer() as f64 / *down_oracle.denom() as f64;
        let stated_form = 1.0 - 3.0 * (m as f64 + 1.0) / 4.0 / (n as f64 + (m as f64 + 1.0) / 4.0);
        let lib_up = extremal_bounds(n as usize, nc(m)).unwrap().0;
        let lib_down = decreasing_extremal_value(n as usize, nc(m)).unwrap();
        if up.to_bits() != up_oracle.to_bits()
            || up.to_bits() != lib_up.to_bits()
            || down.to_bits() != down_oracle.to_bits()
            || down.to_bits() != lib_down.to_bits()
            || (up - stated_form).abs() > 1e-14
        {
            return (false, format!("n={n} M={m}: up {up} vs {up_oracle}, down {down} vs {down_oracle}"));
        }
    }
    (true, "200 random (n, M): y=x and y=-x match the closed forms bit for bit".into())
}

fn c9_bridge() -> Outcome {
    let mut rng = seeded(909);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=200usize);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let s = Sample::new(x, y).unwrap();
        let gap = bridge_gap(&s);
        worst = worst.max(gap - 3.0 / (n as f64 + 1.0));
    }
    let x = vec![1.0, 2.0, 3.0];
    let at3 = bridge_gap(&Sample::new(x.clone(), x).unwrap());
    let ok = worst <= 1e-12 && (at3 - 0.75).abs() < 1e-12;
    (ok, format!("max(gap - 3/(n+1)) = {worst:.3e} over 10,000 samples; n=3 identity gap {at3} = 3/4"))
}

fn bridge_gap(s: &Sample) -> f64 {
    let n = s.len() as f64;
    let a = xi_nm(s, nc(1)).unwrap().value;
    let b = chatterjee_xi(s).unwrap().value;
    ((n + 0.5) / (n - 1.0) * a - b).abs()
}

fn c10_boundary() -> Outcome {
    let r = Ratio::new;
    let exact = beta_of_gamma_exact(r(1, 4)).unwrap() == r(5, 16)
        && beta_of_gamma_exact(r(1, 2)).unwrap() == r(3, 8)
        && beta_of_gamma_exact(r(2, 3)).unwrap() == r(1, 3);
    let float = beta_of_gamma(0.25).unwrap() == 5.0 / 16.0
        && beta_of_gamma(0.5).unwrap() == 3.0 / 8.0
        && (beta_of_gamma(2.0 / 3.0).unwrap() - 1.0 / 3.0).abs() <= f64::EPSILON;
    let n = 1_000_000usize;
    let worst = (1..100)
        .map(|i| {
            let g = i as f64 / 100.0;
            let m = ((n as f64).powf(g).round() as usize).clamp(1, n - 1);
            (log_zeta(n, nc(m)).unwrap() / (n as f64).ln() + beta_of_gamma(g).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    (
        exact && float && worst < 0.02,
        format!("beta(1/4)=5/16, beta(1/2)=3/8, beta(2/3)=1/3 exact={exact}; max log gap at n=1e6 {worst:.2e}"),
    )
}

fn c11_consistency() -> Outcome {
    let rhos = [0.0, 0.2, 0.4, 0.6, 0.8];
    let rep = consistency_study(&rhos, &[5000], &[20], 300, 1111, workers()).unwrap();
    let gaps: Vec<f64> = rep
        .rows
        .iter()
        .map(|r| (r.mean.unwrap() - r.population_xi.unwrap()).abs())
        .collect();
    let detail: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("rho={} mean={:.4} xi={:.4}", r.rho.unwrap(), r.mean.unwrap(), r.population_xi.unwrap()))
        .collect();
    (gaps.iter().all(|&g| g < 0.02), detail.join("; "))
}

fn c12_fast_path() -> Outcome {
    let mut rng = seeded(1212);
    for case in 0..10_000 {
        let n = rng.random_range(2..=300usize);
        let m = rng.random_range(1..n);
        let r = random_rank_permutation(&mut rng, n);
        let (a, b) = permutation_test_fast_path_equivalence(&r, nc(m)).unwrap();
        if a.to_bits() != b.to_bits() {
            return (false, format!("case {case}: n={n} M={m}: {a} vs {b}"));
        }
    }
    (true, "10,000 random (permutation, M): replicate statistic == xi_nm bit for bit".into())
}

fn report_bytes(rep: &StudyReport) -> (Vec<u8>, Vec<u8>) {
    let (mut j, mut c) = (vec![], vec![]);
    io::write_report_json(rep, &mut j).unwrap();
    io::write_report_csv(rep, &mut c).unwrap();
    (j, c)
}

fn c13_complexity_and_determinism() -> Outcome {
    let timing = timing_study(&[5000], &[20, 200], 30, 1313).unwrap();
    let t = |m: usize| timing.rows.iter().find(|r| r.m == Some(m)).unwrap().clone();
    let (t20, t200) = (t(20), t(200));
    let ratio = t200.median_seconds.unwrap() / t20.median_seconds.unwrap();
    let ratio_ranked = t200.median_seconds_ranked.unwrap() / t20.median_seconds_ranked.unwrap();
    let timing_ok = (4.0..=16.0).contains(&ratio);

    let mut deterministic = true;
    let mut cfg = PowerStudyConfig::desk(
        vec![200],
        vec![1, 10],
        vec![0.0, 5.0],
        vec![TestMethod::XiPm, TestMethod::SymmetricNn, TestMethod::HoeffdingD, TestMethod::Pearson],
        1314,
    );
    cfg.replicates = 60;
    cfg.b = 99;
    let power_1 = power_study(&cfg).unwrap();
    cfg.workers = 4;
    let power_4 = power_study(&cfg).unwrap();
    deterministic &= report_bytes(&power_1) == report_bytes(&power_4);
    deterministic &= report_bytes(&null_calibration_study(500, nc(5), 2000, 1315, 1).unwrap())
        == report_bytes(&null_calibration_study(500, nc(5), 2000, 1315, 4).unwrap());
    deterministic &= report_bytes(&consistency_study(&[0.0, 0.5], &[500], &[1, 10], 50, 1316, 1).unwrap())
        == report_bytes(&consistency_study(&[0.0, 0.5], &[500], &[1, 10], 50, 1316, 3).unwrap());
    (
        timing_ok && deterministic,
        format!(
            "n=5000 full-evaluation ratio time(M=200)/time(M=20) = {ratio:.2} (median {:.1} us vs {:.1} us; \
             rank-given ratio {ratio_ranked:.2}); byte-identical reports across worker counts: {deterministic}",
            1e6 * t200.median_seconds.unwrap(),
            1e6 * t20.median_seconds.unwrap(),
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [Criterion; 13] = [
        ("exact null mean", c1_exact_null_mean),
        ("permutation moments at n=5", c2_permutation_moments),
        ("null variance and its argmin", c3_null_variance),
        ("null CLT", c4_clt),
        ("size validity", c5_size),
        ("power reproduction", c6_power),
        ("dominance over symmetric NN", c7_dominance),
        ("extremal identities", c8_extremal),
        ("bridge bound", c9_bridge),
        ("boundary curve", c10_boundary),
        ("consistency", c11_consistency),
        ("fast-path equivalence", c12_fast_path),
        ("complexity and determinism", c13_complexity_and_determinism),
    ];
    let mut failed = vec![];
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = run();
        println!(
            "{} criterion {id:>2} ({name}): {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
