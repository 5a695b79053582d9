//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skewdim::coding::{
    cf_map_derivative_mod, induced_ifs_maps, rho0_digits, rho0_value, Digit, PairSymbol, PairWord,
    TruncatedAlphabet,
};
use skewdim::dimension::{bowen_dimension, global_dimension, variational_sweep};
use skewdim::empirics::{local_dimension, sample_measure, ScaleWindow, Target};
use skewdim::smale::{SimilarityMap, SimilaritySchedule, SmaleSystem};
use skewdim::thermodynamics::{
    gibbs_markov, measure_stats, pressure_cylinder_sum, pressure_derivative_check, MeasureStats,
    Potential, StatsOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sym(m: u64, n: u64) -> PairSymbol {
    PairSymbol::new(m, n).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let system = Arc::new(SmaleSystem::inverse_conjugate());
    let m3 = TruncatedAlphabet::new(3).unwrap();
    let g = gibbs_markov(&Potential::geometric(system, 1.5).unwrap(), &m3, 1).unwrap();
    let c = g.gibbs_constant_hat();
    // Relative slack for rounding in the ratio itself.
    let slack = 1e-12;
    let mut inside = true;
    for n in 1..=6 {
        let (lo, hi) = g.gibbs_ratio_range(n).unwrap();
        inside &= lo >= (1.0 - slack) / c && hi <= c * (1.0 + slack);
    }
    let c5 = g.gibbs_constant(5).unwrap();
    let c6 = g.gibbs_constant(6).unwrap();
    let stable = (c6 / c5 - 1.0).abs() <= 0.2;
    let elapsed = start.elapsed();
    outcome(
        inside && stable && elapsed < Duration::from_secs(60),
        format!(
            "C = {c:.6}, C5 = {c5:.6}, C6 = {c6:.6}, all ratios inside: {inside}, {elapsed:.2?}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let ic = Arc::new(SmaleSystem::inverse_conjugate());
    let geo = Arc::new(SmaleSystem::similarity(0.5, SimilaritySchedule::Geometric).unwrap());
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for m in 1..=3 {
        let alphabet = TruncatedAlphabet::new(m).unwrap();
        let mut potentials = vec![Potential::Constant(0.0), Potential::Constant(-1.3)];
        for s in [0.5, 1.0, 1.5, 2.0] {
            potentials.push(Potential::geometric(ic.clone(), s).unwrap());
            potentials.push(Potential::geometric(geo.clone(), s).unwrap());
        }
        for p in &potentials {
            for k in [1, 2] {
                let g = gibbs_markov(p, &alphabet, k).unwrap();
                let est = pressure_cylinder_sum(p, &alphabet, 6, k).unwrap();
                worst = worst.max((g.log_pressure() - est.extrapolated).abs());
                cases += 1;
            }
        }
    }
    outcome(
        worst <= 1e-3,
        format!("{cases} cases, max |difference| = {worst:.3e}"),
    )
}

/// Root of `sum r_i^s = 1` by Newton's method from `s = 1`.
fn moran_root(ratios: &[f64]) -> f64 {
    let mut s = 1.0;
    for _ in 0..100 {
        let f: f64 = ratios.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
        let df: f64 = ratios.iter().map(|r| r.powf(s) * r.ln()).sum();
        s -= f / df;
    }
    s
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let m2 = TruncatedAlphabet::new(2).unwrap();
    let equal =
        SmaleSystem::similarity(0.5, SimilaritySchedule::ring(3, 0.25, 0.6).unwrap()).unwrap();
    let root_equal = bowen_dimension(&equal, &m2, 0, 1e-9).unwrap().root;
    let oracle_equal = 3f64.ln() / -(0.125f64).ln();

    let maps = vec![
        SimilarityMap {
            symbol: sym(1, 1),
            ratio: 0.3,
            translation: Complex64::new(0.45, 0.0),
        },
        SimilarityMap {
            symbol: sym(1, 2),
            ratio: 0.2,
            translation: Complex64::new(-0.45, 0.0),
        },
    ];
    let two = SmaleSystem::similarity(0.5, SimilaritySchedule::Explicit(maps)).unwrap();
    let root_two = bowen_dimension(&two, &m2, 0, 1e-9).unwrap().root;
    let oracle_two = moran_root(&[0.15, 0.1]);
    let (d1, d2) = (
        (root_equal - oracle_equal).abs(),
        (root_two - oracle_two).abs(),
    );
    let elapsed = start.elapsed();
    outcome(
        d1 <= 1e-6 && d2 <= 1e-6 && elapsed < Duration::from_secs(10),
        format!("equal moduli diff {d1:.2e}, two moduli diff {d2:.2e}, {elapsed:.2?}"),
    )
}

fn criterion_4() -> Outcome {
    let system = SmaleSystem::inverse_conjugate();
    let m3 = TruncatedAlphabet::new(3).unwrap();
    let grid: Vec<f64> = (0..21).map(|i| 0.35 + 0.05 * i as f64).collect();
    let r = variational_sweep(&system, &m3, 2, &grid, 1e-8).unwrap();
    let step = 0.05;
    let argmax_ok = (r.argmax - r.delta_t).abs() <= step;
    let below = r.curve.iter().all(|p| p.delta <= r.delta_t + 1e-2);
    outcome(
        argmax_ok && r.gap <= 1e-2 && below,
        format!(
            "delta_T = {:.6}, argmax = {:.2}, sup = {:.6}, gap = {:.2e}, curve below delta_T + 0.01: {below}",
            r.delta_t, r.argmax, r.sup_value, r.gap
        ),
    )
}

fn criterion_5() -> Outcome {
    let system = Arc::new(SmaleSystem::inverse_conjugate());
    let m3 = TruncatedAlphabet::new(3).unwrap();
    let c = pressure_derivative_check(&system, 1.0, 1e-3, &m3, 3, 100_000, 40, 2024).unwrap();
    let bound = (1e-3f64).max(2.0 * c.integral_std_error);
    let diff = (c.fd - c.integral).abs();
    outcome(
        diff <= bound,
        format!(
            "fd = {:.6}, -chi_T = {:.6} (SE {:.2e}), |diff| = {diff:.2e}, bound {bound:.2e}",
            c.fd, c.integral, c.integral_std_error
        ),
    )
}

fn criterion_6() -> Outcome {
    let (k, ratio, contraction) = (4usize, 0.3, 0.5);
    let r = ratio * contraction;
    let system = SmaleSystem::similarity(
        contraction,
        SimilaritySchedule::ring(k, ratio, 0.7).unwrap(),
    )
    .unwrap();
    let m2 = TruncatedAlphabet::new(2).unwrap();
    let g = gibbs_markov(&Potential::Constant(0.0), &m2, 0).unwrap();
    let omega = PairWord::repeat(sym(1, 1), 24);
    let cloud = sample_measure(&g, &system, &Target::Fiber(omega), 100_000, 30, 6).unwrap();
    // Five periods of the self-similar structure.
    let window = ScaleWindow::new(0.3 * r.powi(5), 0.3, 26).unwrap();
    let est = local_dimension(&cloud, &window, 1000, 60).unwrap();
    let predicted = (k as f64).ln() / -r.ln();
    let bias = est.mean - predicted;
    outcome(
        bias.abs() <= 0.05 && est.stddev <= 0.1,
        format!(
            "mean {:.4} vs {predicted:.4}, dispersion {:.4}",
            est.mean, est.stddev
        ),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let system = Arc::new(SmaleSystem::similarity(0.5, SimilaritySchedule::Geometric).unwrap());
    let m2 = TruncatedAlphabet::new(2).unwrap();
    let g = gibbs_markov(&Potential::geometric(system.clone(), 1.0).unwrap(), &m2, 0).unwrap();
    let options = StatsOptions {
        n_samples: 20_000,
        seed: 7,
        ..StatsOptions::default()
    };
    let stats = measure_stats(&g, &system, &options).unwrap();
    // The measure is symmetric in the two digits, so chi_1 = chi_2 exactly.
    let chi_z = 0.5 * (stats.chi1 + stats.chi2);
    let symmetric = MeasureStats::new(
        stats.h_mu,
        stats.h_mu1,
        stats.h_mu2,
        chi_z,
        chi_z,
        stats.chi_t,
    );
    let formula = global_dimension(&symmetric).unwrap();

    let cloud = sample_measure(&g, &system, &Target::Global, 200_000, 30, 77).unwrap();
    let z = cloud.project(&[0, 1]).unwrap();
    let window = ScaleWindow::new(0.002, 0.04, 12).unwrap();
    let ez = local_dimension(&z, &window, 2000, 70).unwrap();
    let eg = local_dimension(&cloud, &window, 2000, 71).unwrap();
    let dz = (ez.mean - formula.z_part).abs();
    let dg = (eg.mean - formula.value).abs();
    let elapsed = start.elapsed();
    outcome(
        dz <= 0.1 && dg <= 0.15 && elapsed < Duration::from_secs(600),
        format!(
            "z: {:.4} vs {:.4}; global: {:.4} vs {:.4}; {elapsed:.2?}",
            ez.mean, formula.z_part, eg.mean, formula.value
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let h = rng.gen_range(0.1..3.0);
        let chi = rng.gen_range(0.1..4.0);
        let stats = MeasureStats::new(
            h,
            rng.gen_range(0.0..h),
            rng.gen_range(0.0..h),
            chi,
            chi,
            rng.gen_range(0.1..4.0),
        );
        let g = global_dimension(&stats).unwrap();
        worst = worst.max((g.branch_b_value - g.branch_c_value).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("max |b - c| = {worst:.2e} over 100 draws"),
    )
}

fn criterion_9() -> Outcome {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let silver = 2f64.sqrt() - 1.0;
    let round_trip = |x: f64| rho0_value(&rho0_digits(x, 30).unwrap()).midpoint() - x;
    let (eg, es) = (round_trip(golden).abs(), round_trip(silver).abs());
    let parabolic = cf_map_derivative_mod(Digit::ONE, 0.0).unwrap();
    let maps = induced_ifs_maps(&TruncatedAlphabet::new(5).unwrap(), 20).unwrap();
    let worst = maps.iter().map(|m| m.derivative_sup).fold(0.0, f64::max);
    outcome(
        eg <= 1e-12 && es <= 1e-12 && parabolic == 1.0 && worst < 1.0,
        format!(
            "golden err {eg:.1e}, silver err {es:.1e}, |phi_1'(0)| = {parabolic}, {} induced maps, max sup {worst:.4}",
            maps.len()
        ),
    )
}

/// `delta(s) = h/chi` for Bernoulli weights `p_i ~ r_i^s` and its second
/// derivative from the cumulants of `log r` under `p`.
fn similarity_delta(ratios: &[f64], s: f64) -> (f64, f64) {
    let a: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let z: f64 = a.iter().map(|x| (s * x).exp()).sum();
    let p: Vec<f64> = a.iter().map(|x| (s * x).exp() / z).collect();
    let e: f64 = p.iter().zip(&a).map(|(p, x)| p * x).sum();
    let v: f64 = p.iter().zip(&a).map(|(p, x)| p * (x - e).powi(2)).sum();
    let k3: f64 = p.iter().zip(&a).map(|(p, x)| p * (x - e).powi(3)).sum();
    let h = -s * e + z.ln();
    let (h1, h2) = (-s * v, -v - s * k3);
    let (chi, chi1, chi2) = (-e, -v, -k3);
    let d2 = (h2 * chi - h * chi2) / chi.powi(2) - 2.0 * chi1 * (h1 * chi - h * chi1) / chi.powi(3);
    (h / chi, d2)
}

fn criterion_10() -> Outcome {
    let m2 = TruncatedAlphabet::new(2).unwrap();
    let maps = vec![
        SimilarityMap {
            symbol: sym(1, 1),
            ratio: 0.3,
            translation: Complex64::new(0.5, 0.3),
        },
        SimilarityMap {
            symbol: sym(1, 2),
            ratio: 0.1,
            translation: Complex64::new(-0.5, 0.3),
        },
        SimilarityMap {
            symbol: sym(2, 1),
            ratio: 0.2,
            translation: Complex64::new(0.0, -0.5),
        },
    ];
    let effective = [0.15, 0.05, 0.1];
    let system = SmaleSystem::similarity(0.5, SimilaritySchedule::Explicit(maps)).unwrap();
    let h = 0.05;
    let grid: Vec<f64> = (0..41).map(|i| 0.2 + h * i as f64).collect();
    let sweep = variational_sweep(&system, &m2, 0, &grid, 1e-9).unwrap();
    let mut worst: f64 = 0.0;
    for w in sweep.curve.windows(3) {
        let fd = (w[2].delta - 2.0 * w[1].delta + w[0].delta) / (h * h);
        worst = worst.max((fd - similarity_delta(&effective, w[1].s).1).abs());
    }
    let curve_err = sweep
        .curve
        .iter()
        .map(|p| (p.delta - similarity_delta(&effective, p.s).0).abs())
        .fold(0.0, f64::max);

    let ic = SmaleSystem::inverse_conjugate();
    let m3 = TruncatedAlphabet::new(3).unwrap();
    let ic_grid: Vec<f64> = (0..21).map(|i| 0.35 + 0.05 * i as f64).collect();
    let ic_sweep = variational_sweep(&ic, &m3, 2, &ic_grid, 1e-8).unwrap();
    outcome(
        worst <= 1e-3 && curve_err <= 1e-9 && ic_sweep.spike_ratio <= 10.0,
        format!(
            "similarity: max |d2 - analytic| = {worst:.2e}, curve err {curve_err:.1e}; inverse conjugate spike ratio {:.3}",
            ic_sweep.spike_ratio
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("Gibbs sandwich", criterion_1),
        ("pressure cross-method", criterion_2),
        ("Moran oracle", criterion_3),
        ("variational principle", criterion_4),
        ("Ruelle derivative", criterion_5),
        ("fiber exactness", criterion_6),
        ("global formula", criterion_7),
        ("branch identity", criterion_8),
        ("coding fidelity", criterion_9),
        ("smoothness proxy", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<22} {}  {} [{:.1?}]",
            i + 1,
            name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
