use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skewdim::coding::{PairSymbol, PairWord, TruncatedAlphabet};
use skewdim::dimension::global_dimension;
use skewdim::empirics::{
    box_dimension, dyadic_scales, local_dimension, sample_measure, PointCloud, ScaleWindow, Target,
};
use skewdim::smale::{SimilaritySchedule, SmaleSystem};
use skewdim::thermodynamics::{
    gibbs_markov, measure_stats, GibbsApprox, MeasureStats, Potential, StatsOptions,
};

const CONTRACTION: f64 = 0.5;
const RATIO: f64 = 0.25;
const RADIUS: f64 = 0.6;

fn moran_system() -> (Arc<SmaleSystem>, GibbsApprox) {
    let system = Arc::new(
        SmaleSystem::similarity(
            CONTRACTION,
            SimilaritySchedule::ring(4, RATIO, RADIUS).unwrap(),
        )
        .unwrap(),
    );
    let alphabet = TruncatedAlphabet::new(2).unwrap();
    let g = gibbs_markov(
        &Potential::geometric(system.clone(), 0.0).unwrap(),
        &alphabet,
        0,
    )
    .unwrap();
    (system, g)
}

fn constant_word(len: usize) -> PairWord {
    PairWord::repeat(PairSymbol::new(1, 1).unwrap(), len)
}

/// Within `eps` of the attractor of `y -> r y + z_i`: peel off maps by
/// inverting whichever image disk holds the point.
fn near_moran_set(w: Complex64, centres: &[Complex64], r: f64, eps: f64, levels: usize) -> bool {
    let (mut w, mut eps) = (w, eps);
    for _ in 0..levels {
        match centres.iter().find(|c| (w - **c).norm() <= r + eps) {
            Some(c) => {
                w = (w - c) / r;
                eps /= r;
            }
            None => return false,
        }
        if eps >= 1.0 {
            return true;
        }
    }
    w.norm() <= 1.0 + eps
}

#[test]
fn clouds_are_reproducible_from_seeds() {
    let (system, g) = moran_system();
    let a = sample_measure(&g, &system, &Target::Global, 3000, 20, 9).unwrap();
    let b = sample_measure(&g, &system, &Target::Global, 3000, 20, 9).unwrap();
    let c = sample_measure(&g, &system, &Target::Global, 3000, 20, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.points, c.points);
    let window = ScaleWindow::new(0.05, 0.4, 5).unwrap();
    let ea = local_dimension(&a, &window, 200, 1).unwrap();
    let eb = local_dimension(&b, &window, 200, 1).unwrap();
    assert_eq!(ea, eb);
}

#[test]
fn fiber_cloud_lies_on_the_moran_set() {
    let (system, g) = moran_system();
    let r = RATIO * CONTRACTION;
    let centres: Vec<Complex64> = (0..4)
        .map(|i| Complex64::from_polar(RADIUS, std::f64::consts::TAU * i as f64 / 4.0))
        .collect();
    for target in [Target::Fiber(constant_word(24)), Target::Global] {
        let cloud = sample_measure(&g, &system, &target, 2000, 20, 3).unwrap();
        let offset = cloud.dim - 2;
        let eps = r.powi(20) * 2.0 + 1e-12;
        for p in cloud.iter() {
            let w = Complex64::new(p[offset], p[offset + 1]);
            assert!(
                near_moran_set(w, &centres, r, eps, 20),
                "{w} is off the attractor"
            );
        }
    }
}

#[test]
fn moran_fiber_dimension() {
    let (system, g) = moran_system();
    let expected = 4f64.ln() / -(RATIO * CONTRACTION).ln();
    let cloud = sample_measure(
        &g,
        &system,
        &Target::Fiber(constant_word(24)),
        50_000,
        20,
        4,
    )
    .unwrap();
    let r = RATIO * CONTRACTION;
    let window = ScaleWindow::new(0.3 * r.powi(3), 0.3, 19).unwrap();
    let est = local_dimension(&cloud, &window, 1000, 5).unwrap();
    assert!(
        (est.mean - expected).abs() <= 0.05,
        "{} vs {expected}",
        est.mean
    );
    let boxes = box_dimension(&cloud, &dyadic_scales(2, 6)).unwrap();
    assert!(
        (boxes.value - expected).abs() <= 0.1,
        "{} vs {expected}",
        boxes.value
    );
}

#[test]
fn shifting_the_window_barely_moves_the_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let square: Vec<f64> = (0..80_000).map(|_| rng.gen::<f64>()).collect();
    let square = PointCloud::synthetic(2, square).unwrap();
    let window = ScaleWindow::ladder(0.01).unwrap();
    let base = local_dimension(&square, &window, 800, 1).unwrap().mean;
    // Centres near the edges see truncated balls, which pulls the slope below 2.
    assert!((base - 2.0).abs() <= 0.15, "{base}");
    for steps in [-1, 1] {
        let moved = local_dimension(&square, &window.shifted(steps), 800, 1)
            .unwrap()
            .mean;
        assert!((moved - base).abs() <= 0.05);
    }

    let (system, g) = moran_system();
    let cloud = sample_measure(
        &g,
        &system,
        &Target::Fiber(constant_word(24)),
        50_000,
        20,
        6,
    )
    .unwrap();
    let r = RATIO * CONTRACTION;
    let window = ScaleWindow::new(0.3 * r.powi(3), 0.3, 19).unwrap();
    let base = local_dimension(&cloud, &window, 800, 2).unwrap().mean;
    for steps in [-1, 1] {
        let moved = local_dimension(&cloud, &window.shifted(steps), 800, 2)
            .unwrap()
            .mean;
        assert!((moved - base).abs() <= 0.05, "{moved} vs {base}");
    }
}

#[test]
fn global_dimension_is_additive_on_samples() {
    let system = Arc::new(SmaleSystem::similarity(0.5, SimilaritySchedule::Geometric).unwrap());
    let alphabet = TruncatedAlphabet::new(2).unwrap();
    let g = gibbs_markov(
        &Potential::geometric(system.clone(), 1.0).unwrap(),
        &alphabet,
        0,
    )
    .unwrap();
    let window = ScaleWindow::new(0.002, 0.04, 12).unwrap();
    let global = sample_measure(&g, &system, &Target::Global, 100_000, 30, 21).unwrap();
    let z = global.project(&[0, 1]).unwrap();
    let fiber = sample_measure(
        &g,
        &system,
        &Target::Fiber(constant_word(30)),
        100_000,
        30,
        22,
    )
    .unwrap();
    let dg = local_dimension(&global, &window, 1000, 1).unwrap().mean;
    let dz = local_dimension(&z, &window, 1000, 2).unwrap().mean;
    let df = local_dimension(&fiber, &window, 1000, 3).unwrap().mean;
    assert!((dg - (dz + df)).abs() <= 0.15, "{dg} vs {dz} + {df}");

    let stats = measure_stats(
        &g,
        &system,
        &StatsOptions {
            n_samples: 8000,
            seed: 4,
            ..StatsOptions::default()
        },
    )
    .unwrap();
    let chi = 0.5 * (stats.chi1 + stats.chi2);
    let formula = global_dimension(&MeasureStats::new(
        stats.h_mu,
        stats.h_mu1,
        stats.h_mu2,
        chi,
        chi,
        stats.chi_t,
    ))
    .unwrap();
    assert!(
        (df - formula.fiber_part).abs() <= 0.1,
        "{df} vs {}",
        formula.fiber_part
    );
}
