use proptest::prelude::*;
use skewdim::coding::{PairWord, TruncatedAlphabet};
use skewdim::dimension::{
    bowen_dimension, fiber_measure_dimension, fiber_measure_dimension_mc, global_dimension,
    summability_scan, Branch, Verdict,
};
use skewdim::smale::{SimilaritySchedule, SmaleSystem};
use skewdim::thermodynamics::MeasureStats;

proptest! {
    #[test]
    fn branch_b_exactly_when_first_exponent_larger(
        h in 0.1f64..3.0, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0,
        chi1 in 0.05f64..5.0, chi2 in 0.05f64..5.0, chi_t in 0.05f64..5.0,
    ) {
        let stats = MeasureStats::new(h, f1 * h, f2 * h, chi1, chi2, chi_t);
        let g = global_dimension(&stats).unwrap();
        prop_assert_eq!(g.branch == Branch::B, chi1 > chi2);
        prop_assert!((g.value - (g.z_part + g.fiber_part)).abs() < 1e-12);
        prop_assert!((g.fiber_part - h / chi_t).abs() < 1e-12);
    }

    #[test]
    fn symmetric_exponents_make_branches_agree(h in 0.1f64..3.0, f1 in 0.0f64..1.0, chi in 0.05f64..5.0, chi_t in 0.05f64..5.0) {
        let g = global_dimension(&MeasureStats::new(h, f1 * h, 0.3 * h, chi, chi, chi_t)).unwrap();
        prop_assert!((g.branch_b_value - g.branch_c_value).abs() <= 1e-9);
        prop_assert!((g.value - (h / chi + h / chi_t)).abs() <= 1e-9);
    }
}

#[test]
fn bowen_root_nondecreasing_in_truncation() {
    let ic = SmaleSystem::inverse_conjugate();
    let roots: Vec<f64> = (2..=4)
        .map(|m| {
            bowen_dimension(&ic, &TruncatedAlphabet::new(m).unwrap(), 2, 1e-6)
                .unwrap()
                .root
        })
        .collect();
    assert!(roots.windows(2).all(|w| w[0] <= w[1]), "{roots:?}");
}

#[test]
fn fiber_dimension_bounded_by_bowen_root() {
    let ic = SmaleSystem::inverse_conjugate();
    for m in 2..=4 {
        let alphabet = TruncatedAlphabet::new(m).unwrap();
        let root = bowen_dimension(&ic, &alphabet, 1, 1e-8).unwrap();
        for i in 0..12 {
            let s = 0.25 * i as f64;
            let d = fiber_measure_dimension(&ic, s, &alphabet, 1).unwrap();
            assert!(d.value >= 0.0 && d.value <= root.root + 1e-2, "M={m} s={s}");
        }
        let at_root = fiber_measure_dimension(&ic, root.root, &alphabet, 1).unwrap();
        assert!((at_root.value - root.root).abs() <= 1e-3);
    }
}

#[test]
fn fiber_dimension_does_not_depend_on_the_fiber() {
    let ic = SmaleSystem::inverse_conjugate();
    let alphabet = TruncatedAlphabet::new(3).unwrap();
    let s = 0.85;
    let exact = fiber_measure_dimension(&ic, s, &alphabet, 2).unwrap();
    let symbols = alphabet.symbols();
    for (i, seed) in [3u64, 5, 7, 11, 13].into_iter().enumerate() {
        let forward: PairWord = (0..24)
            .map(|j| symbols[(i * 7 + j * (i + 2)) % symbols.len()])
            .collect();
        let d = fiber_measure_dimension_mc(&ic, s, &alphabet, 2, Some(&forward), 1500, 20, seed)
            .unwrap();
        assert!(
            (d.value - exact.value).abs() <= 2.0 * d.std_error + 1e-3,
            "{forward}: {d:?} vs {exact:?}"
        );
    }
}

#[test]
fn summability_of_examples() {
    let ic = SmaleSystem::inverse_conjugate();
    let grid = [0.0, 0.5, 1.0, 1.5, 2.0];
    let report = summability_scan(&ic, &grid, &[4, 8, 16, 32]).unwrap();
    assert_eq!(
        report.verdicts,
        vec![
            Verdict::Divergent,
            Verdict::Divergent,
            Verdict::Inconclusive,
            Verdict::Summable,
            Verdict::Summable
        ]
    );
    // Partial sums grow with M.
    for row in &report.depth1_sums {
        assert!(row.windows(2).all(|w| w[0] <= w[1]));
    }
    let square = SmaleSystem::inverse_square();
    assert_eq!(
        summability_scan(&square, &[2.0], &[3]).unwrap().verdicts,
        vec![Verdict::Summable]
    );
    let two = SmaleSystem::similarity(0.5, SimilaritySchedule::ring(2, 0.2, 0.5).unwrap()).unwrap();
    let report = summability_scan(&two, &[0.0, 1.0], &[2]).unwrap();
    assert_eq!(report.verdicts, vec![Verdict::Summable, Verdict::Summable]);
    assert_eq!(report.critical_exponent, None);
}
