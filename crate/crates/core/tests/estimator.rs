use mtspec::density::ConstantDensity;
use mtspec::estimator::{
    estimate_at, lag_coefficients_direct, multitaper_estimate, quadratic_form_matrix, quadratic_form_norms, FrequencyGrid, MtPlan,
    ProcessSample,
};
use mtspec::process::autocovariance;
use mtspec::slepian::compute_tapers;
use mtspec::{AcquisitionDomain, TaperConfig, TaperSet};
use nalgebra::{Complex, DVector};
use proptest::prelude::*;

fn small_domain() -> impl Strategy<Value = AcquisitionDomain> {
    prop_oneof![
        (2usize..40).prop_map(|n| AcquisitionDomain::interval(n).unwrap()),
        (prop::collection::vec(2usize..6, 2)).prop_map(|s| AcquisitionDomain::rectangle(&s).unwrap()),
        (1usize..=2, 3usize..40, any::<u64>()).prop_map(|(d, s, seed)| AcquisitionDomain::random_blob(d, s, seed).unwrap()),
    ]
}

/// Domain, tapers, sample values and a frequency.
fn instance() -> impl Strategy<Value = (TaperSet, Vec<f64>, Vec<f64>)> {
    (small_domain(), 0.1f64..0.8, any::<u64>()).prop_flat_map(|(d, w, _)| {
        let n = d.cardinality();
        let dim = d.dim();
        let k_max = n;
        (Just(d), Just(w), 1usize..=k_max, prop::collection::vec(-3.0f64..3.0, n), prop::collection::vec(0.0f64..1.0, dim)).prop_map(
            |(d, w, k, x, xi)| {
                let t = compute_tapers(&d, TaperConfig::new(w, k).unwrap()).unwrap();
                (t, x, xi)
            },
        )
    })
}

fn grid_for(d: &AcquisitionDomain, oversample: usize) -> FrequencyGrid {
    FrequencyGrid::for_domain(d, oversample).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn quadratic_form_identity((t, x, xi) in instance()) {
        let sample = ProcessSample::new(t.domain().clone(), x.clone()).unwrap();
        let v = quadratic_form_matrix(&t, &xi);
        let xc = DVector::from_iterator(x.len(), x.iter().map(|&a| Complex::new(a, 0.0)));
        let form = (xc.adjoint() * &v * &xc)[(0, 0)];
        let brute = estimate_at(&sample, &t, &xi);
        prop_assert!(form.im.abs() <= 1e-10 * (1.0 + brute));
        prop_assert!((form.re - brute).abs() <= 1e-10 * (1.0 + brute), "{} vs {brute}", form.re);
        let est = multitaper_estimate(&sample, &t, grid_for(t.domain(), 4)).unwrap();
        prop_assert!((est.value_at(&xi) - brute).abs() <= 1e-9 * (1.0 + brute));
    }

    #[test]
    fn hilbert_schmidt_and_operator_norms((t, _x, xi) in instance()) {
        let k = t.count() as f64;
        let norms = quadratic_form_norms(&t);
        prop_assert!((norms.frobenius - k.sqrt().recip()).abs() <= 1e-10);
        prop_assert!((norms.spectral - k.recip()).abs() <= 1e-10);
        prop_assert!(norms.min_eigenvalue >= -1e-10);
        // the same norms hold for V_K(ξ) itself
        let v = quadratic_form_matrix(&t, &xi);
        prop_assert!((v.norm() - k.sqrt().recip()).abs() <= 1e-10);
        prop_assert!((&v - v.adjoint()).iter().all(|z| z.norm() <= 1e-14));
    }

    #[test]
    fn fft_lag_route_matches_double_sum((t, x, _xi) in instance()) {
        let sample = ProcessSample::new(t.domain().clone(), x).unwrap();
        let direct = lag_coefficients_direct(&sample, &t).unwrap();
        let est = multitaper_estimate(&sample, &t, grid_for(t.domain(), 4)).unwrap();
        let fast = est.lag_coefficients();
        prop_assert_eq!(fast.max_lag(), direct.max_lag());
        for (l, c) in direct.iter() {
            prop_assert!((fast.get(&l) - c).abs() <= 1e-10, "lag {:?}: {} vs {c}", l, fast.get(&l));
        }
    }

    #[test]
    fn grid_matches_brute_force((t, x, _xi) in instance()) {
        let sample = ProcessSample::new(t.domain().clone(), x).unwrap();
        let grid = grid_for(t.domain(), 4);
        let est = multitaper_estimate(&sample, &t, grid).unwrap();
        for i in (0..grid.len()).step_by(1 + grid.len() / 40) {
            let brute = estimate_at(&sample, &t, &grid.point(i));
            prop_assert!((est.grid_values()[i] - brute).abs() <= 1e-8 * (1.0 + brute));
        }
    }

    #[test]
    fn white_noise_is_unbiased((t, _x, _xi) in instance(), c in 0.1f64..3.0) {
        let d = t.domain();
        let s = ConstantDensity { dim: d.dim(), level: c };
        let max_lag = d.extent().into_iter().max().unwrap() - 1;
        let acov = autocovariance(&s, max_lag).unwrap();
        let plan = MtPlan::new(&t, grid_for(d, 4)).unwrap();
        for v in plan.expected_grid(&acov) {
            prop_assert!((v - c).abs() <= 1e-12 * (1.0 + c), "{v} vs {c}");
        }
    }

    #[test]
    fn translation_invariant((t, x, _xi) in instance(), shift in prop::collection::vec(-30i64..30, 2)) {
        let d = t.domain();
        let moved = d.translate(&shift[..d.dim()]).unwrap();
        let t2 = t.translated(&shift[..d.dim()]).unwrap();
        let a = multitaper_estimate(&ProcessSample::new(d.clone(), x.clone()).unwrap(), &t, grid_for(d, 4)).unwrap();
        let b = multitaper_estimate(&ProcessSample::new(moved.clone(), x).unwrap(), &t2, grid_for(&moved, 4)).unwrap();
        for (p, q) in a.grid_values().iter().zip(b.grid_values()) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
        }
    }

    /// The grid maximum on `4ω` points controls the supremum, estimated on a
    /// grid sixteen times finer, up to a small constant.
    #[test]
    fn coarse_grid_controls_supremum((t, x, _xi) in instance()) {
        let d = t.domain();
        let omega = d.degree().max(1);
        let sample = ProcessSample::new(d.clone(), x).unwrap();
        let est = multitaper_estimate(&sample, &t, FrequencyGrid::new(d.dim(), 4 * omega).unwrap()).unwrap();
        let coarse = est.grid_values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let fine = est.evaluate_grid(FrequencyGrid::new(d.dim(), 64 * omega).unwrap()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assume!(fine > 1e-12);
        prop_assert!(fine <= 10.0 * coarse, "fine {fine} coarse {coarse}");
        prop_assert!(fine + 1e-12 >= coarse);
    }
}

#[test]
fn mismatched_domains_rejected() {
    let d = AcquisitionDomain::interval(8).unwrap();
    let t = compute_tapers(&d, TaperConfig::new(0.3, 2).unwrap()).unwrap();
    let other = ProcessSample::new(AcquisitionDomain::interval(9).unwrap(), vec![0.0; 9]).unwrap();
    assert!(multitaper_estimate(&other, &t, grid_for(&d, 4)).is_err());
    assert!(lag_coefficients_direct(&other, &t).is_err());
    assert!(ProcessSample::new(d, vec![0.0; 7]).is_err());
}
