use mtspec::density::{parse_density, CosineDensity};
use mtspec::process::{autocovariance, replicate_rng, CirculantModel, DomainSampler};
use mtspec::{AcquisitionDomain, SpectralDensity};
use nalgebra::{Complex, DVector};
use proptest::prelude::*;
use rand::Rng;

fn cosine() -> impl Strategy<Value = CosineDensity> {
    (1usize..=3, 0.5f64..2.0, -0.1f64..0.1).prop_map(|(dim, level, amplitude)| CosineDensity { dim, level, amplitude })
}

fn in_window(p: &[i64], omega: i64) -> bool {
    p.iter().all(|&c| (0..=omega).contains(&c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bandlimited_round_trip(s in cosine(), p in 1usize..5, xi in prop::collection::vec(0.0f64..1.0, 3)) {
        let acov = autocovariance(&s, p).unwrap();
        let xi = &xi[..s.dim];
        let back = acov.partial_fourier_sum(p, xi).unwrap();
        prop_assert!((back - s.value(xi)).abs() <= 1e-8, "{back} vs {}", s.value(xi));
        for (l, v) in acov.iter() {
            let expected = match l.iter().map(|c| c.abs()).sum::<i64>() {
                0 => s.level,
                1 => s.amplitude / 2.0,
                _ => 0.0,
            };
            prop_assert!((v - expected).abs() <= 1e-12, "lag {:?}: {v} vs {expected}", l);
        }
    }

    #[test]
    fn restriction_is_toeplitz(dim in 1usize..=2, omega in 1usize..6, member in 0usize..4) {
        let s = parse_density(&format!("fano({dim},4,0.004,{member})"), dim).unwrap();
        let model = CirculantModel::build(s.as_ref(), omega).unwrap();
        let acov = autocovariance(s.as_ref(), omega).unwrap();
        let cov = model.covariance_matrix();
        let pts = model.window_points();
        for (a, p) in pts.iter().enumerate() {
            for (b, q) in pts.iter().enumerate() {
                if in_window(p, omega as i64) && in_window(q, omega as i64) {
                    let lag: Vec<i64> = p.iter().zip(q).map(|(x, y)| x - y).collect();
                    prop_assert!((cov[(a, b)] - acov.get(&lag)).abs() <= 1e-12);
                }
            }
        }
    }

    /// `U Σ y = Λ U y`: the transform diagonalizes the circulant covariance
    /// and the eigenvalues are the partial Fourier sums at `k/(2ω+1)`.
    #[test]
    fn transform_diagonalizes_covariance(s in cosine(), omega in 1usize..4, seed in any::<u64>()) {
        prop_assume!(s.dim <= 2);
        let model = CirculantModel::build(&s, omega).unwrap();
        let cov = model.covariance_matrix();
        let n = model.window_len();
        let mut rng = replicate_rng(seed, 0);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sy = &cov * DVector::from_vec(y.clone());
        let lhs = model.unitary_transform(sy.as_slice());
        let rhs = model.unitary_transform(&y);
        let side = model.side() as f64;
        for ((l, r), (k, lambda)) in lhs.iter().zip(&rhs).zip(model.window_points().iter().zip(model.eigenvalues())) {
            prop_assert!((l - r * lambda).norm() <= 1e-10);
            let xi: Vec<f64> = k.iter().map(|&c| c as f64 / side).collect();
            let fourier = model.autocovariance().partial_fourier_sum(omega, &xi).unwrap();
            prop_assert!((fourier - lambda).abs() <= 1e-10);
        }
        // unitary: norms are preserved
        let norm_y: f64 = y.iter().map(|v| v * v).sum();
        let norm_z: f64 = rhs.iter().map(Complex::norm_sqr).sum();
        prop_assert!((norm_y - norm_z).abs() <= 1e-10 * norm_y);
    }

    #[test]
    fn draws_are_reproducible(seed in any::<u64>(), r in 0u64..1000, steps in 3usize..60, blob_seed in any::<u64>()) {
        let d = AcquisitionDomain::random_blob(2, steps, blob_seed).unwrap();
        let s = CosineDensity { dim: 2, level: 0.5, amplitude: 0.1 };
        let sampler = DomainSampler::new(&s, &d).unwrap();
        let a = sampler.sample(&mut replicate_rng(seed, r)).unwrap();
        let b = sampler.sample(&mut replicate_rng(seed, r)).unwrap();
        let c = sampler.sample(&mut replicate_rng(seed, r + 1)).unwrap();
        prop_assert_eq!(a.len(), d.cardinality());
        prop_assert!(a.iter().all(|v| v.is_finite()));
        prop_assert_eq!(&a, &b);
        prop_assert_ne!(&a, &c);
    }
}

#[test]
fn negative_spectrum_is_rejected() {
    let s = CosineDensity { dim: 1, level: 0.1, amplitude: 0.5 };
    assert!(CirculantModel::build(&s, 4).is_err());
    let d = AcquisitionDomain::interval(10).unwrap();
    assert!(DomainSampler::new(&s, &d).is_err());
}
