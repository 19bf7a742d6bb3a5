use std::collections::HashSet;

use mtspec::AcquisitionDomain;
use proptest::prelude::*;

fn box_points(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for (a, b) in lo.iter().zip(hi) {
        out = out.into_iter().flat_map(|p| (*a..=*b).map(move |c| [p.clone(), vec![c]].concat())).collect();
    }
    out
}

/// Indicator transitions along every axis, counted over the bounding box
/// grown by one.
fn perimeter_oracle(d: &AcquisitionDomain) -> u64 {
    let set: HashSet<Vec<i64>> = d.points().iter().map(|p| p.coords().to_vec()).collect();
    let (lo, hi) = d.bounding_box();
    let lo: Vec<i64> = lo.iter().map(|v| v - 1).collect();
    let hi: Vec<i64> = hi.iter().map(|v| v + 1).collect();
    let mut count = 0;
    for p in box_points(&lo, &hi) {
        for j in 0..d.dim() {
            let mut q = p.clone();
            q[j] += 1;
            if set.contains(&p) != set.contains(&q) {
                count += 1;
            }
        }
    }
    count
}

fn diameter_oracle(d: &AcquisitionDomain) -> f64 {
    let mut best = 0i64;
    for a in d.points() {
        for b in d.points() {
            best = best.max(a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum());
        }
    }
    (best as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn blob_perimeter_and_diameter(dim in 1usize..=3, steps in 0usize..400, seed in any::<u64>()) {
        let d = AcquisitionDomain::random_blob(dim, steps, seed).unwrap();
        prop_assume!(d.cardinality() <= 500);
        prop_assert_eq!(d.perimeter(), perimeter_oracle(&d));
        prop_assert_eq!(d.diameter(), diameter_oracle(&d));
    }

    #[test]
    fn difference_set_symmetric_and_bounded(dim in 1usize..=3, steps in 0usize..120, seed in any::<u64>()) {
        let d = AcquisitionDomain::random_blob(dim, steps, seed).unwrap();
        let diff = d.difference_set();
        let set: HashSet<Vec<i64>> = diff.iter().map(|p| p.coords().to_vec()).collect();
        for p in &diff {
            let neg: Vec<i64> = p.coords().iter().map(|c| -c).collect();
            prop_assert!(set.contains(&neg));
        }
        let n = d.cardinality();
        let box_bound = (2.0 * d.diameter() + 1.0).powi(dim as i32);
        prop_assert!(diff.len() <= n * n);
        prop_assert!(diff.len() as f64 <= box_bound + 1e-9);
    }

    #[test]
    fn rectangle_perimeter(sides in prop::collection::vec(1usize..9, 1..=3)) {
        let d = AcquisitionDomain::rectangle(&sides).unwrap();
        let expected: usize = (0..sides.len())
            .map(|j| sides.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, a)| *a).product::<usize>())
            .sum::<usize>() * 2;
        prop_assert_eq!(d.perimeter(), expected as u64);
        prop_assert!(d.is_box());
    }

    #[test]
    fn blobs_are_deterministic(dim in 1usize..=3, steps in 0usize..200, seed in any::<u64>()) {
        prop_assert_eq!(
            AcquisitionDomain::random_blob(dim, steps, seed).unwrap(),
            AcquisitionDomain::random_blob(dim, steps, seed).unwrap()
        );
    }

    #[test]
    fn text_round_trip(dim in 1usize..=3, steps in 0usize..100, seed in any::<u64>()) {
        let d = AcquisitionDomain::random_blob(dim, steps, seed).unwrap();
        prop_assert_eq!(AcquisitionDomain::parse(&d.to_text()).unwrap(), d);
    }
}

#[test]
fn disk_points_within_radius() {
    let d = AcquisitionDomain::disk(5.5, 2).unwrap();
    let expected = box_points(&[-6, -6], &[6, 6]).iter().filter(|p| p.iter().map(|c| c * c).sum::<i64>() as f64 <= 5.5 * 5.5).count();
    assert_eq!(d.cardinality(), expected);
}
