use mtspec::bench::{run_mse_experiment, risk_report, write_risk_csv, Experiment, RiskReport, RunMetadata};
use mtspec::density::{ConstantDensity, CosineDensity};
use mtspec::AcquisitionDomain;

#[test]
fn mean_estimate_tracks_exact_expectation() {
    let s = CosineDensity { dim: 1, level: 0.5, amplitude: 0.02 };
    let d = AcquisitionDomain::interval(64).unwrap();
    let exp = Experiment::new(&s, &d, 5, 4).unwrap();
    let replicates = 400;
    let r = risk_report(&exp, 4, replicates, 17).unwrap();
    let exact = exp.expected_grid().unwrap();
    let i = r.argmax;
    let se = r.moments.standard_error(i, replicates);
    assert!((r.moments.mean[i] - exact[i]).abs() <= 5.0 * se, "mean {} exact {} se {se}", r.moments.mean[i], exact[i]);
    // and everywhere on the grid, allowing for the number of grid points
    let worst = (0..exact.len())
        .map(|j| (r.moments.mean[j] - exact[j]).abs() / r.moments.standard_error(j, replicates))
        .fold(0.0f64, f64::max);
    assert!(worst <= 5.0, "worst standardized deviation {worst}");
    let n = replicates as f64;
    let identity = r.bias_at_argmax.powi(2) + r.variance_at_argmax * (n - 1.0) / n;
    assert!((r.pointwise_mse_max - identity).abs() <= 1e-12);
}

#[test]
fn variance_falls_with_taper_count() {
    let s = ConstantDensity { dim: 1, level: 0.5 };
    let d = AcquisitionDomain::interval(1024).unwrap();
    let reports: Vec<RiskReport> = [4usize, 8, 16, 32].iter().map(|&k| run_mse_experiment(&s, &d, k, 4, 100, 23).unwrap()).collect();
    for pair in reports.windows(2) {
        assert!(pair[1].variance_max < pair[0].variance_max, "K={} {} vs K={} {}", pair[0].k, pair[0].variance_max, pair[1].k, pair[1].variance_max);
        assert!(pair[1].mse < pair[0].mse);
    }
    // white noise: Var Ŝ(ξ) is c²/K away from 0 and 1/2, and 2c²/K there
    for r in &reports {
        let scaled = r.variance_max * r.k as f64 / 0.25;
        assert!((1.0..=4.0).contains(&scaled), "K={} scaled variance {scaled}", r.k);
        assert!(r.exact_bias_sup < 1e-12);
    }
}

#[test]
fn reproducible_for_a_seed() {
    let s = CosineDensity { dim: 2, level: 0.5, amplitude: 0.01 };
    let d = AcquisitionDomain::random_blob(2, 60, 3).unwrap();
    let a = run_mse_experiment(&s, &d, 4, 4, 12, 5).unwrap();
    let b = run_mse_experiment(&s, &d, 4, 4, 12, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.errors, run_mse_experiment(&s, &d, 4, 4, 12, 6).unwrap().errors);
}

#[test]
fn report_csv_and_sidecar() {
    let s = ConstantDensity { dim: 1, level: 0.5 };
    let d = AcquisitionDomain::interval(32).unwrap();
    let r = run_mse_experiment(&s, &d, 4, 4, 10, 1).unwrap();
    let path = std::env::temp_dir().join(format!("mtspec-bench-{}.csv", std::process::id()));
    let meta = RunMetadata::new("test", 1, 10, 4);
    write_risk_csv(&path, &[r.clone(), r], &["note".to_string()], &meta).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], RiskReport::CSV_HEADER);
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[3], "# note");
    let columns = RiskReport::CSV_HEADER.split(',').count();
    assert_eq!(lines[1].split(',').count(), columns);
    let side_path = path.with_extension("csv.json");
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&side_path).unwrap()).unwrap();
    assert_eq!(side["seed"], 1);
    assert_eq!(side["replicates"], 10);
    std::fs::remove_file(path).unwrap();
    std::fs::remove_file(side_path).unwrap();
}
