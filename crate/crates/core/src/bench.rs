//! Monte Carlo risk experiments: sup-norm MSE with its bias/variance split,
//! rate-slope fits and Hanson–Wright tail checks.
//!
//! Replicate `r` of a run seeded with `s` draws from
//! [`replicate_rng`]`(s, r)`. Replicates are processed in fixed chunks whose
//! partial sums are combined in chunk order, so reports are bit-identical
//! for any thread count.

use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::density::{self, SpectralDensity};
use crate::domain::AcquisitionDomain;
use crate::error::{Error, Result};
use crate::estimator::{bias_bound, corollary_taper_count, mse_bound, FrequencyGrid, MtPlan};
use crate::process::{replicate_rng, DomainSampler};
use crate::slepian::{compute_tapers, TaperConfig, TaperSet};

const CHUNK: usize = 8;

/// Everything needed to simulate and estimate on one domain.
pub struct Experiment<'a> {
    pub density: &'a dyn SpectralDensity,
    pub domain: &'a AcquisitionDomain,
    pub tapers: TaperSet,
    pub grid: FrequencyGrid,
    sampler: DomainSampler,
}

impl<'a> Experiment<'a> {
    /// Tapers with `W = (K/N)^{1/d}`; grid of `oversample·ω` points per axis.
    pub fn new(density: &'a dyn SpectralDensity, domain: &'a AcquisitionDomain, k: usize, oversample: usize) -> Result<Self> {
        if domain.cardinality() < k || k == 0 {
            return Err(Error::InvalidTaperCount { k, max: domain.cardinality() });
        }
        let tapers = compute_tapers(domain, TaperConfig::from_taper_count(domain, k)?)?;
        Self::with_tapers(density, domain, tapers, oversample)
    }

    pub fn with_tapers(
        density: &'a dyn SpectralDensity,
        domain: &'a AcquisitionDomain,
        tapers: TaperSet,
        oversample: usize,
    ) -> Result<Self> {
        if tapers.domain() != domain {
            return Err(Error::DomainMismatch);
        }
        let grid = FrequencyGrid::for_domain(domain, oversample)?;
        let sampler = DomainSampler::new(density, domain)?;
        Ok(Experiment { density, domain, tapers, grid, sampler })
    }

    pub fn sampler(&self) -> &DomainSampler {
        &self.sampler
    }

    /// Runs `step` for every replicate, `CHUNK` replicates per task, and
    /// returns the per-chunk accumulators in chunk order.
    fn run<A, F>(&self, replicates: usize, seed: u64, init: impl Fn() -> A + Sync, step: F) -> Result<Vec<A>>
    where
        A: Send,
        F: Fn(&mut A, &MtPlan, &[f64]) + Sync,
    {
        let plan = MtPlan::new(&self.tapers, self.grid)?;
        let chunks = replicates.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                for r in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                    let mut rng: ChaCha8Rng = replicate_rng(seed, r as u64);
                    let x = self.sampler.sample(&mut rng)?;
                    let est = plan.grid_values(&plan.lag_coefficients(&x));
                    step(&mut acc, &plan, &est);
                }
                Ok(acc)
            })
            .collect()
    }

    /// `E Ŝ` on the grid.
    pub fn expected_grid(&self) -> Result<Vec<f64>> {
        let plan = MtPlan::new(&self.tapers, self.grid)?;
        Ok(plan.expected_grid(self.sampler.model().autocovariance()))
    }
}

/// Per-grid-point Monte Carlo moments of `Ŝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMoments {
    pub mean: Vec<f64>,
    /// Unbiased sample variance.
    pub variance: Vec<f64>,
}

impl GridMoments {
    /// Standard error of the mean at grid point `i`.
    pub fn standard_error(&self, i: usize, replicates: usize) -> f64 {
        (self.variance[i] / replicates as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub domain: String,
    pub cardinality: usize,
    pub diameter: f64,
    pub density: String,
    pub k: usize,
    pub bandwidth: f64,
    pub replicates: usize,
    pub oversample: usize,
    pub seed: u64,
    /// Mean over replicates of `max_grid |Ŝ − S|²`.
    pub mse: f64,
    pub mse_se: f64,
    /// `max_grid |mean Ŝ − S|`.
    pub bias_sup: f64,
    /// `max_grid |E Ŝ − S|` from the exact expectation.
    pub exact_bias_sup: f64,
    /// `max_grid` of the per-point sample variance.
    pub variance_max: f64,
    /// Largest per-point mean squared error, at `argmax`.
    pub pointwise_mse_max: f64,
    pub pointwise_mse_se: f64,
    pub argmax: usize,
    pub bias_at_argmax: f64,
    pub variance_at_argmax: f64,
    pub c2_norm: f64,
    pub mse_bound: Option<f64>,
    pub mse_precondition: Option<bool>,
    pub bias_bound: f64,
    #[serde(skip)]
    pub errors: Vec<f64>,
    #[serde(skip)]
    pub moments: GridMoments,
}

impl RiskReport {
    pub const CSV_HEADER: &'static str = "domain,cardinality,diameter,density,k,bandwidth,replicates,oversample,seed,\
mse,mse_se,bias_sup,exact_bias_sup,variance_max,pointwise_mse_max,bias_at_argmax,variance_at_argmax,\
c2_norm,mse_bound,bias_bound";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e}",
            quote(&self.domain),
            self.cardinality,
            self.diameter,
            quote(&self.density),
            self.k,
            self.bandwidth,
            self.replicates,
            self.oversample,
            self.seed,
            self.mse,
            self.mse_se,
            self.bias_sup,
            self.exact_bias_sup,
            self.variance_max,
            self.pointwise_mse_max,
            self.bias_at_argmax,
            self.variance_at_argmax,
            self.c2_norm,
            self.mse_bound.map_or(String::from("NA"), |v| format!("{v:e}")),
            self.bias_bound,
        )
    }
}

fn quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A short text description of a domain for reports.
pub fn describe_domain(domain: &AcquisitionDomain) -> String {
    let ext = domain.extent();
    if domain.is_box() {
        let sides: Vec<String> = ext.iter().map(usize::to_string).collect();
        format!("box({})", sides.join("x"))
    } else {
        format!("points({},d={})", domain.cardinality(), domain.dim())
    }
}

fn c2_resolution(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 256,
        _ => 48,
    }
}

/// Empirical sup-norm risk of the multitaper estimator with `K` tapers.
pub fn run_mse_experiment(
    density: &dyn SpectralDensity,
    domain: &AcquisitionDomain,
    k: usize,
    oversample: usize,
    replicates: usize,
    seed: u64,
) -> Result<RiskReport> {
    let exp = Experiment::new(density, domain, k, oversample)?;
    risk_report(&exp, oversample, replicates, seed)
}

pub fn risk_report(exp: &Experiment, oversample: usize, replicates: usize, seed: u64) -> Result<RiskReport> {
    if replicates < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 replicates, got {replicates}")));
    }
    let c2 = density::c2_norm(exp.density, c2_resolution(exp.domain.dim()));
    if c2 > 1.0 {
        log::warn!("density {} has C2 norm {c2:.3} > 1", exp.density.name());
    }
    let truth = exp.grid.sample_density(exp.density);
    let g = truth.len();
    struct Acc {
        sum: Vec<f64>,
        sum_sq_dev: Vec<f64>,
        errors: Vec<f64>,
    }
    let chunks = exp.run(
        replicates,
        seed,
        || Acc { sum: vec![0.0; g], sum_sq_dev: vec![0.0; g], errors: Vec::new() },
        |acc, _, est| {
            let mut worst = 0.0f64;
            for i in 0..g {
                let dev = est[i] - truth[i];
                acc.sum[i] += dev;
                acc.sum_sq_dev[i] += dev * dev;
                worst = worst.max(dev.abs());
            }
            acc.errors.push(worst * worst);
        },
    )?;
    let mut sum = vec![0.0; g];
    let mut sum_sq = vec![0.0; g];
    let mut errors = Vec::with_capacity(replicates);
    for c in chunks {
        sum.iter_mut().zip(&c.sum).for_each(|(a, b)| *a += b);
        sum_sq.iter_mut().zip(&c.sum_sq_dev).for_each(|(a, b)| *a += b);
        errors.extend(c.errors);
    }
    let r = replicates as f64;
    let bias: Vec<f64> = sum.iter().map(|s| s / r).collect();
    let variance: Vec<f64> = sum_sq.iter().zip(&bias).map(|(q, b)| ((q / r - b * b) * r / (r - 1.0)).max(0.0)).collect();
    let pointwise: Vec<f64> = sum_sq.iter().map(|q| q / r).collect();
    let argmax = (0..g).fold(0, |best, i| if pointwise[i] > pointwise[best] { i } else { best });
    let (mse, mse_se) = mean_and_se(&errors);
    // SE of the pointwise MSE at argmax needs fourth moments; bound it by
    // the delta method on the sample moments
    let pointwise_mse_se = {
        let b = bias[argmax];
        let v = variance[argmax];
        ((2.0 * v * v + 4.0 * b * b * v) / r).sqrt()
    };
    let expected = exp.expected_grid()?;
    let exact_bias_sup = expected.iter().zip(&truth).fold(0.0f64, |m, (e, t)| m.max((e - t).abs()));
    let k = exp.tapers.count();
    let mb = mse_bound(exp.domain, k).ok();
    Ok(RiskReport {
        domain: describe_domain(exp.domain),
        cardinality: exp.domain.cardinality(),
        diameter: exp.domain.diameter(),
        density: exp.density.name(),
        k,
        bandwidth: exp.tapers.config().bandwidth,
        replicates,
        oversample,
        seed,
        mse,
        mse_se,
        bias_sup: bias.iter().fold(0.0f64, |m, b| m.max(b.abs())),
        exact_bias_sup,
        variance_max: variance.iter().copied().fold(0.0, f64::max),
        pointwise_mse_max: pointwise[argmax],
        pointwise_mse_se,
        argmax,
        bias_at_argmax: bias[argmax],
        variance_at_argmax: variance[argmax],
        c2_norm: c2,
        mse_bound: mb.map(|m| m.value),
        mse_precondition: mb.map(|m| m.precondition_holds),
        bias_bound: bias_bound(exp.domain, k, c2),
        errors,
        moments: GridMoments { mean: bias.iter().zip(&truth).map(|(b, t)| b + t).collect(), variance },
    })
}

fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares fit of `log y = a + b log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% Student-t half-width of the slope.
    pub half_width: f64,
    pub points: usize,
}

pub fn fit_rate_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("slope fit needs at least 3 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidInput(format!("slope fit needs positive values, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("slope fit needs distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0).map_err(|e| Error::InvalidInput(e.to_string()))?.inverse_cdf(0.975);
    Ok(SlopeFit { slope, intercept, half_width: t * se, points: points.len() })
}

/// `log(diam Ω) / N_Ω^{1/d}`, the quantity the upper-bound rates are
/// powers of: exponent `4/5` for `d = 1` and `4/3` for `d ≥ 2`.
pub fn rate_functional(domain: &AcquisitionDomain) -> f64 {
    domain.diameter().ln() / (domain.cardinality() as f64).powf(1.0 / domain.dim() as f64)
}

pub fn rate_exponent(dim: usize) -> f64 {
    if dim == 1 {
        0.8
    } else {
        4.0 / 3.0
    }
}

/// One risk report per domain with the rate-optimal `K` of `corollary_taper_count`, and the slope of
/// log MSE against log [`rate_functional`].
pub fn run_rate_experiment(
    density: &dyn SpectralDensity,
    domains: &[AcquisitionDomain],
    oversample: usize,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<RiskReport>, SlopeFit)> {
    if domains.len() < 3 {
        return Err(Error::InvalidInput(format!("rate experiment needs at least 3 sizes, got {}", domains.len())));
    }
    let mut reports = Vec::with_capacity(domains.len());
    for (i, d) in domains.iter().enumerate() {
        let k = corollary_taper_count(d)?.k;
        log::info!("rate: domain {} (N={}), K={k}", describe_domain(d), d.cardinality());
        reports.push(run_mse_experiment(density, d, k, oversample, replicates, seed.wrapping_add(i as u64))?);
    }
    let fit = fit_reports(domains, &reports)?;
    Ok((reports, fit))
}

/// Rate-experiment rows with `MSE = rate_functional^power` and no
/// simulation, for checking the fitting and reporting path.
pub fn synthetic_rate_reports(domains: &[AcquisitionDomain], power: f64) -> Result<Vec<RiskReport>> {
    domains
        .iter()
        .map(|d| {
            let k = corollary_taper_count(d)?.k;
            let mb = mse_bound(d, k).ok();
            Ok(RiskReport {
                domain: describe_domain(d),
                cardinality: d.cardinality(),
                diameter: d.diameter(),
                density: format!("synthetic({power})"),
                k,
                bandwidth: (k as f64 / d.cardinality() as f64).powf(1.0 / d.dim() as f64),
                replicates: 0,
                oversample: 0,
                seed: 0,
                mse: rate_functional(d).powf(power),
                mse_se: 0.0,
                bias_sup: 0.0,
                exact_bias_sup: 0.0,
                variance_max: 0.0,
                pointwise_mse_max: 0.0,
                pointwise_mse_se: 0.0,
                argmax: 0,
                bias_at_argmax: 0.0,
                variance_at_argmax: 0.0,
                c2_norm: 0.0,
                mse_bound: mb.map(|m| m.value),
                mse_precondition: mb.map(|m| m.precondition_holds),
                bias_bound: 0.0,
                errors: Vec::new(),
                moments: GridMoments { mean: Vec::new(), variance: Vec::new() },
            })
        })
        .collect()
}

/// Slope of log MSE against log [`rate_functional`] for finished reports.
pub fn fit_reports(domains: &[AcquisitionDomain], reports: &[RiskReport]) -> Result<SlopeFit> {
    let points: Vec<(f64, f64)> = domains.iter().zip(reports).map(|(d, r)| (rate_functional(d), r.mse)).collect();
    fit_rate_slope(&points)
}

/// Empirical tail of `max_ℓ |Z_K^ℓ|` against
/// `2ω^d exp[−(1/C) min(K t²/‖S‖², K t/‖S‖)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub bound: Vec<f64>,
    /// Smallest `C` for which the bound dominates every empirical point.
    pub constant: f64,
    pub k: usize,
    pub omega: usize,
    pub sup_norm: f64,
    pub replicates: usize,
    pub seed: u64,
    #[serde(skip)]
    pub maxima: Vec<f64>,
}

impl TailReport {
    /// True when the bound is at least every empirical probability, up to
    /// rounding at the point that fixes `C`.
    pub fn dominates(&self) -> bool {
        self.bound.iter().zip(&self.probabilities).all(|(b, p)| *b >= p * (1.0 - 1e-12))
    }
}

pub fn hanson_wright_exponent(t: f64, k: usize, sup_norm: f64) -> f64 {
    let k = k as f64;
    (k * t * t / (sup_norm * sup_norm)).min(k * t / sup_norm)
}

fn hanson_wright_bound(t: f64, k: usize, sup_norm: f64, omega: usize, dim: usize, constant: f64) -> f64 {
    let prefactor = 2.0 * (omega as f64).powi(dim as i32);
    let m = hanson_wright_exponent(t, k, sup_norm);
    if m == 0.0 {
        return prefactor;
    }
    if constant == 0.0 {
        return 0.0;
    }
    prefactor * (-m / constant).exp()
}

/// Fits `C` and evaluates the bound for given maxima of `|Z_K^ℓ|`.
pub fn fit_tail(
    maxima: &[f64],
    thresholds: &[f64],
    k: usize,
    sup_norm: f64,
    omega: usize,
    dim: usize,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    if thresholds.iter().any(|t| *t < 0.0) || thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("thresholds must be nonnegative and strictly ascending".into()));
    }
    let n = maxima.len() as f64;
    let probabilities: Vec<f64> =
        thresholds.iter().map(|t| maxima.iter().filter(|m| **m >= *t).count() as f64 / n).collect();
    let log_prefactor = (2.0 * (omega as f64).powi(dim as i32)).ln();
    let constant = thresholds
        .iter()
        .zip(&probabilities)
        .filter(|(_, p)| **p > 0.0)
        .map(|(t, p)| hanson_wright_exponent(*t, k, sup_norm) / (log_prefactor - p.ln()))
        .fold(0.0, f64::max);
    let bound = thresholds.iter().map(|t| hanson_wright_bound(*t, k, sup_norm, omega, dim, constant)).collect();
    Ok((probabilities, constant, bound))
}

/// Hanson–Wright check for the deviation `Z_K^ℓ = Ŝ(ξ_ℓ) − E Ŝ(ξ_ℓ)` over the
/// `4ω` grid.
pub fn tail_check(
    density: &dyn SpectralDensity,
    domain: &AcquisitionDomain,
    k: usize,
    thresholds: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<TailReport> {
    let exp = Experiment::new(density, domain, k, 4)?;
    let expected = exp.expected_grid()?;
    let chunks = exp.run(replicates, seed, Vec::new, |acc: &mut Vec<f64>, _, est| {
        acc.push(est.iter().zip(&expected).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
    })?;
    let maxima: Vec<f64> = chunks.into_iter().flatten().collect();
    let sup_norm = density::sup_norm(density, c2_resolution(domain.dim()));
    let omega = domain.degree().max(1);
    let (probabilities, constant, bound) = fit_tail(&maxima, thresholds, k, sup_norm, omega, domain.dim())?;
    Ok(TailReport {
        thresholds: thresholds.to_vec(),
        probabilities,
        bound,
        constant,
        k,
        omega,
        sup_norm,
        replicates,
        seed,
        maxima,
    })
}

/// Run metadata written next to every report CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub seed: u64,
    pub replicates: usize,
    pub oversample: usize,
    pub threads: usize,
    pub version: &'static str,
    pub replicate_seeding: &'static str,
}

impl RunMetadata {
    pub fn new(command: &str, seed: u64, replicates: usize, oversample: usize) -> Self {
        RunMetadata {
            command: command.to_string(),
            seed,
            replicates,
            oversample,
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION"),
            replicate_seeding: "ChaCha8 seeded with the run seed, stream = replicate index",
        }
    }
}

/// Writes reports as CSV with optional `#` footer lines, and a JSON sidecar
/// `<path>.json`.
pub fn write_risk_csv(path: &Path, reports: &[RiskReport], footer: &[String], meta: &RunMetadata) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", RiskReport::CSV_HEADER)?;
    for r in reports {
        writeln!(f, "{}", r.csv_row())?;
    }
    for line in footer {
        writeln!(f, "# {line}")?;
    }
    f.flush()?;
    write_metadata(path, meta)
}

pub fn write_metadata(path: &Path, meta: &RunMetadata) -> Result<()> {
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::write(side, text + "\n")?;
    Ok(())
}
