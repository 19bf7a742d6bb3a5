//! The multitaper estimator, its lag-coefficient form, the quadratic-form
//! matrices `V_K(ξ)`, sup-norm errors and the closed-form risk shapes.
//!
//! All bound evaluators use natural logarithms and set every hidden constant
//! to 1; they describe the shape of a bound, not its size.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::density::SpectralDensity;
use crate::domain::{AcquisitionDomain, BoxIter};
use crate::error::{Error, Result};
use crate::fourier::{flat_index, unflatten, wrap, FftNd};
use crate::process::Autocovariance;
use crate::slepian::TaperSet;

/// One realisation of the process on a domain, in the domain's canonical
/// point order.
#[derive(Debug, Clone)]
pub struct ProcessSample {
    domain: AcquisitionDomain,
    values: Vec<f64>,
}

impl ProcessSample {
    pub fn new(domain: AcquisitionDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.cardinality() {
            return Err(Error::DimensionMismatch { expected: domain.cardinality(), actual: values.len() });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample value {bad} is not finite")));
        }
        Ok(ProcessSample { domain, values })
    }

    pub fn domain(&self) -> &AcquisitionDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// The grid `{0, 1/R, …, (R−1)/R}^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrequencyGrid {
    dim: usize,
    resolution: usize,
}

impl FrequencyGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if dim == 0 || resolution == 0 {
            return Err(Error::InvalidInput(format!("grid needs d ≥ 1 and R ≥ 1, got d={dim}, R={resolution}")));
        }
        Ok(FrequencyGrid { dim, resolution })
    }

    /// `R = oversample · max(ω, 1)` for the domain's degree `ω`.
    pub fn for_domain(domain: &AcquisitionDomain, oversample: usize) -> Result<Self> {
        Self::new(domain.dim(), oversample.max(1) * domain.degree().max(1))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequency of the point with row-major index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0usize; self.dim];
        unflatten(flat, &vec![self.resolution; self.dim], &mut idx);
        idx.iter().map(|&i| i as f64 / self.resolution as f64).collect()
    }

    /// `S` evaluated at every grid point.
    pub fn sample_density(&self, s: &dyn SpectralDensity) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        crate::density::for_each_grid_point(self.dim, self.resolution, |xi| out.push(s.value(xi)));
        out
    }
}

/// The estimate as a trigonometric polynomial: lag coefficients on the box
/// `{−L..L}^d` (zero outside `Ω − Ω`) and values on a frequency grid.
#[derive(Debug, Clone)]
pub struct MtEstimate {
    degree: usize,
    lags: Autocovariance,
    grid: FrequencyGrid,
    grid_values: Vec<f64>,
}

impl MtEstimate {
    /// `ω = ⌈diam(Ω)⌉`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lag_coefficients(&self) -> &Autocovariance {
        &self.lags
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.grid_values
    }

    /// `Σ_ℓ σ̂_ℓ e^{−2πi<ξ,ℓ>}` at an arbitrary frequency.
    pub fn value_at(&self, xi: &[f64]) -> f64 {
        self.lags
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(l, c)| c * (2.0 * std::f64::consts::PI * l.iter().zip(xi).map(|(a, b)| *a as f64 * b).sum::<f64>()).cos())
            .sum()
    }

    /// Values on another grid, from the lag coefficients.
    pub fn evaluate_grid(&self, grid: FrequencyGrid) -> Vec<f64> {
        if grid == self.grid {
            return self.grid_values.clone();
        }
        lags_to_grid(&self.lags, grid)
    }
}

fn lags_to_grid(lags: &Autocovariance, grid: FrequencyGrid) -> Vec<f64> {
    let r = grid.resolution();
    let shape = vec![r; grid.dim()];
    let mut buf = vec![Complex64::default(); grid.len()];
    for (l, c) in lags.iter() {
        if c != 0.0 {
            let idx: Vec<usize> = l.iter().map(|&v| wrap(v, r)).collect();
            buf[flat_index(&idx, &shape)].re += c;
        }
    }
    FftNd::new(&shape).forward(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Smallest `2^a 3^b 5^c ≥ n`.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Precomputed layout and FFT plans for estimating many samples with one
/// taper set. Shareable across threads.
pub struct MtPlan<'a> {
    tapers: &'a TaperSet,
    extent: Vec<usize>,
    /// Flat position of each domain point inside the lag FFT buffer.
    slots: Vec<usize>,
    lag_fft: FftNd,
    grid: FrequencyGrid,
    grid_fft: FftNd,
    max_lag: usize,
}

impl<'a> MtPlan<'a> {
    pub fn new(tapers: &'a TaperSet, grid: FrequencyGrid) -> Result<Self> {
        let domain = tapers.domain();
        if grid.dim() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), actual: grid.dim() });
        }
        let (lo, _) = domain.bounding_box();
        let extent = domain.extent();
        let shape: Vec<usize> = extent.iter().map(|&e| fast_len(2 * e - 1)).collect();
        let slots = domain
            .points()
            .iter()
            .map(|p| {
                let idx: Vec<usize> = p.0.iter().zip(&lo).map(|(c, l)| (c - l) as usize).collect();
                flat_index(&idx, &shape)
            })
            .collect();
        let max_lag = extent.iter().max().copied().unwrap_or(1) - 1;
        Ok(MtPlan {
            tapers,
            extent,
            slots,
            lag_fft: FftNd::new(&shape),
            grid,
            grid_fft: FftNd::new(&vec![grid.resolution(); grid.dim()]),
            max_lag,
        })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    /// `σ̂_ℓ = (1/K) Σ_k Σ_{n−m=ℓ} y_n y_m` with `y = X·ν^{(k)}`. Tapers are
    /// transformed two at a time as the real and imaginary parts of one
    /// complex sequence.
    pub fn lag_coefficients(&self, values: &[f64]) -> Autocovariance {
        let shape = self.lag_fft.shape().to_vec();
        let len = self.lag_fft.len();
        let tapers = self.tapers.tapers();
        let mut power = vec![0.0; len];
        let mut buf = vec![Complex64::default(); len];
        let mut mirror = vec![0usize; len];
        let mut idx = vec![0usize; shape.len()];
        for (f, m) in mirror.iter_mut().enumerate() {
            unflatten(f, &shape, &mut idx);
            idx.iter_mut().zip(&shape).for_each(|(i, n)| *i = (n - *i) % n);
            *m = flat_index(&idx, &shape);
        }
        for pair in tapers.chunks(2) {
            buf.iter_mut().for_each(|b| *b = Complex64::default());
            for (i, &slot) in self.slots.iter().enumerate() {
                let im = if pair.len() == 2 { pair[1][i] * values[i] } else { 0.0 };
                buf[slot] = Complex64::new(pair[0][i] * values[i], im);
            }
            self.lag_fft.forward_supported(&mut buf, &self.extent);
            // |Y1(k)|² + |Y2(k)|² = (|Z(k)|² + |Z(−k)|²) / 2
            for (f, p) in power.iter_mut().enumerate() {
                let a = buf[f].norm_sqr();
                let b = buf[mirror[f]].norm_sqr();
                *p += if pair.len() == 2 { 0.5 * (a + b) } else { a };
            }
        }
        let mut acf: Vec<Complex64> = power.into_iter().map(|p| Complex64::new(p, 0.0)).collect();
        self.lag_fft.inverse(&mut acf);
        let scale = 1.0 / (tapers.len() as f64 * len as f64);
        let l = self.max_lag as i64;
        let d = shape.len();
        let values = BoxIter::new(&vec![-l; d], &vec![l; d])
            .map(|lag| {
                if lag.0.iter().zip(&self.extent).any(|(c, &e)| c.unsigned_abs() as usize >= e) {
                    return 0.0;
                }
                let i: Vec<usize> = lag.0.iter().zip(&shape).map(|(&c, &n)| wrap(c, n)).collect();
                acf[flat_index(&i, &shape)].re * scale
            })
            .collect();
        Autocovariance::from_values(d, self.max_lag, values).expect("lag box size")
    }

    /// Grid values from lag coefficients.
    pub fn grid_values(&self, lags: &Autocovariance) -> Vec<f64> {
        let r = self.grid.resolution();
        let shape = vec![r; self.grid.dim()];
        let mut buf = vec![Complex64::default(); self.grid.len()];
        for (l, c) in lags.iter() {
            if c != 0.0 {
                let idx: Vec<usize> = l.iter().map(|&v| wrap(v, r)).collect();
                buf[flat_index(&idx, &shape)].re += c;
            }
        }
        self.grid_fft.forward(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    pub fn estimate(&self, values: &[f64]) -> MtEstimate {
        let lags = self.lag_coefficients(values);
        let grid_values = self.grid_values(&lags);
        MtEstimate { degree: self.tapers.domain().degree(), lags, grid: self.grid, grid_values }
    }

    /// `E Ŝ` on the grid: `Σ_ℓ σ_ℓ c_ℓ e^{−2πi<ξ,ℓ>}` where `c_ℓ` are the
    /// lag coefficients of the all-ones sample.
    pub fn expected_grid(&self, acov: &Autocovariance) -> Vec<f64> {
        let weights = self.lag_coefficients(&vec![1.0; self.slots.len()]);
        let values = weights.iter().map(|(l, c)| c * acov.get(&l)).collect();
        let lags = Autocovariance::from_values(weights.dim(), weights.max_lag(), values).expect("same box");
        self.grid_values(&lags)
    }
}

/// `Ŝ(ξ) = (1/K) Σ_k |Σ_n X_n ν^{(k)}_n e^{−2πi<ξ,n>}|²` on a grid, with the
/// lag coefficients of the rewritten double-sum form.
pub fn multitaper_estimate(sample: &ProcessSample, tapers: &TaperSet, grid: FrequencyGrid) -> Result<MtEstimate> {
    if sample.domain() != tapers.domain() {
        return Err(Error::DomainMismatch);
    }
    Ok(MtPlan::new(tapers, grid)?.estimate(sample.values()))
}

/// Lag coefficients by the explicit double sum over point pairs.
pub fn lag_coefficients_direct(sample: &ProcessSample, tapers: &TaperSet) -> Result<Autocovariance> {
    if sample.domain() != tapers.domain() {
        return Err(Error::DomainMismatch);
    }
    let domain = sample.domain();
    let d = domain.dim();
    let max_lag = domain.extent().into_iter().max().unwrap_or(1) - 1;
    let side = 2 * max_lag + 1;
    let mut values = vec![0.0; side.pow(d as u32)];
    let x = sample.values();
    let k = tapers.count() as f64;
    for a in 0..domain.cardinality() {
        for b in 0..domain.cardinality() {
            let w: f64 = tapers.tapers().iter().map(|t| t[a] * t[b]).sum::<f64>() / k;
            let flat =
                domain.point(a).iter().zip(domain.point(b)).fold(0usize, |acc, (p, q)| acc * side + (p - q + max_lag as i64) as usize);
            values[flat] += x[a] * x[b] * w;
        }
    }
    Autocovariance::from_values(d, max_lag, values)
}

/// Brute-force evaluation of the estimator at one frequency.
pub fn estimate_at(sample: &ProcessSample, tapers: &TaperSet, xi: &[f64]) -> f64 {
    let domain = sample.domain();
    let sum: f64 = tapers
        .tapers()
        .iter()
        .map(|t| {
            let mut acc = Complex64::default();
            for (i, x) in sample.values().iter().enumerate() {
                let ph: f64 = domain.point(i).iter().zip(xi).map(|(n, f)| *n as f64 * f).sum();
                acc += Complex64::from_polar(x * t[i], -2.0 * std::f64::consts::PI * ph);
            }
            acc.norm_sqr()
        })
        .sum();
    sum / tapers.count() as f64
}

/// `(V_K(ξ))_{n,m} = e^{−2πi<ξ,n−m>} (1/K) Σ_k ν^{(k)}_n ν^{(k)}_m`.
pub fn quadratic_form_matrix(tapers: &TaperSet, xi: &[f64]) -> DMatrix<Complex64> {
    let domain = tapers.domain();
    let n = domain.cardinality();
    let p = projector(tapers);
    let phase: Vec<Complex64> = (0..n)
        .map(|i| {
            let ph: f64 = domain.point(i).iter().zip(xi).map(|(a, b)| *a as f64 * b).sum();
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ph)
        })
        .collect();
    DMatrix::from_fn(n, n, |a, b| phase[a] * phase[b].conj() * p[(a, b)])
}

/// `(1/K) Σ_k ν^{(k)} ν^{(k)ᵀ}`; `V_K(ξ)` is unitarily similar to it.
pub fn projector(tapers: &TaperSet) -> DMatrix<f64> {
    let n = tapers.domain().cardinality();
    let k = tapers.count();
    let nu = DMatrix::from_fn(n, k, |i, j| tapers.taper(j)[i]);
    (&nu * nu.transpose()) / k as f64
}

/// Frobenius norm, spectral norm and smallest eigenvalue of `V_K(ξ)`, which
/// do not depend on `ξ`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticFormNorms {
    pub frobenius: f64,
    pub spectral: f64,
    pub min_eigenvalue: f64,
}

pub fn quadratic_form_norms(tapers: &TaperSet) -> QuadraticFormNorms {
    let p = projector(tapers);
    let ev = p.clone().symmetric_eigenvalues();
    QuadraticFormNorms {
        frobenius: p.norm(),
        spectral: ev.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        min_eigenvalue: ev.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Maximum of `|S(ξ) − Ŝ(ξ)|` over the grid of `(oversample·ω)^d` points,
/// a grid approximation of the sup norm.
pub fn sup_norm_distance(s: &dyn SpectralDensity, est: &MtEstimate, oversample: usize) -> Result<f64> {
    if oversample < 4 {
        return Err(Error::InvalidInput(format!("oversample must be at least 4, got {oversample}")));
    }
    let grid = FrequencyGrid::new(s.dim(), oversample * est.degree().max(1))?;
    let values = est.evaluate_grid(grid);
    Ok(max_abs_difference(&grid.sample_density(s), &values))
}

pub fn max_abs_difference(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `‖S‖_{C²}·[(K/N)^{2/d} + N_∂/(N^{1−1/d} K^{1/d})·(1 + log(N/N_∂))]`.
pub fn bias_bound(domain: &AcquisitionDomain, k: usize, c2_norm: f64) -> f64 {
    let d = domain.dim() as f64;
    let n = domain.cardinality() as f64;
    let p = domain.perimeter() as f64;
    let k = k as f64;
    c2_norm * ((k / n).powf(2.0 / d) + p / (n.powf(1.0 - 1.0 / d) * k.powf(1.0 / d)) * (1.0 + (n / p).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseBound {
    pub value: f64,
    /// `max_{p∈{1,2}} (log diam / K)^p`.
    pub variance_term: f64,
    /// `(K/N)^{4/d}`.
    pub smoothing_term: f64,
    /// `N_∂² / (N^{2−2/d} K^{2/d}) · (1 + log(N/N_∂))²`.
    pub boundary_term: f64,
    /// `N_∂ ≥ (N/K)^{1−1/d}`.
    pub precondition_holds: bool,
}

pub fn mse_bound(domain: &AcquisitionDomain, k: usize) -> Result<MseBound> {
    if domain.cardinality() < 3 {
        return Err(Error::InvalidInput("risk bound needs at least 3 points".into()));
    }
    let d = domain.dim() as f64;
    let n = domain.cardinality() as f64;
    let p = domain.perimeter() as f64;
    let kf = k as f64;
    let ratio = domain.diameter().ln() / kf;
    let variance_term = ratio.max(ratio * ratio);
    let smoothing_term = (kf / n).powf(4.0 / d);
    let boundary_term = p * p / (n.powf(2.0 - 2.0 / d) * kf.powf(2.0 / d)) * (1.0 + (n / p).ln()).powi(2);
    Ok(MseBound {
        value: variance_term + smoothing_term + boundary_term,
        variance_term,
        smoothing_term,
        boundary_term,
        precondition_holds: p >= (n / kf).powf(1.0 - 1.0 / d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorollaryCount {
    pub k: usize,
    /// The formula value before rounding and clamping.
    pub raw: f64,
    pub clamped: bool,
    /// `diam(Ω) ≤ exp(N^{1/d})`.
    pub diameter_condition: bool,
}

/// `K = ⌈(log diam · N⁴)^{1/5}⌉` for `d = 1` and
/// `K = ⌈((log diam)^d · N²)^{1/3}⌉` for `d ≥ 2`, clamped to `[1, N]`.
pub fn corollary_taper_count(domain: &AcquisitionDomain) -> Result<CorollaryCount> {
    let diam = domain.diameter();
    if diam <= 1.0 {
        return Err(Error::InvalidInput(format!("diameter {diam} ≤ 1 gives a nonpositive logarithm")));
    }
    let d = domain.dim();
    let n = domain.cardinality() as f64;
    let log_diam = diam.ln();
    let raw = if d == 1 { (log_diam * n.powi(4)).powf(0.2) } else { (log_diam.powi(d as i32) * n * n).cbrt() };
    let unclamped = raw.ceil().max(1.0) as usize;
    let k = unclamped.min(domain.cardinality());
    if k != unclamped {
        log::warn!("taper count {unclamped} clamped to N = {}", domain.cardinality());
    }
    Ok(CorollaryCount {
        k,
        raw,
        clamped: k != unclamped,
        diameter_condition: log_diam <= n.powf(1.0 / d as f64),
    })
}
