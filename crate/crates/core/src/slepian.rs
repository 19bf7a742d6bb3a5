//! Slepian tapers: leading eigenvectors of the sinc-kernel spectral
//! concentration matrix of a domain.
//!
//! Three routes compute the same [`TaperSet`]:
//!
//! - a dense symmetric eigensolve of the concentration matrix (any domain);
//! - for one-dimensional intervals, the classical commuting tridiagonal
//!   matrix, solved by bisection and inverse iteration;
//! - for boxes in `d ≥ 2`, the Kronecker structure of the kernel: tapers are
//!   tensor products of one-dimensional tapers and eigenvalues multiply.
//!
//! [`TaperMethod::Auto`] picks the cheapest applicable route. The fast
//! routes are checked against the dense one in the test suite.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::domain::AcquisitionDomain;
use crate::error::{Error, Result};
use crate::tridiagonal::SymTridiagonal;

/// Eigenvalues closer than this are treated as one cluster when ordering.
const CLUSTER_TOL: f64 = 1e-12;

/// `sin(x)/x`, with the series `1 − x²/6` near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Bandwidth and taper count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaperConfig {
    pub bandwidth: f64,
    pub taper_count: usize,
}

impl TaperConfig {
    pub fn new(bandwidth: f64, taper_count: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if taper_count == 0 {
            return Err(Error::InvalidTaperCount { k: 0, max: usize::MAX });
        }
        Ok(TaperConfig { bandwidth, taper_count })
    }

    /// `W` with the standard count `K = ⌈N_Ω W^d⌉`.
    pub fn with_default_count(domain: &AcquisitionDomain, bandwidth: f64) -> Result<Self> {
        Self::new(bandwidth, default_taper_count(domain, bandwidth)?)
    }

    /// `K` with the bandwidth `W = (K/N_Ω)^{1/d}` that makes `K` the
    /// standard count.
    pub fn from_taper_count(domain: &AcquisitionDomain, taper_count: usize) -> Result<Self> {
        let n = domain.cardinality();
        if taper_count == 0 || taper_count > n {
            return Err(Error::InvalidTaperCount { k: taper_count, max: n });
        }
        let w = (taper_count as f64 / n as f64).powf(1.0 / domain.dim() as f64);
        Self::new(w.min(1.0), taper_count)
    }
}

fn check_bandwidth(w: f64) -> Result<()> {
    if w > 0.0 && w <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(w))
    }
}

/// `K = ⌈N_Ω · W^d⌉`.
pub fn default_taper_count(domain: &AcquisitionDomain, bandwidth: f64) -> Result<usize> {
    check_bandwidth(bandwidth)?;
    let n = domain.cardinality();
    let raw = n as f64 * bandwidth.powi(domain.dim() as i32);
    // guard against 6.4000000000000004-style round-up
    let k = (raw - 1e-9 * raw.max(1.0)).ceil().max(1.0) as usize;
    if k > n {
        log::warn!("taper count {k} clamped to N = {n}");
    }
    Ok(k.min(n))
}

/// The truncated concentration matrix, entry `(n, m) = W^d Π_k sinc(πW(n_k − m_k))`.
pub fn concentration_matrix(domain: &AcquisitionDomain, bandwidth: f64) -> Result<DMatrix<f64>> {
    check_bandwidth(bandwidth)?;
    let n = domain.cardinality();
    let d = domain.dim();
    let wd = bandwidth.powi(d as i32);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let p = domain.point(i);
        a[(i, i)] = wd;
        for j in 0..i {
            let q = domain.point(j);
            let v = wd * p.iter().zip(q).map(|(x, y)| sinc(PI * bandwidth * (x - y) as f64)).product::<f64>();
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(a)
}

/// Route used by [`compute_tapers_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaperMethod {
    Auto,
    Dense,
    /// Tridiagonal for intervals, tensor products for boxes; falls back to
    /// dense for other domains.
    Structured,
}

/// `K` orthonormal Slepian tapers with their concentration eigenvalues.
#[derive(Debug, Clone)]
pub struct TaperSet {
    domain: AcquisitionDomain,
    config: TaperConfig,
    tapers: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl TaperSet {
    pub fn domain(&self) -> &AcquisitionDomain {
        &self.domain
    }

    pub fn config(&self) -> TaperConfig {
        self.config
    }

    pub fn count(&self) -> usize {
        self.tapers.len()
    }

    /// Taper `k`, indexed by domain points in canonical order.
    pub fn taper(&self, k: usize) -> &[f64] {
        &self.tapers[k]
    }

    pub fn tapers(&self) -> &[Vec<f64>] {
        &self.tapers
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Largest absolute deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let k = self.count();
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in a..k {
                let dot: f64 = self.tapers[a].iter().zip(&self.tapers[b]).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// Same tapers on the domain translated by `offset`.
    pub fn translated(&self, offset: &[i64]) -> Result<TaperSet> {
        Ok(TaperSet { domain: self.domain.translate(offset)?, ..self.clone() })
    }
}

/// Top-`K` Slepian tapers using the fastest applicable route.
pub fn compute_tapers(domain: &AcquisitionDomain, config: TaperConfig) -> Result<TaperSet> {
    compute_tapers_with(domain, config, TaperMethod::Auto)
}

pub fn compute_tapers_with(domain: &AcquisitionDomain, config: TaperConfig, method: TaperMethod) -> Result<TaperSet> {
    check_bandwidth(config.bandwidth)?;
    let n = domain.cardinality();
    let k = config.taper_count;
    if k == 0 || k > n {
        return Err(Error::InvalidTaperCount { k, max: n });
    }
    let structured = domain.is_box() && n > 1;
    let (eigenvalues, tapers) = match method {
        TaperMethod::Dense => dense_tapers(domain, config.bandwidth, k)?,
        TaperMethod::Auto | TaperMethod::Structured if structured => {
            if domain.dim() == 1 {
                interval_tapers(n, config.bandwidth, k)
            } else {
                box_tapers(&domain.extent(), config.bandwidth, k)
            }
        }
        _ => dense_tapers(domain, config.bandwidth, k)?,
    };
    Ok(TaperSet { domain: domain.clone(), config, tapers, eigenvalues })
}

/// All `N_Ω` concentration eigenvalues, descending.
pub fn concentration_spectrum(domain: &AcquisitionDomain, bandwidth: f64) -> Result<Vec<f64>> {
    let a = concentration_matrix(domain, bandwidth)?;
    let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap_or(Ordering::Equal));
    Ok(ev)
}

type Eigenpairs = (Vec<f64>, Vec<Vec<f64>>);

fn dense_tapers(domain: &AcquisitionDomain, bandwidth: f64, k: usize) -> Result<Eigenpairs> {
    let a = concentration_matrix(domain, bandwidth)?;
    let n = a.nrows();
    let cond = condition_proxy(&a);
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 0).ok_or(Error::NonConvergence { size: n, condition: cond })?;
    let pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            normalize_sign(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect();
    Ok(select_top(pairs, k))
}

/// `‖A‖_1 / min diag`: a cheap stand-in for the condition number in
/// non-convergence reports.
fn condition_proxy(a: &DMatrix<f64>) -> f64 {
    let norm1 = a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let dmin = a.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
    norm1 / dmin
}

/// First entry of magnitude above round-off is made positive.
fn normalize_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Order inside a cluster: lexicographically larger eigenvectors first.
/// Only the vectors are compared, so the order is total even when the
/// cluster is a chain of values each within the tolerance of the next.
fn order_in_cluster(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> Ordering {
    for (x, y) in a.1.iter().zip(&b.1) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn select_top(mut pairs: Vec<(f64, Vec<f64>)>, k: usize) -> Eigenpairs {
    // coarse sort first so cluster comparisons see neighbours only
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && (pairs[j - 1].0 - pairs[j].0).abs() <= CLUSTER_TOL {
            j += 1;
        }
        pairs[i..j].sort_by(order_in_cluster);
        i = j;
    }
    pairs.truncate(k);
    pairs.into_iter().unzip()
}

/// The tridiagonal matrix commuting with the interval concentration matrix
/// (half-bandwidth `W/2`). Its eigenvectors, by decreasing eigenvalue, are
/// the Slepian tapers in order.
fn commuting_tridiagonal(n: usize, bandwidth: f64) -> SymTridiagonal {
    let c = (PI * bandwidth).cos();
    let half = (n as f64 - 1.0) / 2.0;
    let diag = (0..n).map(|i| (half - i as f64).powi(2) * c).collect();
    let off = (1..n).map(|i| (i * (n - i)) as f64 / 2.0).collect();
    SymTridiagonal::new(diag, off)
}

fn interval_tapers(n: usize, bandwidth: f64, k: usize) -> Eigenpairs {
    let t = commuting_tridiagonal(n, bandwidth);
    let (_, mut vectors) = t.top_eigenpairs(k);
    vectors.iter_mut().for_each(|v| normalize_sign(v));
    let values = interval_concentrations(n, bandwidth, &vectors);
    (values, vectors)
}

/// Rayleigh quotients `vᵀAv` against the interval concentration matrix.
fn interval_concentrations(n: usize, bandwidth: f64, vectors: &[Vec<f64>]) -> Vec<f64> {
    let kernel: Vec<f64> = (0..n).map(|j| bandwidth * sinc(PI * bandwidth * j as f64)).collect();
    if n <= 256 {
        return vectors
            .iter()
            .map(|v| {
                let mut s = 0.0;
                for i in 0..n {
                    let mut row = 0.0;
                    for j in 0..n {
                        row += kernel[i.abs_diff(j)] * v[j];
                    }
                    s += v[i] * row;
                }
                s
            })
            .collect();
    }
    // symmetric Toeplitz product through a circulant of length ≥ 2n
    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut circ = vec![Complex64::default(); len];
    for j in 0..n {
        circ[j] = Complex64::new(kernel[j], 0.0);
        if j > 0 {
            circ[len - j] = Complex64::new(kernel[j], 0.0);
        }
    }
    fwd.process(&mut circ);
    let mut buf = vec![Complex64::default(); len];
    vectors
        .iter()
        .map(|v| {
            buf.iter_mut().for_each(|b| *b = Complex64::default());
            for (b, x) in buf.iter_mut().zip(v) {
                b.re = *x;
            }
            fwd.process(&mut buf);
            buf.iter_mut().zip(&circ).for_each(|(b, c)| *b *= c);
            inv.process(&mut buf);
            v.iter().zip(&buf).map(|(x, y)| x * y.re).sum::<f64>() / len as f64
        })
        .collect()
}

fn box_tapers(sides: &[usize], bandwidth: f64, k: usize) -> Eigenpairs {
    let axes: Vec<Eigenpairs> = sides.iter().map(|&a| interval_tapers(a, bandwidth, a)).collect();
    let n: usize = sides.iter().product();
    let d = sides.len();
    // every index tuple with its product eigenvalue
    let mut tuples: Vec<(f64, Vec<usize>)> = Vec::with_capacity(n);
    let mut idx = vec![0usize; d];
    for flat in 0..n {
        crate::fourier::unflatten(flat, sides, &mut idx);
        let lambda = idx.iter().enumerate().map(|(j, &i)| axes[j].0[i]).product();
        tuples.push((lambda, idx.clone()));
    }
    tuples.sort_by(|a, b| b.0.total_cmp(&a.0));
    // materialise everything that can reach the top-k, including a
    // cluster straddling the cut
    let mut keep = k.min(n);
    while keep > 0 && keep < n && (tuples[keep].0 - tuples[keep - 1].0).abs() <= CLUSTER_TOL {
        keep += 1;
    }
    let pairs: Vec<(f64, Vec<f64>)> = tuples[..keep]
        .iter()
        .map(|(lambda, tuple)| {
            let mut v = vec![0.0; n];
            let mut pos = vec![0usize; d];
            for (flat, out) in v.iter_mut().enumerate() {
                crate::fourier::unflatten(flat, sides, &mut pos);
                *out = (0..d).map(|j| axes[j].1[tuple[j]][pos[j]]).product();
            }
            normalize_sign(&mut v);
            (*lambda, v)
        })
        .collect();
    select_top(pairs, k)
}
