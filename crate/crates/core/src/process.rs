//! Autocovariances, partial Fourier sums and exact Gaussian simulation via a
//! circulant model on the window `{−ω..ω}^d`.
//!
//! The circulant covariance `(Σ_Y)_{n,m} = σ_{u(n−m)}` wraps every lag
//! component into `{−ω..ω}`. It is diagonalised by the unitary Fourier matrix
//! `U_{n,m} = (2ω+1)^{−d/2} e^{2πi<n,m>/(2ω+1)}`, with eigenvalues
//! `F_ω(S)(k/(2ω+1))`, and its restriction to `{0..ω}^d` is the stationary
//! covariance of the process on that box.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use nalgebra::DMatrix;

use crate::density::SpectralDensity;
use crate::domain::{AcquisitionDomain, BoxIter};
use crate::error::{Error, Result};
use crate::fourier::{flat_index, unflatten, wrap, FftNd};

const IMAG_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-10;
const SAMPLE_IMAG_TOL: f64 = 1e-8;

/// Default quadrature points per axis for autocovariances.
pub fn default_quadrature(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 512,
        _ => 128,
    }
}

/// `σ_n` for `‖n‖_∞ ≤ max_lag`, stored on the box `{−L..L}^d` in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct Autocovariance {
    dim: usize,
    max_lag: usize,
    values: Vec<f64>,
}

impl Autocovariance {
    /// Builds from explicit coefficients on `{−L..L}^d` (lexicographic).
    pub fn from_values(dim: usize, max_lag: usize, values: Vec<f64>) -> Result<Self> {
        let side = 2 * max_lag + 1;
        if values.len() != side.pow(dim as u32) {
            return Err(Error::DimensionMismatch { expected: side.pow(dim as u32), actual: values.len() });
        }
        Ok(Autocovariance { dim, max_lag, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    fn side(&self) -> usize {
        2 * self.max_lag + 1
    }

    /// `σ_lag`, zero beyond `max_lag`.
    pub fn get(&self, lag: &[i64]) -> f64 {
        let l = self.max_lag as i64;
        if lag.iter().any(|&c| c.abs() > l) {
            return 0.0;
        }
        let side = self.side();
        let flat = lag.iter().fold(0usize, |acc, &c| acc * side + (c + l) as usize);
        self.values[flat]
    }

    /// All lags with their coefficients, lexicographic.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        let l = self.max_lag as i64;
        let lo = vec![-l; self.dim];
        let hi = vec![l; self.dim];
        BoxIter::new(&lo, &hi).map(|p| p.0).zip(self.values.iter().copied())
    }

    /// Restriction to `max_lag ≤ self.max_lag`.
    pub fn truncate(&self, max_lag: usize) -> Autocovariance {
        let max_lag = max_lag.min(self.max_lag);
        let l = max_lag as i64;
        let values = BoxIter::new(&vec![-l; self.dim], &vec![l; self.dim]).map(|p| self.get(&p.0)).collect();
        Autocovariance { dim: self.dim, max_lag, values }
    }

    /// `F_p(S)(ξ) = Σ_{‖k‖_∞ ≤ p} σ_k e^{2πi<ξ,k>}`. An imaginary part above
    /// `1e-10` means the coefficients are not symmetric.
    pub fn partial_fourier_sum(&self, p: usize, xi: &[f64]) -> Result<f64> {
        let p = p.min(self.max_lag) as i64;
        let mut re = 0.0;
        let mut im = 0.0;
        for k in BoxIter::new(&vec![-p; self.dim], &vec![p; self.dim]) {
            let s = self.get(&k.0);
            let ph = 2.0 * std::f64::consts::PI * k.0.iter().zip(xi).map(|(a, b)| *a as f64 * b).sum::<f64>();
            re += s * ph.cos();
            im += s * ph.sin();
        }
        if im.abs() > IMAG_TOL {
            return Err(Error::NotEven { residue: im.abs(), lag: vec![p] });
        }
        Ok(re)
    }

    /// `F_p(S)` on the grid `{j/r}^d`, row-major. Requires `r ≥ 2p + 1`.
    pub fn partial_fourier_grid(&self, p: usize, resolution: usize) -> Result<Vec<f64>> {
        let p = p.min(self.max_lag);
        if resolution < 2 * p + 1 {
            return Err(Error::InvalidInput(format!("grid {resolution} too coarse for degree {p}")));
        }
        let shape = vec![resolution; self.dim];
        let mut buf = vec![Complex64::default(); resolution.pow(self.dim as u32)];
        let pi = p as i64;
        for k in BoxIter::new(&vec![-pi; self.dim], &vec![pi; self.dim]) {
            let idx: Vec<usize> = k.0.iter().map(|&c| wrap(c, resolution)).collect();
            buf[flat_index(&idx, &shape)] = Complex64::new(self.get(&k.0), 0.0);
        }
        FftNd::new(&shape).inverse(&mut buf);
        let worst = buf.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        if worst > IMAG_TOL {
            return Err(Error::NotEven { residue: worst, lag: vec![pi] });
        }
        Ok(buf.into_iter().map(|z| z.re).collect())
    }
}

/// `σ_n = ∫ S(ξ) e^{−2πi<ξ,n>} dξ` for `‖n‖_∞ ≤ max_lag` by the trapezoidal
/// rule. The rule uses `max(default_quadrature(d), 8·max_lag)` points per
/// axis, rounded up to a power of two.
pub fn autocovariance(s: &dyn SpectralDensity, max_lag: usize) -> Result<Autocovariance> {
    let q = default_quadrature(s.dim()).max((8 * max_lag).next_power_of_two());
    autocovariance_with_resolution(s, max_lag, q)
}

pub fn autocovariance_with_resolution(s: &dyn SpectralDensity, max_lag: usize, resolution: usize) -> Result<Autocovariance> {
    let d = s.dim();
    if resolution < 2 * max_lag + 1 {
        return Err(Error::InvalidInput(format!("quadrature {resolution} too coarse for lag {max_lag}")));
    }
    let shape = vec![resolution; d];
    let total = resolution.pow(d as u32);
    let mut buf = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    let mut xi = vec![0.0; d];
    for flat in 0..total {
        unflatten(flat, &shape, &mut idx);
        for j in 0..d {
            xi[j] = idx[j] as f64 / resolution as f64;
        }
        buf.push(Complex64::new(s.value(&xi), 0.0));
    }
    FftNd::new(&shape).forward(&mut buf);
    let norm = 1.0 / total as f64;
    let l = max_lag as i64;
    let mut values = Vec::with_capacity((2 * max_lag + 1).pow(d as u32));
    for lag in BoxIter::new(&vec![-l; d], &vec![l; d]) {
        let i: Vec<usize> = lag.0.iter().map(|&c| wrap(c, resolution)).collect();
        let z = buf[flat_index(&i, &shape)] * norm;
        if z.im.abs() > IMAG_TOL {
            return Err(Error::NotEven { residue: z.im.abs(), lag: lag.0 });
        }
        values.push(z.re);
    }
    Ok(Autocovariance { dim: d, max_lag, values })
}

/// Signed wrap of a lag component into `{−ω..ω}` modulo `2ω+1`. Its absolute
/// value is `|n_j − m_j|` for `|n_j − m_j| ≤ ω` and `2ω+1 − |n_j − m_j|` for
/// `ω+1 ≤ |n_j − m_j| ≤ 2ω`.
pub fn wrap_lag(diff: i64, omega: usize) -> i64 {
    let l = 2 * omega as i64 + 1;
    let r = diff.rem_euclid(l);
    if r > omega as i64 {
        r - l
    } else {
        r
    }
}

/// Circulant model for a density on the window `{−ω..ω}^d`.
#[derive(Debug, Clone)]
pub struct CirculantModel {
    dim: usize,
    half_width: usize,
    autocov: Autocovariance,
    /// `F_ω(S)(k/(2ω+1))`, indexed by `k mod (2ω+1)` row-major.
    eigenvalues: Vec<f64>,
    name: String,
}

impl CirculantModel {
    pub fn build(s: &dyn SpectralDensity, half_width: usize) -> Result<Self> {
        let acov = autocovariance(s, half_width)?;
        Self::from_autocovariance(&acov, half_width, s.name())
    }

    pub fn from_autocovariance(acov: &Autocovariance, half_width: usize, name: String) -> Result<Self> {
        if half_width > acov.max_lag() {
            return Err(Error::InvalidInput(format!(
                "autocovariance known to lag {} but window needs {half_width}",
                acov.max_lag()
            )));
        }
        let d = acov.dim();
        let autocov = acov.truncate(half_width);
        let side = 2 * half_width + 1;
        let shape = vec![side; d];
        let mut buf = vec![Complex64::default(); side.pow(d as u32)];
        for (lag, v) in autocov.iter() {
            let i: Vec<usize> = lag.iter().map(|&c| wrap(c, side)).collect();
            buf[flat_index(&i, &shape)] = Complex64::new(v, 0.0);
        }
        FftNd::new(&shape).inverse(&mut buf);
        let mut eigenvalues = Vec::with_capacity(buf.len());
        let mut idx = vec![0usize; d];
        for (flat, z) in buf.iter().enumerate() {
            unflatten(flat, &shape, &mut idx);
            let k: Vec<i64> = idx.iter().map(|&i| wrap_lag(i as i64, half_width)).collect();
            if z.im.abs() > IMAG_TOL {
                return Err(Error::NotEven { residue: z.im.abs(), lag: k });
            }
            if z.re < -EIGEN_TOL {
                return Err(Error::NotSamplable { value: z.re, index: k });
            }
            eigenvalues.push(z.re.max(0.0));
        }
        Ok(CirculantModel { dim: d, half_width, autocov, eigenvalues, name })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ω`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// `2ω + 1`.
    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn window_len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn autocovariance(&self) -> &Autocovariance {
        &self.autocov
    }

    pub fn density_name(&self) -> &str {
        &self.name
    }

    /// Eigenvalue at frequency index `k ∈ {−ω..ω}^d`.
    pub fn eigenvalue(&self, k: &[i64]) -> f64 {
        let side = self.side();
        let i: Vec<usize> = k.iter().map(|&c| wrap(c, side)).collect();
        self.eigenvalues[flat_index(&i, &vec![side; self.dim])]
    }

    /// Eigenvalues in window order (`k` lexicographic over `{−ω..ω}^d`).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let w = self.half_width as i64;
        BoxIter::new(&vec![-w; self.dim], &vec![w; self.dim]).map(|k| self.eigenvalue(&k.0)).collect()
    }

    /// Window points `{−ω..ω}^d` in lexicographic order.
    pub fn window_points(&self) -> Vec<Vec<i64>> {
        let w = self.half_width as i64;
        BoxIter::new(&vec![-w; self.dim], &vec![w; self.dim]).map(|p| p.0).collect()
    }

    /// The dense covariance `Σ_Y` in window order.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let pts = self.window_points();
        let n = pts.len();
        DMatrix::from_fn(n, n, |a, b| {
            let lag: Vec<i64> = pts[a].iter().zip(&pts[b]).map(|(x, y)| wrap_lag(x - y, self.half_width)).collect();
            self.autocov.get(&lag)
        })
    }

    /// One exact draw of `Y = U* diag(√λ) ζ` in window order, where `ζ`
    /// pairs each frequency `k` with `−k` through shared Gaussian draws so
    /// that `Y` is real.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.sample_with(rng, &FftNd::new(&vec![self.side(); self.dim]))
    }

    pub(crate) fn sample_with(&self, rng: &mut ChaCha8Rng, fft: &FftNd) -> Result<Vec<f64>> {
        let side = self.side();
        let shape = vec![side; self.dim];
        let total = self.eigenvalues.len();
        let mut z = vec![Complex64::default(); total];
        let mut idx = vec![0usize; self.dim];
        for flat in 0..total {
            unflatten(flat, &shape, &mut idx);
            idx.iter_mut().for_each(|i| *i = (side - *i) % side);
            let partner = flat_index(&idx, &shape);
            let amp = self.eigenvalues[flat].sqrt();
            if partner == flat {
                let a: f64 = StandardNormal.sample(rng);
                z[flat] = Complex64::new(amp * a, 0.0);
            } else if flat < partner {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                let c = amp * std::f64::consts::FRAC_1_SQRT_2;
                z[flat] = Complex64::new(c * a, c * b);
                z[partner] = Complex64::new(c * a, -c * b);
            }
        }
        fft.forward(&mut z);
        let norm = (total as f64).sqrt().recip();
        let worst = z.iter().fold(0.0f64, |m, v| m.max(v.im.abs())) * norm;
        if worst > SAMPLE_IMAG_TOL {
            return Err(Error::ComplexResidue(worst));
        }
        // FFT order (n mod side) to window order (n + ω)
        let mut out = vec![0.0; total];
        let w = self.half_width;
        for (flat, o) in out.iter_mut().enumerate() {
            unflatten(flat, &shape, &mut idx);
            idx.iter_mut().for_each(|i| *i = (*i + side - w) % side);
            *o = z[flat_index(&idx, &shape)].re * norm;
        }
        Ok(out)
    }

    /// `Z = UY` for a window-ordered real vector; output in window order of `k`.
    pub fn unitary_transform(&self, y: &[f64]) -> Vec<Complex64> {
        let side = self.side();
        let shape = vec![side; self.dim];
        let w = self.half_width;
        let total = y.len();
        let mut buf = vec![Complex64::default(); total];
        let mut idx = vec![0usize; self.dim];
        for (flat, v) in y.iter().enumerate() {
            unflatten(flat, &shape, &mut idx);
            idx.iter_mut().for_each(|i| *i = (*i + side - w) % side);
            buf[flat_index(&idx, &shape)] = Complex64::new(*v, 0.0);
        }
        FftNd::new(&shape).inverse(&mut buf);
        let norm = (total as f64).sqrt().recip();
        let mut out = vec![Complex64::default(); total];
        for (flat, o) in out.iter_mut().enumerate() {
            unflatten(flat, &shape, &mut idx);
            idx.iter_mut().for_each(|i| *i = (*i + side - w) % side);
            *o = buf[flat_index(&idx, &shape)] * norm;
        }
        out
    }
}

/// Reproducible generator for replicate `replicate` of a run seeded with
/// `seed`: ChaCha8 keyed by the seed, one stream per replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws samples of a stationary process restricted to a domain, using a
/// circulant model whose window contains a translate of the domain in
/// `{0..ω}^d`.
pub struct DomainSampler {
    model: CirculantModel,
    window_index: Vec<usize>,
    fft: FftNd,
}

impl DomainSampler {
    /// Uses `ω = max(⌈diam Ω⌉, extent − 1, 1)`.
    pub fn new(s: &dyn SpectralDensity, domain: &AcquisitionDomain) -> Result<Self> {
        if s.dim() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), actual: s.dim() });
        }
        let span = domain.extent().into_iter().max().unwrap_or(1) - 1;
        let omega = domain.degree().max(span).max(1);
        Self::with_model(CirculantModel::build(s, omega)?, domain)
    }

    pub fn with_model(model: CirculantModel, domain: &AcquisitionDomain) -> Result<Self> {
        let (lo, _) = domain.bounding_box();
        let side = model.side();
        let w = model.half_width() as i64;
        let shape = vec![side; model.dim()];
        if domain.extent().iter().any(|&e| e as i64 - 1 > w) {
            return Err(Error::InvalidInput("domain does not fit in the circulant window".into()));
        }
        let window_index = domain
            .points()
            .iter()
            .map(|p| {
                let idx: Vec<usize> = p.0.iter().zip(&lo).map(|(c, l)| (c - l + w) as usize).collect();
                flat_index(&idx, &shape)
            })
            .collect();
        let fft = FftNd::new(&shape);
        Ok(DomainSampler { model, window_index, fft })
    }

    pub fn model(&self) -> &CirculantModel {
        &self.model
    }

    /// Values at the domain points, canonical order.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let y = self.model.sample_with(rng, &self.fft)?;
        Ok(self.window_index.iter().map(|&i| y[i]).collect())
    }
}
