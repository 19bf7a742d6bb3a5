//! Multi-dimensional FFT on row-major arrays, built on `rustfft`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned transforms for a fixed row-major shape (last axis contiguous).
pub struct FftNd {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalised forward transform, `X_k = Σ_n x_n e^{-2πi<k,n>/L}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward, None);
    }

    /// Unnormalised inverse transform (sign `+`).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse, None);
    }

    /// Forward transform of data that is zero outside the leading
    /// `support[j]` indices of every axis. Lines that are identically zero
    /// are skipped.
    pub fn forward_supported(&self, data: &mut [Complex64], support: &[usize]) {
        self.run(data, &self.forward, Some(support));
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>], support: Option<&[usize]>) {
        assert_eq!(data.len(), self.len(), "buffer does not match FFT shape");
        let d = self.shape.len();
        let mut line = Vec::new();
        let mut scratch = Vec::new();
        // Axes are processed last to first; axes before `axis` are still in
        // the untransformed (possibly sparse) state.
        for axis in (0..d).rev() {
            let n = self.shape[axis];
            if n <= 1 {
                continue;
            }
            let stride: usize = self.shape[axis + 1..].iter().product();
            let outer: usize = self.shape[..axis].iter().product();
            let plan = &plans[axis];
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
            line.resize(n, Complex64::default());
            for o in 0..outer {
                if let Some(sup) = support {
                    if !leading_index_supported(o, &self.shape[..axis], &sup[..axis]) {
                        continue;
                    }
                }
                let base = o * n * stride;
                for s in 0..stride {
                    if stride == 1 {
                        let seg = &mut data[base..base + n];
                        plan.process_with_scratch(seg, &mut scratch);
                        continue;
                    }
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride + s];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride + s] = *v;
                    }
                }
            }
        }
    }
}

fn leading_index_supported(mut flat: usize, shape: &[usize], support: &[usize]) -> bool {
    for j in (0..shape.len()).rev() {
        let idx = flat % shape[j];
        flat /= shape[j];
        if idx >= support[j] {
            return false;
        }
    }
    true
}

/// Row-major flat index of a multi-index.
pub fn flat_index(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Inverse of [`flat_index`].
pub fn unflatten(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for j in (0..shape.len()).rev() {
        out[j] = flat % shape[j];
        flat /= shape[j];
    }
}

/// Reduces a signed index into `0..n`.
pub fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}
