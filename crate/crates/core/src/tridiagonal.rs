//! Selected eigenpairs of a real symmetric tridiagonal matrix by Sturm
//! bisection and inverse iteration.

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal, `off[i]` coupling
/// rows `i` and `i + 1`.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        SymTridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    fn norm_inf(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + l + r
            })
            .fold(0.0, f64::max)
    }

    fn pivmin(&self) -> f64 {
        let m = self.off.iter().map(|e| e * e).fold(1.0f64, f64::max);
        f64::MIN_POSITIVE * m
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let n = self.len();
        assert!(j < n);
        let (mut lo, mut hi) = self.gershgorin();
        let pivmin = self.pivmin();
        for _ in 0..200 {
            let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + pivmin;
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let l = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let r = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - l - r);
            hi = hi.max(self.diag[i] + l + r);
        }
        let pad = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + self.pivmin();
        (lo - pad, hi + pad)
    }

    /// The `k` largest eigenpairs, eigenvalues descending. Eigenvectors have
    /// unit norm; vectors inside a cluster of close eigenvalues are
    /// explicitly reorthogonalised.
    pub fn top_eigenpairs(&self, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.len();
        assert!(k <= n);
        let values: Vec<f64> = (0..k).map(|j| self.eigenvalue(n - 1 - j)).collect();
        let norm = self.norm_inf().max(f64::MIN_POSITIVE);
        let cluster_tol = 1e-3 * norm;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut cluster_start = 0;
        for (j, &lambda) in values.iter().enumerate() {
            if j > 0 && (values[j - 1] - lambda).abs() > cluster_tol {
                cluster_start = j;
            }
            let lu = ShiftedLu::factor(self, lambda, norm);
            let mut x: Vec<f64> = (0..n).map(|i| start_entry(i, j)).collect();
            normalize(&mut x);
            for _ in 0..5 {
                lu.solve(&mut x);
                for v in &vectors[cluster_start..j] {
                    let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
                    x.iter_mut().zip(v).for_each(|(a, b)| *a -= dot * b);
                }
                normalize(&mut x);
            }
            vectors.push(x);
        }
        (values, vectors)
    }
}

fn start_entry(i: usize, j: usize) -> f64 {
    // deterministic, far from any structured eigenvector
    let t = (i as f64 + 1.0) * 0.618_033_988_749_895 + (j as f64 + 1.0) * 0.414_213_562_373_095;
    0.5 + t.fract()
}

fn normalize(x: &mut [f64]) {
    let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

/// LU factorisation with partial pivoting of `T − λI`.
struct ShiftedLu {
    d: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, lambda: f64, norm: f64) -> Self {
        let n = t.len();
        let tiny = f64::EPSILON * norm;
        let mut d: Vec<f64> = t.diag.iter().map(|a| a - lambda).collect();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        ShiftedLu { d, dl, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.du2[i] * b[i + 2];
            }
            b[i] = s / self.d[i];
        }
        // keep the iterate representable when the shift is an exact eigenvalue
        let m = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m > 1e150 || !m.is_finite() {
            let scale = if m.is_finite() { 1.0 / m } else { 0.0 };
            b.iter_mut().for_each(|v| *v = if v.is_finite() { *v * scale } else { v.signum() });
        }
    }
}
