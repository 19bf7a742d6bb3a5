//! Spectral densities on the torus `[0,1)^d` and the density registry.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// A real, even, 1-periodic spectral density with optional analytic
/// derivatives.
pub trait SpectralDensity: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, xi: &[f64]) -> f64;

    /// Analytic gradient, if the family provides one.
    fn gradient(&self, _xi: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Analytic Hessian, row-major `d × d`, if the family provides one.
    fn hessian(&self, _xi: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Registry name with parameters, e.g. `cosine(0.5,0.1)`.
    fn name(&self) -> String;
}

/// `S ≡ c`.
#[derive(Debug, Clone)]
pub struct ConstantDensity {
    pub dim: usize,
    pub level: f64,
}

impl SpectralDensity for ConstantDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _xi: &[f64]) -> f64 {
        self.level
    }

    fn gradient(&self, _xi: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }

    fn hessian(&self, _xi: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim * self.dim])
    }

    fn name(&self) -> String {
        format!("constant({})", self.level)
    }
}

/// `S(ξ) = c + a Σ_j cos(2πξ_j)`: autocovariance `σ_0 = c`, `σ_{±e_j} = a/2`.
#[derive(Debug, Clone)]
pub struct CosineDensity {
    pub dim: usize,
    pub level: f64,
    pub amplitude: f64,
}

impl SpectralDensity for CosineDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, xi: &[f64]) -> f64 {
        self.level + self.amplitude * xi.iter().map(|x| (2.0 * PI * x).cos()).sum::<f64>()
    }

    fn gradient(&self, xi: &[f64]) -> Option<Vec<f64>> {
        Some(xi.iter().map(|x| -2.0 * PI * self.amplitude * (2.0 * PI * x).sin()).collect())
    }

    fn hessian(&self, xi: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        for (j, x) in xi.iter().enumerate() {
            h[j * d + j] = -4.0 * PI * PI * self.amplitude * (2.0 * PI * x).cos();
        }
        Some(h)
    }

    fn name(&self) -> String {
        format!("cosine({},{})", self.level, self.amplitude)
    }
}

/// Visits every point of the grid `{0, 1/r, ..., (r−1)/r}^d`.
pub fn for_each_grid_point(dim: usize, resolution: usize, mut f: impl FnMut(&[f64])) {
    let total = resolution.pow(dim as u32);
    let mut idx = vec![0usize; dim];
    let mut xi = vec![0.0; dim];
    let shape = vec![resolution; dim];
    for flat in 0..total {
        crate::fourier::unflatten(flat, &shape, &mut idx);
        for j in 0..dim {
            xi[j] = idx[j] as f64 / resolution as f64;
        }
        f(&xi);
    }
}

const FD_STEP: f64 = 1e-4;

fn fd_gradient(s: &dyn SpectralDensity, xi: &[f64]) -> Vec<f64> {
    let mut p = xi.to_vec();
    (0..xi.len())
        .map(|j| {
            p[j] = xi[j] + FD_STEP;
            let up = s.value(&p);
            p[j] = xi[j] - FD_STEP;
            let down = s.value(&p);
            p[j] = xi[j];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn fd_hessian(s: &dyn SpectralDensity, xi: &[f64]) -> Vec<f64> {
    let d = xi.len();
    let h = FD_STEP;
    let mut p = xi.to_vec();
    let mut out = vec![0.0; d * d];
    let centre = s.value(xi);
    for j in 0..d {
        for k in j..d {
            let v = if j == k {
                p[j] = xi[j] + h;
                let up = s.value(&p);
                p[j] = xi[j] - h;
                let down = s.value(&p);
                p[j] = xi[j];
                (up - 2.0 * centre + down) / (h * h)
            } else {
                let mut eval = |sj: f64, sk: f64| {
                    p[j] = xi[j] + sj * h;
                    p[k] = xi[k] + sk * h;
                    let v = s.value(&p);
                    p[j] = xi[j];
                    p[k] = xi[k];
                    v
                };
                (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
            };
            out[j * d + k] = v;
            out[k * d + j] = v;
        }
    }
    out
}

/// `‖S‖_{C²}` estimated as the maximum over a `resolution^d` grid of `|S|`,
/// every `|∂_j S|` and every `|∂_j ∂_k S|`. Densities without analytic
/// derivatives fall back to central differences with step `1e-4`.
pub fn c2_norm(s: &dyn SpectralDensity, resolution: usize) -> f64 {
    let mut best = 0.0f64;
    for_each_grid_point(s.dim(), resolution.max(1), |xi| {
        best = best.max(s.value(xi).abs());
        let g = s.gradient(xi).unwrap_or_else(|| fd_gradient(s, xi));
        let h = s.hessian(xi).unwrap_or_else(|| fd_hessian(s, xi));
        best = g.iter().chain(&h).fold(best, |m, v| m.max(v.abs()));
    });
    best
}

/// `‖S‖_∞` over a `resolution^d` grid.
pub fn sup_norm(s: &dyn SpectralDensity, resolution: usize) -> f64 {
    let mut best = 0.0f64;
    for_each_grid_point(s.dim(), resolution.max(1), |xi| best = best.max(s.value(xi).abs()));
    best
}

/// Checks nonnegativity and evenness on a grid; returns the first violation.
pub fn validate(s: &dyn SpectralDensity, resolution: usize) -> Result<()> {
    let mut err = None;
    for_each_grid_point(s.dim(), resolution.max(1), |xi| {
        if err.is_some() {
            return;
        }
        let v = s.value(xi);
        let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
        if !v.is_finite() || v < 0.0 {
            err = Some(Error::InvalidInput(format!("density {} is negative ({v}) at {xi:?}", s.name())));
        } else if (s.value(&neg) - v).abs() > 1e-12 * v.abs().max(1.0) {
            err = Some(Error::InvalidInput(format!("density {} is not even at {xi:?}", s.name())));
        }
    });
    err.map_or(Ok(()), Err)
}

/// Resolves a registry string: `constant(c)`, `cosine(c,a)` or
/// `fano(d,M,tau,n)`. `dim` is the ambient dimension; a `fano` density must
/// agree with it.
pub fn parse_density(spec: &str, dim: usize) -> Result<Box<dyn SpectralDensity>> {
    let spec = spec.trim();
    let (name, args) = split_call(spec)?;
    let nums = |n: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = args
            .iter()
            .map(|a| a.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number `{a}` in `{spec}`"))))
            .collect::<Result<_>>()?;
        if v.len() != n {
            return Err(Error::InvalidInput(format!("`{name}` takes {n} arguments, got {}", v.len())));
        }
        Ok(v)
    };
    match name {
        "constant" => {
            let v = nums(1)?;
            Ok(Box::new(ConstantDensity { dim, level: v[0] }))
        }
        "cosine" => {
            let v = nums(2)?;
            Ok(Box::new(CosineDensity { dim, level: v[0], amplitude: v[1] }))
        }
        "fano" => {
            let v = nums(4)?;
            let d = v[0] as usize;
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: d });
            }
            let class = crate::fano::FanoClass::new(d, v[1] as usize, v[2])?;
            if v[2] >= class.tau_ceiling() {
                log::warn!("{spec}: C2 norm {:.3} exceeds 1 (tau ceiling {:.5})", class.c2_norm(), class.tau_ceiling());
            }
            Ok(Box::new(class.member(v[3] as usize)?))
        }
        other => Err(Error::InvalidInput(format!("unknown density `{other}`"))),
    }
}

/// Splits `name(a,b,...)` into the name and trimmed argument strings.
pub(crate) fn split_call(spec: &str) -> Result<(&str, Vec<&str>)> {
    let open = spec.find('(').ok_or_else(|| Error::InvalidInput(format!("expected `name(args)`, got `{spec}`")))?;
    if !spec.ends_with(')') {
        return Err(Error::InvalidInput(format!("missing `)` in `{spec}`")));
    }
    let name = spec[..open].trim();
    let inner = &spec[open + 1..spec.len() - 1];
    let args = if inner.trim().is_empty() { Vec::new() } else { inner.split(',').map(str::trim).collect() };
    Ok((name, args))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c2_norm_examples() {
        let c = ConstantDensity { dim: 1, level: 0.5 };
        assert_eq!(c2_norm(&c, 64), 0.5);
        let s = CosineDensity { dim: 1, level: 0.5, amplitude: 0.01 };
        assert!((c2_norm(&s, 1024) - 0.51).abs() < 1e-12);
        let s = CosineDensity { dim: 1, level: 0.5, amplitude: 0.02 };
        assert!((c2_norm(&s, 1024) - 4.0 * PI * PI * 0.02).abs() < 1e-12);
    }

    #[derive(Debug)]
    struct NoDerivatives(CosineDensity);

    impl SpectralDensity for NoDerivatives {
        fn dim(&self) -> usize {
            self.0.dim
        }
        fn value(&self, xi: &[f64]) -> f64 {
            self.0.value(xi)
        }
        fn name(&self) -> String {
            "plain".into()
        }
    }

    #[test]
    fn finite_difference_fallback() {
        let s = CosineDensity { dim: 2, level: 0.5, amplitude: 0.03 };
        let exact = c2_norm(&s, 64);
        let fd = c2_norm(&NoDerivatives(s), 64);
        assert!((exact - fd).abs() < 1e-5, "{exact} vs {fd}");
    }

    #[test]
    fn registry() {
        let s = parse_density("cosine(0.5, 0.1)", 1).unwrap();
        assert!((s.value(&[0.0]) - 0.6).abs() < 1e-15);
        assert_eq!(s.name(), "cosine(0.5,0.1)");
        assert!(parse_density("constant(0.5)", 3).unwrap().dim() == 3);
        assert!(parse_density("fano(1,4,0.02,1)", 1).is_ok());
        assert!(parse_density("fano(2,4,0.02,1)", 1).is_err());
        assert!(parse_density("gauss(1)", 1).is_err());
        assert!(parse_density("cosine(1)", 1).is_err());
        assert!(parse_density("constant", 1).is_err());
    }

    #[test]
    fn validation() {
        assert!(validate(&CosineDensity { dim: 1, level: 0.5, amplitude: 0.1 }, 256).is_ok());
        assert!(validate(&CosineDensity { dim: 1, level: 0.1, amplitude: 0.2 }, 256).is_err());
    }
}
