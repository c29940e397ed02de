//! Angular profiles θ ↦ f(cos θ, sin θ) of homogeneous integrands.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Mat2;

/// A closed-form angular profile. Implementors return the value and the
/// first two θ-derivatives; the profile must be 2π-periodic and positive.
pub trait ProfileFn: Send + Sync + fmt::Debug {
    fn jet(&self, theta: f64) -> [f64; 3];
}

#[derive(Clone, Debug)]
pub enum AngularProfile {
    /// f(η) = |η|^p.
    Isotropic,
    /// f(η) = ηᵀAη (only meaningful with p = 2).
    QuadraticForm(Mat2),
    /// Uniform samples with periodic cubic interpolation.
    Sampled(Arc<PeriodicSpline>),
    Closed(Arc<dyn ProfileFn>),
}

impl AngularProfile {
    #[inline]
    pub fn jet(&self, theta: f64) -> [f64; 3] {
        match self {
            AngularProfile::Isotropic => [1.0, 0.0, 0.0],
            AngularProfile::QuadraticForm(a) => {
                let (s, c) = theta.sin_cos();
                let (a11, b, a22) = (a.m[0][0], 0.5 * (a.m[0][1] + a.m[1][0]), a.m[1][1]);
                let g = a11 * c * c + 2.0 * b * c * s + a22 * s * s;
                let g1 = 2.0 * (a22 - a11) * c * s + 2.0 * b * (c * c - s * s);
                let g2 = 2.0 * (a22 - a11) * (c * c - s * s) - 8.0 * b * c * s;
                [g, g1, g2]
            }
            AngularProfile::Sampled(spline) => spline.jet(theta),
            AngularProfile::Closed(f) => f.jet(theta),
        }
    }

    #[inline]
    pub fn value(&self, theta: f64) -> f64 {
        match self {
            AngularProfile::Isotropic => 1.0,
            AngularProfile::Sampled(spline) => spline.value(theta),
            _ => self.jet(theta)[0],
        }
    }

    /// Reads a profile sample file: one value per line, uniformly spaced
    /// over [0, 2π). Blank lines and `#` comments are ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Parse(format!("profile line {}: `{line}`", lineno + 1)))?;
            values.push(v);
        }
        Ok(AngularProfile::Sampled(Arc::new(PeriodicSpline::new(values)?)))
    }

    /// Checks positivity and finiteness on `n` uniform angles; returns (min, max).
    pub(crate) fn bounds(&self, n: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let v = self.value(TAU * i as f64 / n as f64);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// Periodic C² cubic spline through uniform samples on [0, 2π).
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    second: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 8 {
            return Err(Error::input(format!("sampled profile needs at least 8 samples, got {n}")));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
            return Err(Error::input(format!("profile sample {i} = {v} is not strictly positive")));
        }
        let h = TAU / n as f64;
        // M[j-1] + 4 M[j] + M[j+1] = 6 (y[j+1] - 2 y[j] + y[j-1]) / h²
        let rhs: Vec<f64> = (0..n)
            .map(|j| 6.0 * (values[(j + 1) % n] - 2.0 * values[j] + values[(j + n - 1) % n]) / (h * h))
            .collect();
        let second = solve_cyclic_tridiagonal(1.0, 4.0, 1.0, &rhs);
        Ok(PeriodicSpline { values, second, h })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn locate(&self, theta: f64) -> (usize, usize, f64) {
        let n = self.values.len();
        let t = theta.rem_euclid(TAU) / self.h;
        let j = (t.floor() as usize).min(n - 1);
        let b = t - j as f64;
        (j, (j + 1) % n, b)
    }

    #[inline]
    pub fn value(&self, theta: f64) -> f64 {
        let (j, k, b) = self.locate(theta);
        let a = 1.0 - b;
        let h2 = self.h * self.h / 6.0;
        a * self.values[j]
            + b * self.values[k]
            + ((a * a * a - a) * self.second[j] + (b * b * b - b) * self.second[k]) * h2
    }

    #[inline]
    pub fn jet(&self, theta: f64) -> [f64; 3] {
        let (j, k, b) = self.locate(theta);
        let a = 1.0 - b;
        let h = self.h;
        let (yj, yk, mj, mk) = (self.values[j], self.values[k], self.second[j], self.second[k]);
        let v = a * yj + b * yk + ((a * a * a - a) * mj + (b * b * b - b) * mk) * h * h / 6.0;
        let d1 = (yk - yj) / h - (3.0 * a * a - 1.0) * h / 6.0 * mj + (3.0 * b * b - 1.0) * h / 6.0 * mk;
        let d2 = a * mj + b * mk;
        [v, d1, d2]
    }
}

/// Solves the cyclic system with constant bands (`sub`, `diag`, `sup`) by
/// Sherman–Morrison on top of the Thomas algorithm.
fn solve_cyclic_tridiagonal(sub: f64, diag: f64, sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -diag;
    let mut d = vec![diag; n];
    d[0] = diag - gamma;
    d[n - 1] = diag - sub * sup / gamma;
    let x = thomas(sub, &d, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sub;
    let z = thomas(sub, &d, sup, &u);
    let fact = (x[0] + sup * x[n - 1] / gamma) / (1.0 + z[0] + sup * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

fn thomas(sub: f64, diag: &[f64], sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    c[0] = sup / diag[0];
    x[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub * c[i - 1];
        c[i] = sup / m;
        x[i] = (rhs[i] - sub * x[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}
