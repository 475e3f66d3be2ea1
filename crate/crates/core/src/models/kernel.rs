//! Correlation kernels of the determinantal (beta = 2) fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::special::{airy, bessel_j, bessel_j_prime};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Sine2,
    Ginibre,
    Airy2,
    Bessel2Alpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Only read for `Bessel2Alpha`.
    pub alpha: f64,
}

impl KernelSpec {
    pub fn sine() -> Self {
        KernelSpec { kind: KernelKind::Sine2, alpha: 0.0 }
    }

    pub fn ginibre() -> Self {
        KernelSpec { kind: KernelKind::Ginibre, alpha: 0.0 }
    }

    pub fn airy() -> Self {
        KernelSpec { kind: KernelKind::Airy2, alpha: 0.0 }
    }

    pub fn bessel(alpha: f64) -> Self {
        KernelSpec { kind: KernelKind::Bessel2Alpha, alpha }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            KernelKind::Ginibre => 2,
            _ => 1,
        }
    }

    /// K(x, y). Diagonal values are the analytic limits.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        kernel_eval(self, x, y)
    }

    /// K(x, x), i.e. the one-point intensity.
    pub fn diagonal(&self, x: &[f64]) -> Result<f64> {
        Ok(kernel_eval(self, x, x)?.re)
    }
}

pub fn kernel_eval(k: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Complex64> {
    let d = k.dim();
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "kernel {:?} takes {d}-vectors",
            k.kind
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DomainError("non-finite argument".into()));
    }
    let v = match k.kind {
        KernelKind::Sine2 => Complex64::new(sine_kernel(x[0] - y[0]), 0.0),
        KernelKind::Ginibre => ginibre_kernel(x, y),
        KernelKind::Airy2 => Complex64::new(airy_kernel(x[0], y[0]), 0.0),
        KernelKind::Bessel2Alpha => {
            if x[0] < 0.0 || y[0] < 0.0 {
                return Err(Error::DomainError(format!(
                    "Bessel kernel needs x, y >= 0, got ({}, {})",
                    x[0], y[0]
                )));
            }
            if k.alpha < 0.0 {
                return Err(Error::AlphaOutOfRange(k.alpha));
            }
            Complex64::new(bessel_kernel(k.alpha, x[0], y[0]), 0.0)
        }
    };
    Ok(v)
}

/// sin(pi u) / (pi u), equal to 1 at u = 0.
pub fn sine_kernel(u: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    let z = PI * u;
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

fn ginibre_kernel(x: &[f64], y: &[f64]) -> Complex64 {
    if x == y {
        return Complex64::new(1.0 / PI, 0.0);
    }
    // exp(-|x|^2/2 - |y|^2/2 + x conj(y)) = exp(-|x-y|^2/2 + i Im(x conj(y)))
    let (d1, d2) = (x[0] - y[0], x[1] - y[1]);
    let re = -0.5 * (d1 * d1 + d2 * d2);
    let im = x[1] * y[0] - x[0] * y[1];
    Complex64::from_polar(re.exp() / PI, im)
}

fn airy_kernel(x: f64, y: f64) -> f64 {
    if (x - y).abs() < 1e-7 * (1.0 + x.abs()) {
        let m = 0.5 * (x + y);
        let (a, ap) = airy(m);
        return ap * ap - m * a * a;
    }
    let (ax, apx) = airy(x);
    let (ay, apy) = airy(y);
    (ax * apy - apx * ay) / (x - y)
}

fn bessel_kernel(alpha: f64, x: f64, y: f64) -> f64 {
    if (x - y).abs() < 1e-7 * (1.0 + x.abs()) {
        let s = (0.5 * (x + y)).sqrt();
        let j = bessel_j(alpha, s);
        let lower = if alpha >= 1.0 {
            bessel_j(alpha - 1.0, s)
        } else {
            // J_{alpha-1} = (2 alpha / s) J_alpha - J_{alpha+1}
            if s == 0.0 {
                return if alpha == 0.0 { 0.25 } else { 0.0 };
            }
            2.0 * alpha / s * j - bessel_j(alpha + 1.0, s)
        };
        return 0.25 * (j * j - bessel_j(alpha + 1.0, s) * lower);
    }
    let (sx, sy) = (x.sqrt(), y.sqrt());
    let (jx, jy) = (bessel_j(alpha, sx), bessel_j(alpha, sy));
    let (dx, dy) = (bessel_j_prime(alpha, sx), bessel_j_prime(alpha, sy));
    (jx * sy * dy - sx * dx * jy) / (2.0 * (x - y))
}
