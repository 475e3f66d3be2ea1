//! Determinantal point fields on bounded windows by spectral (HKPV)
//! sampling: keep eigenfunction k with probability λ_k, then draw the
//! projection field of the kept functions point by point.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};
use std::f64::consts::PI;

use super::linalg::sym_eigen;
use crate::error::{Error, Result};
use crate::models::{sine_kernel, Configuration, KernelKind, KernelSpec, Window};
use crate::quad::gauss_legendre;

/// Eigenvalues below this are dropped.
pub const EIGEN_DROP: f64 = 1e-6;
/// Allowed excursion of discretized eigenvalues outside [0, 1].
pub const EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DppOptions {
    /// Gauss-Legendre nodes per unit length for the Nyström discretization.
    pub nodes_per_unit: usize,
}

impl Default for DppOptions {
    fn default() -> Self {
        DppOptions { nodes_per_unit: 8 }
    }
}

#[derive(Debug, Clone)]
enum Basis {
    /// Nyström eigenvectors of the sine kernel on panels of a line segment.
    Line {
        lo: f64,
        panel: f64,
        q: usize,
        /// Reference nodes on [0, 1] and barycentric weights.
        ref_nodes: Vec<f64>,
        bary: Vec<f64>,
        /// values[k][node] = φ_k at the global node.
        values: Vec<Vec<f64>>,
    },
    /// z^k e^{-|z|²/2} / sqrt(π k! P(k+1, R²)) on the disk of radius R.
    Disk { log_norm: Vec<f64> },
}

/// Eigendecomposition of a kernel on a window, reusable across draws.
#[derive(Debug, Clone)]
pub struct DppSampler {
    window: Window,
    eigenvalues: Vec<f64>,
    basis: Basis,
    /// Upper bound on Σ_k |φ_k(x)|² over the window.
    bound: f64,
}

impl DppSampler {
    pub fn new(kernel: &KernelSpec, window: &Window, opts: &DppOptions) -> Result<Self> {
        match (kernel.kind, window) {
            (KernelKind::Sine2, Window::Interval { lo, hi }) => Self::line(*lo, *hi, opts),
            (KernelKind::Ginibre, Window::Ball { center, radius }) => {
                if center.iter().any(|c| *c != 0.0) || center.len() != 2 {
                    return Err(Error::InvalidParameter {
                        name: "window",
                        reason: "Ginibre sampling needs a disk centered at the origin".into(),
                    });
                }
                Ok(Self::disk(*radius))
            }
            (KernelKind::Airy2 | KernelKind::Bessel2Alpha, _) => Err(Error::InvalidParameter {
                name: "kernel",
                reason: "no sampler for the Airy and Bessel fields".into(),
            }),
            _ => Err(Error::InvalidParameter {
                name: "window",
                reason: format!("{:?} kernel cannot be sampled on {window:?}", kernel.kind),
            }),
        }
    }

    fn line(lo: f64, hi: f64, opts: &DppOptions) -> Result<Self> {
        let window = Window::Interval { lo, hi };
        let len = hi - lo;
        if !(len > 0.0) {
            return Ok(DppSampler {
                window,
                eigenvalues: Vec::new(),
                basis: Basis::Line {
                    lo,
                    panel: 0.0,
                    q: 0,
                    ref_nodes: Vec::new(),
                    bary: Vec::new(),
                    values: Vec::new(),
                },
                bound: 0.0,
            });
        }
        let q = 8;
        let panels = ((len * opts.nodes_per_unit as f64) / q as f64).ceil().max(1.0) as usize;
        let panel = len / panels as f64;
        let (gx, gw) = gauss_legendre(q);
        let ref_nodes: Vec<f64> = gx.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let n = panels * q;
        let mut x = Vec::with_capacity(n);
        let mut sw = Vec::with_capacity(n);
        for p in 0..panels {
            for k in 0..q {
                x.push(lo + panel * (p as f64 + ref_nodes[k]));
                sw.push((0.5 * gw[k] * panel).sqrt());
            }
        }
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                let v = sw[i] * sine_kernel(x[i] - x[j]) * sw[j];
                a[j * n + i] = v;
                a[i * n + j] = v;
            }
        }
        let (w, v) = sym_eigen(a, n)?;
        if let Some(bad) = w.iter().find(|l| **l < -EIGEN_TOL || **l > 1.0 + EIGEN_TOL) {
            return Err(Error::EigenFailure { eigenvalue: *bad });
        }
        let mut eigenvalues = Vec::new();
        let mut values = Vec::new();
        for k in (0..n).rev() {
            if w[k] < EIGEN_DROP {
                break;
            }
            eigenvalues.push(w[k].min(1.0));
            values.push((0..n).map(|i| v[k * n + i] / sw[i]).collect::<Vec<f64>>());
        }
        let mut bary = vec![1.0; q];
        for j in 0..q {
            for k in 0..q {
                if k != j {
                    bary[j] /= ref_nodes[j] - ref_nodes[k];
                }
            }
        }
        let mut s = DppSampler {
            window,
            eigenvalues,
            basis: Basis::Line { lo, panel, q, ref_nodes, bary, values },
            bound: 0.0,
        };
        // Σ|φ_k|² over all kept functions, on a grid 8× finer than the nodes.
        let all: Vec<usize> = (0..s.eigenvalues.len()).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); all.len()];
        let probes = 8 * n;
        let mut m: f64 = 0.0;
        for t in 0..=probes {
            let y = lo + len * t as f64 / probes as f64;
            s.eval(&[y], &all, &mut buf);
            m = m.max(buf.iter().map(|c| c.norm_sqr()).sum());
        }
        s.bound = 1.1 * m;
        Ok(s)
    }

    fn disk(radius: f64) -> Self {
        let window = Window::Ball { center: vec![0.0, 0.0], radius };
        let r2 = radius * radius;
        let mut eigenvalues = Vec::new();
        let mut log_norm = Vec::new();
        if radius > 0.0 {
            for k in 0.. {
                let lam = gamma_lr(k as f64 + 1.0, r2);
                if lam < EIGEN_DROP {
                    if (k as f64) > r2 {
                        break;
                    }
                    continue;
                }
                eigenvalues.push(lam);
                log_norm.push(-0.5 * (PI.ln() + ln_gamma(k as f64 + 1.0) + lam.ln()));
            }
        }
        let mut s = DppSampler {
            window,
            eigenvalues,
            basis: Basis::Disk { log_norm },
            bound: 0.0,
        };
        let all: Vec<usize> = (0..s.eigenvalues.len()).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); all.len()];
        let mut m: f64 = 0.0;
        for t in 0..=4000 {
            let r = radius * t as f64 / 4000.0;
            s.eval(&[r, 0.0], &all, &mut buf);
            m = m.max(buf.iter().map(|c| c.norm_sqr()).sum());
        }
        s.bound = 1.1 * m;
        s
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Expected number of points, Σ λ_k.
    pub fn expected_count(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    fn eval(&self, x: &[f64], sel: &[usize], out: &mut [Complex64]) {
        match &self.basis {
            Basis::Line { lo, panel, q, ref_nodes, bary, values } => {
                let t = (x[0] - lo) / panel;
                let npan = values.first().map_or(1, |v| v.len() / q);
                let p = (t.floor().max(0.0) as usize).min(npan - 1);
                let s = t - p as f64;
                let mut coef = vec![0.0; *q];
                if let Some(hit) = ref_nodes.iter().position(|r| *r == s) {
                    coef[hit] = 1.0;
                } else {
                    let mut den = 0.0;
                    for j in 0..*q {
                        coef[j] = bary[j] / (s - ref_nodes[j]);
                        den += coef[j];
                    }
                    for c in &mut coef {
                        *c /= den;
                    }
                }
                for (o, &k) in out.iter_mut().zip(sel) {
                    let v = &values[k][p * q..(p + 1) * q];
                    let val: f64 = v.iter().zip(&coef).map(|(a, b)| a * b).sum();
                    *o = Complex64::new(val, 0.0);
                }
            }
            Basis::Disk { log_norm, .. } => {
                let z = Complex64::new(x[0], x[1]);
                let r2 = z.norm_sqr();
                let (lr, th) = (z.norm().ln(), z.arg());
                for (o, &k) in out.iter_mut().zip(sel) {
                    let kf = k as f64;
                    let lm = if r2 == 0.0 {
                        if k == 0 { -0.0 } else { f64::NEG_INFINITY }
                    } else {
                        kf * lr
                    };
                    let mag = (lm - 0.5 * r2 + log_norm[k]).exp();
                    *o = Complex64::from_polar(mag, kf * th);
                }
            }
        }
    }

    fn propose(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.window {
            Window::Interval { lo, hi } => vec![rng.random_range(*lo..*hi)],
            Window::Ball { radius, .. } => loop {
                let x = rng.random_range(-*radius..*radius);
                let y = rng.random_range(-*radius..*radius);
                if x * x + y * y <= radius * radius {
                    break vec![x, y];
                }
            },
            _ => unreachable!("sampler windows are intervals or disks"),
        }
    }

    /// One draw.
    pub fn sample(&self, seed: u64) -> Result<Configuration> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sel: Vec<usize> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| rng.random::<f64>() < **l)
            .map(|(k, _)| k)
            .collect();
        let n = sel.len();
        let d = self.window.dim();
        let mut coords = Vec::with_capacity(n * d);
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        let mut phi = vec![Complex64::new(0.0, 0.0); n];
        let mut bound = self.bound;
        while basis.len() < n {
            let x = self.propose(&mut rng);
            self.eval(&x, &sel, &mut phi);
            let mut resid: Vec<Complex64> = phi.clone();
            for e in &basis {
                let c: Complex64 = e.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
                for (r, a) in resid.iter_mut().zip(e) {
                    *r -= c * a;
                }
            }
            let q: f64 = resid.iter().map(|c| c.norm_sqr()).sum();
            if q > bound {
                bound = 1.25 * q;
            }
            if rng.random::<f64>() * bound < q {
                let norm = q.sqrt();
                basis.push(resid.iter().map(|c| c / norm).collect());
                coords.extend_from_slice(&x);
            }
        }
        Configuration::new(d, coords, self.window.clone())
    }
}

/// One draw of the determinantal field with kernel `k` on `window`.
pub fn sample_dpp(k: &KernelSpec, window: &Window, seed: u64) -> Result<Configuration> {
    DppSampler::new(k, window, &DppOptions::default())?.sample(seed)
}
