//! Correlation-function and integration-by-parts estimators over ensembles.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::SampleEnsemble;
use crate::drift::{drift_eval, ShellSchedule};
use crate::error::{Error, Result};
use crate::models::{ball_volume, norm, Configuration, Family, PotentialModel, Window};

pub const MIN_ENSEMBLE: usize = 10;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bins {
    /// n equal bins of [lo, hi] on the line.
    Line { lo: f64, hi: f64, n: usize },
    /// n equal annuli r_min ≤ |x| < r_max around the origin.
    Radial { r_min: f64, r_max: f64, n: usize },
}

impl Bins {
    fn n(&self) -> usize {
        match self {
            Bins::Line { n, .. } | Bins::Radial { n, .. } => *n,
        }
    }

    fn edges(&self) -> (f64, f64) {
        match self {
            Bins::Line { lo, hi, .. } => (*lo, *hi),
            Bins::Radial { r_min, r_max, .. } => (*r_min, *r_max),
        }
    }

    fn index(&self, x: &[f64]) -> Option<usize> {
        let v = match self {
            Bins::Line { .. } => x[0],
            Bins::Radial { .. } => norm(x),
        };
        let (a, b) = self.edges();
        if !(v >= a && v < b) {
            return None;
        }
        Some((((v - a) / (b - a)) * self.n() as f64).min(self.n() as f64 - 1.0) as usize)
    }

    fn centers(&self) -> Vec<f64> {
        let (a, b) = self.edges();
        let h = (b - a) / self.n() as f64;
        (0..self.n()).map(|i| a + (i as f64 + 0.5) * h).collect()
    }

    fn volumes(&self, d: usize) -> Vec<f64> {
        let (a, b) = self.edges();
        let h = (b - a) / self.n() as f64;
        (0..self.n())
            .map(|i| match self {
                Bins::Line { .. } => h,
                Bins::Radial { .. } => {
                    ball_volume(d, a + (i + 1) as f64 * h) - ball_volume(d, a + i as f64 * h)
                }
            })
            .collect()
    }

    fn validate(&self, w: &Window) -> Result<()> {
        let (a, b) = self.edges();
        if self.n() == 0 || !(b > a) {
            return Err(Error::InvalidParameter { name: "bins", reason: format!("{self:?}") });
        }
        let inside = match self {
            Bins::Line { lo, hi, .. } => w.dim() == 1 && w.contains(&[*lo]) && w.contains(&[*hi]),
            Bins::Radial { r_max, r_min, .. } => {
                let o = vec![0.0; w.dim()];
                *r_min >= 0.0 && w.contains(&o) && w.distance_to_boundary(&o) >= *r_max
            }
        };
        if !inside {
            return Err(Error::UnsupportedBins(format!("{self:?} is not inside {w:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub order: usize,
    /// Bin centers; for order 2 the pairs (x, y) in row-major order.
    pub grid: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Ensemble mean of per-configuration statistics and the bootstrap
/// standard error of that mean.
fn mean_and_bootstrap(stats: &[Vec<f64>], seed: u64) -> (Vec<f64>, Vec<f64>) {
    let n = stats.len();
    let m = stats[0].len();
    let mean_of = |idx: &mut dyn Iterator<Item = usize>| {
        let mut acc = vec![0.0; m];
        for i in idx {
            for (a, v) in acc.iter_mut().zip(&stats[i]) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        acc
    };
    let mean = mean_of(&mut (0..n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b007);
    let draws: Vec<Vec<usize>> =
        (0..BOOTSTRAP_RESAMPLES).map(|_| (0..n).map(|_| rng.random_range(0..n)).collect()).collect();
    let boots: Vec<Vec<f64>> =
        draws.par_iter().map(|d| mean_of(&mut d.iter().copied())).collect();
    let stderr = (0..m)
        .map(|k| {
            let mu = boots.iter().map(|b| b[k]).sum::<f64>() / boots.len() as f64;
            (boots.iter().map(|b| (b[k] - mu).powi(2)).sum::<f64>() / (boots.len() - 1) as f64).sqrt()
        })
        .collect();
    (mean, stderr)
}

/// Binned estimate of ρ¹ or (for 1-d line bins) ρ², with bootstrap errors.
pub fn estimate_rho_k(e: &SampleEnsemble, k: usize, bins: &Bins) -> Result<CorrelationEstimate> {
    if e.len() < MIN_ENSEMBLE {
        return Err(Error::InsufficientSamples { needed: MIN_ENSEMBLE, got: e.len() });
    }
    bins.validate(e.window())?;
    let nb = bins.n();
    let centers = bins.centers();
    let vol = bins.volumes(e.dim());
    let stats: Vec<Vec<f64>> = match k {
        1 => e
            .configs
            .par_iter()
            .map(|c| {
                let mut s = vec![0.0; nb];
                for p in c.points() {
                    if let Some(i) = bins.index(p) {
                        s[i] += 1.0 / vol[i];
                    }
                }
                s
            })
            .collect(),
        2 => {
            if !matches!(bins, Bins::Line { .. }) {
                return Err(Error::UnsupportedBins("pair correlations need line bins".into()));
            }
            e.configs
                .par_iter()
                .map(|c| {
                    let idx: Vec<usize> = c.points().filter_map(|p| bins.index(p)).collect();
                    let mut s = vec![0.0; nb * nb];
                    for (a, &i) in idx.iter().enumerate() {
                        for &j in &idx[a + 1..] {
                            let v = 1.0 / (vol[i] * vol[j]);
                            s[i * nb + j] += v;
                            s[j * nb + i] += v;
                        }
                    }
                    s
                })
                .collect()
        }
        _ => return Err(Error::UnsupportedBins(format!("order {k}"))),
    };
    let (values, stderr) = mean_and_bootstrap(&stats, e.seed);
    let grid = if k == 1 {
        centers.iter().map(|c| vec![*c]).collect()
    } else {
        centers.iter().flat_map(|x| centers.iter().map(move |y| vec![*x, *y])).collect()
    };
    Ok(CorrelationEstimate { order: k, grid, values, stderr })
}

/// exp(-1/(1-t²)) on |t| < 1 and its derivative.
fn bump(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - t * t;
    let b = (-1.0 / s).exp();
    (b, b * (-2.0 * t / (s * s)))
}

/// Smooth compactly supported test functions φ(x; η) with a direction e;
/// the identity checked is E Σ_x [d^μ(x)·e φ + ∂_e φ] = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero,
    /// f(x) = bump(|x - center| / radius).
    Bump { center: Vec<f64>, radius: f64, direction: Vec<f64> },
    /// f(x) Σ_y g(x - y) with g(u) = (u·e) bump(|u| / width).
    PairBump { center: Vec<f64>, radius: f64, width: f64, direction: Vec<f64> },
}

impl TestFunction {
    /// Center and radius of the x-support, and the reach of the y-dependence.
    fn support(&self) -> Option<(&[f64], f64, f64)> {
        match self {
            TestFunction::Zero => None,
            TestFunction::Bump { center, radius, .. } => Some((center, *radius, 0.0)),
            TestFunction::PairBump { center, radius, width, .. } => Some((center, *radius, *width)),
        }
    }

    fn direction(&self) -> &[f64] {
        match self {
            TestFunction::Zero => &[],
            TestFunction::Bump { direction, .. } | TestFunction::PairBump { direction, .. } => direction,
        }
    }

    /// (φ, ∂_e φ) at point i of c.
    fn eval(&self, c: &Configuration, i: usize) -> (f64, f64) {
        let Some((center, radius, _)) = self.support() else {
            return (0.0, 0.0);
        };
        let e = self.direction();
        let x = c.point(i);
        let w = c.window();
        let d = x.len();
        let mut u = vec![0.0; d];
        w.displacement(x, center, &mut u);
        let r = norm(&u);
        let (f, fp) = bump(r / radius);
        let df = if r > 0.0 { fp / radius * dot(&u, e) / r } else { 0.0 };
        match self {
            TestFunction::Zero => (0.0, 0.0),
            TestFunction::Bump { .. } => (f, df),
            TestFunction::PairBump { width, .. } => {
                if f == 0.0 && df == 0.0 {
                    return (0.0, 0.0);
                }
                let ee = dot(e, e);
                let (mut g, mut dg) = (0.0, 0.0);
                for j in 0..c.len() {
                    if j == i {
                        continue;
                    }
                    w.displacement(x, c.point(j), &mut u);
                    let s = norm(&u);
                    let (b, bp) = bump(s / width);
                    if b == 0.0 {
                        continue;
                    }
                    let ue = dot(&u, e);
                    g += ue * b;
                    dg += b * ee + ue * bp / width * ue / s;
                }
                (f * g, df * g + f * dg)
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbpOptions {
    pub shells: ShellSchedule,
    /// Multiplies d^μ; 1 for the identity, 2 for the negative control.
    pub drift_scale: f64,
}

impl Default for IbpOptions {
    fn default() -> Self {
        IbpOptions { shells: ShellSchedule::default(), drift_scale: 1.0 }
    }
}

/// Whether the drift of `m` sums over shells centered at the origin.
fn origin_shells(m: &PotentialModel) -> bool {
    matches!(m.family, Family::GinibreGauge | Family::AiryBeta)
}

/// Monte-Carlo estimate of E Σ_x [d^μ(x)·e φ(x) + ∂_e φ(x)] and its
/// standard error, with d^μ = 2b from the drift module.
pub fn ibp_residual(
    e: &SampleEnsemble,
    m: &PotentialModel,
    testfn: &TestFunction,
    opts: &IbpOptions,
) -> Result<(f64, f64)> {
    let Some((center, radius, reach)) = testfn.support() else {
        return Ok((0.0, 0.0));
    };
    let dir = testfn.direction();
    if center.len() != e.dim() || dir.len() != e.dim() || m.dim != e.dim() {
        return Err(Error::DimensionMismatch("test function, model and ensemble dims".into()));
    }
    let w = e.window();
    if !w.is_periodic() {
        let margin = w.distance_to_boundary(center);
        let drift_reach = if origin_shells(m) {
            let o = vec![0.0; e.dim()];
            if norm(center) + radius > opts.shells.outer()
                || opts.shells.outer() > w.distance_to_boundary(&o)
            {
                return Err(Error::SupportViolation(format!(
                    "support must lie in S_{} inside the window",
                    opts.shells.outer()
                )));
            }
            0.0
        } else {
            opts.shells.outer()
        };
        if radius + reach.max(drift_reach) > margin {
            return Err(Error::SupportViolation(format!(
                "support of radius {radius} at {center:?} plus margin {} leaves the window",
                reach.max(drift_reach)
            )));
        }
    }
    let stats: Vec<f64> = e
        .configs
        .par_iter()
        .map(|c| -> Result<f64> {
            let mut s = 0.0;
            for i in 0..c.len() {
                let (phi, dphi) = testfn.eval(c, i);
                if phi == 0.0 && dphi == 0.0 {
                    continue;
                }
                let b = drift_eval(m, c.point(i), c, &opts.shells, Some(i))?;
                s += 2.0 * opts.drift_scale * dot(&b.value, dir) * phi + dphi;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let sd = if stats.len() > 1 {
        (stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok((mean, sd / n.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointfields::{sample_ensemble, Sampler};

    fn poisson(n: usize, lo: f64, hi: f64) -> SampleEnsemble {
        let s = Sampler::Poisson { intensity: 1.0, window: Window::Interval { lo, hi } };
        sample_ensemble(&s, n, 3).unwrap()
    }

    #[test]
    fn needs_ten_configurations() {
        let e = poisson(9, 0.0, 10.0);
        let b = Bins::Line { lo: 1.0, hi: 9.0, n: 4 };
        assert!(matches!(
            estimate_rho_k(&e, 1, &b),
            Err(Error::InsufficientSamples { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn poisson_pair_correlation_is_flat() {
        let e = poisson(400, 0.0, 10.0);
        let b = Bins::Line { lo: 1.0, hi: 9.0, n: 4 };
        let r1 = estimate_rho_k(&e, 1, &b).unwrap();
        for (v, s) in r1.values.iter().zip(&r1.stderr) {
            assert!((v - 1.0).abs() <= 3.0 * s, "{v} ± {s}");
        }
        let r2 = estimate_rho_k(&e, 2, &b).unwrap();
        assert_eq!(r2.values.len(), 16);
        let mut outliers = 0;
        for (v, s) in r2.values.iter().zip(&r2.stderr) {
            outliers += ((v - 1.0).abs() > 3.0 * s) as usize;
        }
        assert!(outliers <= 1);
        for a in 0..4 {
            for c in 0..4 {
                assert_eq!(r2.values[a * 4 + c], r2.values[c * 4 + a]);
            }
        }
    }

    #[test]
    fn bins_must_fit_the_window() {
        let e = poisson(10, 0.0, 10.0);
        assert!(estimate_rho_k(&e, 1, &Bins::Line { lo: -1.0, hi: 9.0, n: 4 }).is_err());
        assert!(estimate_rho_k(&e, 3, &Bins::Line { lo: 1.0, hi: 9.0, n: 4 }).is_err());
    }

    #[test]
    fn zero_test_function_gives_zero() {
        let e = poisson(10, 0.0, 10.0);
        let m = PotentialModel::sine(2.0);
        let r = ibp_residual(&e, &m, &TestFunction::Zero, &IbpOptions::default()).unwrap();
        assert_eq!(r, (0.0, 0.0));
    }

    #[test]
    fn poisson_without_interaction_has_zero_residual() {
        let e = poisson(2000, 0.0, 10.0);
        let m = crate::models::build_model(&crate::models::ModelSpec::new("lj", 0.0).dim(1)).unwrap();
        let f = TestFunction::Bump { center: vec![5.0], radius: 2.0, direction: vec![1.0] };
        let opts = IbpOptions { shells: ShellSchedule::new(vec![0.5, 1.0, 2.0], 1e-3).unwrap(), drift_scale: 1.0 };
        let (r, s) = ibp_residual(&e, &m, &f, &opts).unwrap();
        assert!(r.abs() <= 3.0 * s, "{r} ± {s}");
        let far = TestFunction::Bump { center: vec![9.0], radius: 2.0, direction: vec![1.0] };
        assert!(matches!(ibp_residual(&e, &m, &far, &opts), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn bump_derivative_matches_finite_difference() {
        for t in [-0.9, -0.3, 0.0, 0.4, 0.95] {
            let h = 1e-6;
            let fd = (bump(t + h).0 - bump(t - h).0) / (2.0 * h);
            assert!((fd - bump(t).1).abs() < 1e-6);
        }
    }
}
