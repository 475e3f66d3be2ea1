//! ISDE drift terms: shell-truncated sums for the log gases, the Airy
//! compensator, both Ginibre gauges, and absolutely convergent Ruelle sums.
//!
//! All drifts use σ = identity, so b = d^μ / 2.

mod shells;

pub use shells::{shell_partition, ShellPartition, ShellSchedule};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::models::{norm, Configuration, Family, PotentialModel};

/// Compensated accumulator for d-vectors.
#[derive(Debug, Clone)]
pub(crate) struct Kahan {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl Kahan {
    pub(crate) fn new(d: usize) -> Self {
        Kahan { sum: vec![0.0; d], comp: vec![0.0; d] }
    }

    #[inline]
    pub(crate) fn add(&mut self, v: &[f64]) {
        for k in 0..v.len() {
            let y = v[k] - self.comp[k];
            let t = self.sum[k] + y;
            self.comp[k] = (t - self.sum[k]) - y;
            self.sum[k] = t;
        }
    }

    pub(crate) fn value(&self) -> &[f64] {
        &self.sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftValue {
    pub value: Vec<f64>,
    /// Cumulative sums through shell 1, ..., K.
    pub partials: Vec<Vec<f64>>,
    pub converged: bool,
    /// |partials[K] - partials[K-1]|.
    pub last_delta: f64,
    /// For absolutely convergent sums: Σ |term| over points beyond r_K.
    pub tail_mass: Option<f64>,
}

impl DriftValue {
    fn from_partials(partials: Vec<Vec<f64>>, tol: f64) -> Self {
        let k = partials.len();
        let last = &partials[k - 1];
        let delta: Vec<f64> = last.iter().zip(&partials[k - 2]).map(|(a, b)| a - b).collect();
        let last_delta = norm(&delta);
        DriftValue {
            value: last.clone(),
            converged: last_delta <= tol * (1.0 + norm(last)),
            last_delta,
            partials: partials.clone(),
            tail_mass: None,
        }
    }
}

/// Pair summand f(u), u = x - s, of the drift; odd in u.
#[inline]
pub fn pair_drift_term(m: &PotentialModel, u: &[f64], out: &mut [f64]) {
    let half_beta = 0.5 * m.beta;
    if m.family.is_log_gas() {
        if u.len() == 1 {
            out[0] = half_beta * (1.0 / u[0]);
        } else {
            let r2: f64 = u.iter().map(|v| v * v).sum();
            for k in 0..u.len() {
                out[k] = half_beta * u[k] / r2;
            }
        }
    } else {
        let r = norm(u);
        let g = -half_beta * m.radial(r).1 / r;
        for k in 0..u.len() {
            out[k] = g * u[k];
        }
    }
}

fn check_point(m: &PotentialModel, x: &[f64], c: &Configuration) -> Result<()> {
    if x.len() != m.dim || c.dim() != m.dim {
        return Err(Error::DimensionMismatch(format!(
            "model dim {}, point dim {}, configuration dim {}",
            m.dim,
            x.len(),
            c.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DomainError("non-finite evaluation point".into()));
    }
    Ok(())
}

/// Index of a configuration point other than `exclude` that sits on x.
fn coincident(x: &[f64], c: &Configuration, exclude: Option<usize>) -> Option<(usize, f64)> {
    let w = c.window();
    let gap = 4.0 * f64::EPSILON * (1.0 + norm(x));
    c.points()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .map(|(j, p)| (j, w.distance(x, p)))
        .find(|(_, d)| *d <= gap)
}

/// Cumulative shell sums of the pair term around `center`, starting from
/// `offset`, minus `compensator(r_k)` at each radius.
fn shell_sums(
    m: &PotentialModel,
    x: &[f64],
    c: &Configuration,
    center: &[f64],
    s: &ShellSchedule,
    exclude: Option<usize>,
    offset: &[f64],
    compensator: impl Fn(f64) -> f64,
) -> Vec<Vec<f64>> {
    let d = x.len();
    let part = shell_partition(c, center, s);
    let w = c.window();
    let mut u = vec![0.0; d];
    let mut term = vec![0.0; d];
    let mut running = offset.to_vec();
    let mut partials = Vec::with_capacity(s.len());
    for (k, idx) in part.shells.iter().enumerate() {
        let mut acc = Kahan::new(d);
        for &j in idx {
            if Some(j) == exclude {
                continue;
            }
            w.displacement(x, c.point(j), &mut u);
            pair_drift_term(m, &u, &mut term);
            acc.add(&term);
        }
        for (r, a) in running.iter_mut().zip(acc.value()) {
            *r += a;
        }
        let comp = compensator(s.radii()[k]);
        let mut p = running.clone();
        p[0] -= comp;
        partials.push(p);
    }
    partials
}

/// A shell of radius > 0.8 × window inradius sees the window edge.
fn window_limited(c: &Configuration, s: &ShellSchedule) -> bool {
    let r = c.window().radius();
    r.is_finite() && s.outer() > 0.8 * r
}

/// b(x, c) for the model, with per-shell diagnostics. `exclude` is the label
/// of x itself when x is a point of c.
pub fn drift_eval(
    m: &PotentialModel,
    x: &[f64],
    c: &Configuration,
    s: &ShellSchedule,
    exclude: Option<usize>,
) -> Result<DriftValue> {
    check_point(m, x, c)?;
    match m.family {
        Family::SineBeta | Family::Bessel => {
            let mut offset = vec![0.0];
            if m.family == Family::Bessel {
                if !(x[0] > 0.0) {
                    return Err(Error::BoundaryViolation(x[0]));
                }
                offset[0] = 0.5 * m.beta * (m.alpha / (2.0 * x[0]));
            }
            if let Some((index, _)) = coincident(x, c, exclude) {
                return Err(Error::SelfPointUnresolved { index });
            }
            let partials = shell_sums(m, x, c, x, s, exclude, &offset, |_| 0.0);
            let mut v = DriftValue::from_partials(partials, s.tol());
            if window_limited(c, s) {
                v.converged = false;
            }
            Ok(v)
        }
        Family::AiryBeta => airy_drift(x[0], c, s, m.beta, exclude),
        Family::GinibreCentered => Ok(ginibre_drift_pair(x, c, s, exclude)?.0),
        Family::GinibreGauge => Ok(ginibre_drift_pair(x, c, s, exclude)?.1),
        Family::LennardJones612 | Family::RieszA | Family::CustomRuelle => {
            ruelle_drift(m, x, c, s, exclude)
        }
    }
}

/// Drifts at every point of c, each excluding itself.
pub fn drift_batch(
    m: &PotentialModel,
    c: &Configuration,
    s: &ShellSchedule,
) -> Result<Vec<DriftValue>> {
    (0..c.len())
        .into_par_iter()
        .map(|i| drift_eval(m, c.point(i), c, s, Some(i)))
        .collect()
}

/// (β/2) ∫_{|u|<r} ϱ̂(u)/(-u) du with ϱ̂(u) = 1_{u<0} √(-u)/π, i.e. (β/2)·2√r/π.
pub fn airy_compensator(r: f64, beta: f64) -> f64 {
    if !(r > 0.0) {
        return 0.0;
    }
    0.5 * beta * (2.0 * r.sqrt() / PI)
}

/// (β/2)[Σ_{|s_i|<r} 1/(x - s_i) - ∫_{|u|<r} ϱ̂(u)/(-u) du] along the schedule.
pub fn airy_drift(
    x: f64,
    c: &Configuration,
    s: &ShellSchedule,
    beta: f64,
    exclude: Option<usize>,
) -> Result<DriftValue> {
    if c.dim() != 1 {
        return Err(Error::DimensionMismatch("airy drift needs a 1-d configuration".into()));
    }
    if !x.is_finite() {
        return Err(Error::DomainError("non-finite evaluation point".into()));
    }
    if let Some((index, _)) = coincident(&[x], c, exclude) {
        return Err(Error::SelfPointUnresolved { index });
    }
    let m = PotentialModel {
        family: Family::AiryBeta,
        beta,
        alpha: 0.0,
        a_exp: 0,
        dim: 1,
        domain: crate::models::Domain::FullSpace,
        pair_table: None,
    };
    let partials =
        shell_sums(&m, &[x], c, &[0.0], s, exclude, &[0.0], |r| airy_compensator(r, beta));
    let mut v = DriftValue::from_partials(partials, s.tol());
    if window_limited(c, s) {
        v.converged = false;
    }
    Ok(v)
}

/// The two Ginibre drifts: b1 sums over |x - s| < r, b2 = -x + sum over |s| < r.
pub fn ginibre_drift_pair(
    x: &[f64],
    c: &Configuration,
    s: &ShellSchedule,
    exclude: Option<usize>,
) -> Result<(DriftValue, DriftValue)> {
    let m = PotentialModel::ginibre();
    check_point(&m, x, c)?;
    if let Some((index, _)) = coincident(x, c, exclude) {
        return Err(Error::SelfPointUnresolved { index });
    }
    let limited = window_limited(c, s);
    let p1 = shell_sums(&m, x, c, x, s, exclude, &[0.0, 0.0], |_| 0.0);
    let neg_x = [-x[0], -x[1]];
    let p2 = shell_sums(&m, x, c, &[0.0, 0.0], s, exclude, &neg_x, |_| 0.0);
    let mut b1 = DriftValue::from_partials(p1, s.tol());
    let mut b2 = DriftValue::from_partials(p2, s.tol());
    if limited {
        b1.converged = false;
        b2.converged = false;
    }
    Ok((b1, b2))
}

/// -(β/2) Σ ∇Ψ₀(x - s_i) over all points. Shell partials are reported with
/// the points beyond r_K folded into the last shell.
pub fn ruelle_drift(
    m: &PotentialModel,
    x: &[f64],
    c: &Configuration,
    s: &ShellSchedule,
    exclude: Option<usize>,
) -> Result<DriftValue> {
    if !m.family.is_ruelle() {
        return Err(Error::InvalidParameter {
            name: "family",
            reason: format!("{} is not a Ruelle-class model", m.family),
        });
    }
    check_point(m, x, c)?;
    if let Some((j, distance)) = coincident(x, c, exclude) {
        return Err(Error::SingularOverlap { i: exclude.unwrap_or(j), j, distance });
    }
    let d = x.len();
    let part = shell_partition(c, x, s);
    let w = c.window();
    let mut u = vec![0.0; d];
    let mut term = vec![0.0; d];
    let mut running = vec![0.0; d];
    let mut partials = Vec::with_capacity(s.len());
    let mut tail_mass = 0.0;
    let k_last = s.len() - 1;
    for (k, idx) in part.shells.iter().enumerate() {
        let mut acc = Kahan::new(d);
        let extra: &[usize] = if k == k_last { &part.outside } else { &[] };
        for &j in idx.iter().chain(extra) {
            if Some(j) == exclude {
                continue;
            }
            w.displacement(x, c.point(j), &mut u);
            pair_drift_term(m, &u, &mut term);
            acc.add(&term);
            if k == k_last && !idx.contains(&j) {
                tail_mass += norm(&term);
            }
        }
        for (r, a) in running.iter_mut().zip(acc.value()) {
            *r += a;
        }
        partials.push(running.clone());
    }
    let mut v = DriftValue::from_partials(partials, s.tol());
    v.tail_mass = Some(tail_mass);
    Ok(v)
}
