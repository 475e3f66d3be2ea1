use serde::{Deserialize, Serialize};

use super::gaps::gaussian_tail;
use crate::error::{Error, Result};
use crate::models::ball_volume;
use crate::quad::integrate;

/// First-order intensities the tail conditions are evaluated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Intensity {
    Constant { lambda: f64, dim: usize },
    /// 1/π on the plane.
    Ginibre,
    /// √|x|/π for x < 0 and 0 for x ≥ 0, on the line.
    AiryLeft,
    /// Piecewise linear in x on the line, extended by its end values.
    Tabulated { x: Vec<f64>, values: Vec<f64> },
}

impl Intensity {
    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::InvalidParameter { name: "rho1", reason: reason.into() });
        match self {
            Intensity::Constant { lambda, dim } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) || *dim == 0 {
                    return bad("need lambda >= 0 and dim >= 1");
                }
            }
            Intensity::Tabulated { x, values } => {
                if x.len() < 2 || x.len() != values.len() {
                    return bad("need at least two (x, value) pairs");
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().any(|v| !v.is_finite()) {
                    return bad("x must be finite and strictly increasing");
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return bad("values must be finite and nonnegative");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Density of ρ¹ in |x|: the integral of ρ¹ over {|x| ≤ R} is the
    /// integral of this profile over [0, R].
    fn radial(&self, t: f64) -> f64 {
        match self {
            Intensity::Constant { lambda, dim } => {
                let d = *dim;
                lambda * d as f64 * ball_volume(d, 1.0) * t.powi(d as i32 - 1)
            }
            Intensity::Ginibre => 2.0 * t,
            Intensity::AiryLeft => t.sqrt() / std::f64::consts::PI,
            Intensity::Tabulated { x, values } => interp(x, values, t) + interp(x, values, -t),
        }
    }
}

fn interp(x: &[f64], v: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t <= x[0] {
        return v[0];
    }
    if t >= x[n - 1] {
        return v[n - 1];
    }
    let k = x.partition_point(|&a| a <= t);
    let w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    v[k - 1] * (1.0 - w) + v[k] * w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailKind {
    /// liminf over r of N(r/√((r+R)T)) ∫_{|x|≤r+R} ρ¹ = 0.
    A5b,
    /// ∫ N((|x|-r)/√(cT)) ρ¹(x) dx < ∞.
    A8a,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub c: f64,
}

impl Default for TailParams {
    fn default() -> Self {
        TailParams { r: 1.0, big_r: 1.0, t: 1.0, c: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Finite,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConditionReport {
    pub kind: TailKind,
    pub integral_estimate: f64,
    pub quadrature_error: f64,
    pub params: TailParams,
    /// Last ratio of successive dyadic increments (A8a) or values (A5b).
    pub tail_ratio: f64,
    pub truncations: usize,
    pub verdict: Verdict,
}

const RATIO: f64 = 0.9;
const MAX_DOUBLINGS: usize = 80;
const GROWING_RUN: usize = 8;

pub fn tail_condition_integral(kind: TailKind, rho1: &Intensity, params: TailParams) -> Result<TailConditionReport> {
    rho1.validate()?;
    let p = params;
    if !(p.t > 0.0 && p.c > 0.0 && p.r >= 0.0 && p.big_r >= 0.0) || ![p.r, p.big_r, p.t, p.c].iter().all(|v| v.is_finite())
    {
        return Err(Error::InvalidParameter { name: "params", reason: format!("{p:?}") });
    }
    match kind {
        TailKind::A8a => a8a(rho1, p),
        TailKind::A5b => a5b(rho1, p),
    }
}

fn report(kind: TailKind, p: TailParams, value: f64, err: f64, ratio: f64, n: usize, v: Verdict) -> TailConditionReport {
    TailConditionReport {
        kind,
        integral_estimate: value,
        quadrature_error: err,
        params: p,
        tail_ratio: ratio,
        truncations: n,
        verdict: v,
    }
}

fn ratio(new: f64, old: f64) -> f64 {
    if new == 0.0 {
        0.0
    } else if old == 0.0 {
        f64::INFINITY
    } else {
        new / old
    }
}

/// Integral over the balls of radius 2^j·R_0, stopped once the increments
/// shrink geometrically with ratio below 0.9 and the geometric tail is
/// negligible; that tail is added to the error.
fn a8a(rho1: &Intensity, p: TailParams) -> Result<TailConditionReport> {
    let s = (p.c * p.t).sqrt();
    let f = |t: f64| gaussian_tail((t - p.r) / s) * rho1.radial(t);
    let mut hi = 2.0 * (p.r + s).max(1.0);
    let (mut total, mut err) = integrate(&f, 0.0, hi, 1e-14, 1e-12)?;
    let mut last = total;
    let mut growing = 0;
    let mut q = f64::NAN;
    for j in 1..=MAX_DOUBLINGS {
        let (inc, e) = integrate(&f, hi, 2.0 * hi, 1e-14, 1e-12)?;
        hi *= 2.0;
        total += inc;
        err += e;
        q = ratio(inc, last);
        last = inc;
        growing = if q >= 1.0 { growing + 1 } else { 0 };
        if !total.is_finite() || growing >= GROWING_RUN {
            return Ok(report(TailKind::A8a, p, total, err, q, j, Verdict::Diverging));
        }
        if q < RATIO {
            let tail = inc * q / (1.0 - q);
            if tail <= 1e-12 * total.abs() + 1e-15 {
                return Ok(report(TailKind::A8a, p, total, err + tail, q, j, Verdict::Finite));
            }
        }
    }
    Ok(report(TailKind::A8a, p, total, err, q, MAX_DOUBLINGS, Verdict::Inconclusive))
}

/// The liminf expression along r_j = 2^j·max(r, 1); finite verdict once
/// the sequence decays with ratio below 0.9 to 1e-12 of its peak.
fn a5b(rho1: &Intensity, p: TailParams) -> Result<TailConditionReport> {
    let g = |t: f64| rho1.radial(t);
    let mut r = p.r.max(1.0);
    let (mut mass, mut mass_err) = integrate(&g, 0.0, r + p.big_r, 1e-14, 1e-12)?;
    let weight = |r: f64| gaussian_tail(r / ((r + p.big_r) * p.t).sqrt());
    let mut value = weight(r) * mass;
    let mut peak = value;
    let mut growing = 0;
    let mut q = f64::NAN;
    for j in 1..=MAX_DOUBLINGS {
        let (inc, e) = integrate(&g, r + p.big_r, 2.0 * r + p.big_r, 1e-14, 1e-12)?;
        r *= 2.0;
        mass += inc;
        mass_err += e;
        let w = weight(r);
        let next = w * mass;
        q = ratio(next, value);
        value = next;
        peak = peak.max(value);
        growing = if q >= 1.0 { growing + 1 } else { 0 };
        if !value.is_finite() || growing >= GROWING_RUN {
            return Ok(report(TailKind::A5b, p, value, w * mass_err, q, j, Verdict::Diverging));
        }
        if q < RATIO && value <= 1e-12 * peak {
            return Ok(report(TailKind::A5b, p, value, w * mass_err, q, j, Verdict::Finite));
        }
    }
    Ok(report(TailKind::A5b, p, value, weight(r) * mass_err, q, MAX_DOUBLINGS, Verdict::Inconclusive))
}
