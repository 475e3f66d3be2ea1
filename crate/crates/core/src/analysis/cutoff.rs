use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// a_k(r) = k·r
    Linear,
    /// a_k(r) = k·r²
    Quadratic,
}

/// Count bounds a_k and the indices p, q of the cut-off χ_{pqk}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSpec {
    pub k: u64,
    pub growth: Growth,
    pub p: i32,
    pub q: u32,
}

impl LocalizationSpec {
    pub fn new(k: u64, growth: Growth) -> Self {
        LocalizationSpec { k, growth, p: 0, q: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter { name: "k", reason: "a_k needs k >= 1".into() });
        }
        Ok(())
    }

    pub fn a(&self, r: u64) -> u64 {
        match self.growth {
            Growth::Linear => self.k.saturating_mul(r),
            Growth::Quadratic => self.k.saturating_mul(r.saturating_mul(r)),
        }
    }

    /// Largest r at which c(S_r) ≤ a_k(r) can fail for n points.
    fn last_radius(&self, n: usize) -> u64 {
        let mut r = 1;
        while self.a(r) < n as u64 {
            r += 1;
        }
        r
    }
}

fn sorted_norms(c: &Configuration) -> Vec<f64> {
    let mut v: Vec<f64> = c.points().map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// c(S_r) ≤ a_k(r) for every integer radius r ≥ 1.
pub fn localization_membership(c: &Configuration, spec: &LocalizationSpec) -> Result<bool> {
    spec.validate()?;
    let norms = sorted_norms(c);
    Ok((1..=spec.last_radius(norms.len())).all(|r| {
        let count = norms.partition_point(|&t| t <= r as f64);
        count as u64 <= spec.a(r)
    }))
}

/// 1 for t ≤ 0, 1 - 2^{p+1} t on [0, 2^{-p-1}], 0 beyond.
pub fn h_p(p: i32, t: f64) -> f64 {
    (1.0 - 2f64.powi(p + 1) * t.max(0.0)).max(0.0)
}

/// Radial bump: 1 on |x| ≤ q, 0 for |x| ≥ q+1, smoothstep in between
/// (slope at most 3/2).
pub fn phi_q(q: u32, x: &[f64]) -> f64 {
    let t = x.iter().map(|v| v * v).sum::<f64>().sqrt() - q as f64;
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

fn d_p(p: i32, x: &[f64], c: &Configuration) -> f64 {
    let eps = 2f64.powi(-p);
    c.points()
        .map(|s| {
            let u = eps - c.window().distance(x, s);
            if u >= 0.0 {
                u * u
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .sqrt()
}

/// h_0 of the distance to K[a_k]: for each r the points of S_r beyond the
/// a_k(r) innermost contribute (r - |s_j|)².
fn chi_a(c: &Configuration, spec: &LocalizationSpec) -> f64 {
    let norms = sorted_norms(c);
    let mut d2 = 0.0;
    for r in 1..=spec.last_radius(norms.len()) {
        let inside = norms.partition_point(|&t| t <= r as f64);
        let keep = spec.a(r).min(inside as u64) as usize;
        d2 += norms[keep..inside].iter().map(|t| (r as f64 - t).powi(2)).sum::<f64>();
    }
    h_p(0, d2.sqrt())
}

/// χ_{pqk}(x, s) = h_p(d_p(x, s)) φ_q(x) χ_{a_k}(s).
pub fn cutoff_chi(x: &[f64], c: &Configuration, spec: &LocalizationSpec) -> Result<f64> {
    spec.validate()?;
    if x.len() != c.dim() {
        return Err(Error::DimensionMismatch(format!("x has dim {} vs {}", x.len(), c.dim())));
    }
    let phi = phi_q(spec.q, x);
    if phi == 0.0 {
        return Ok(0.0);
    }
    Ok(h_p(spec.p, d_p(spec.p, x, c)) * phi * chi_a(c, spec))
}

/// Lipschitz constant of x ↦ χ_{pqk}(x, s): 2^{p+1}·√m + 3/2, where m
/// bounds the number of points within 2^{-p} of any x. The gradient of d_p
/// is a sum of unit vectors weighted by the terms of d_p, so its norm is at
/// most √m by Cauchy-Schwarz; m is bounded by the largest number of points
/// within 2^{1-p} of one of them.
pub fn cutoff_lipschitz_bound(c: &Configuration, spec: &LocalizationSpec) -> f64 {
    let reach = 2f64.powi(1 - spec.p);
    let m = c
        .points()
        .map(|s| c.points().filter(|t| c.window().distance(s, t) <= reach).count())
        .max()
        .unwrap_or(0);
    2f64.powi(spec.p + 1) * (m as f64).sqrt() + 1.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Window;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(p: &[f64]) -> Configuration {
        Configuration::from_points_1d(p, Window::Whole { dim: 1 }).unwrap()
    }

    #[test]
    fn membership_examples() {
        let s = LocalizationSpec::new(3, Growth::Linear);
        assert!(localization_membership(&line(&[]), &s).unwrap());
        let crowd: Vec<f64> = (0..6).map(|i| -0.9 + 0.3 * i as f64).collect();
        assert!(!localization_membership(&line(&crowd), &s).unwrap());
        assert!(localization_membership(&line(&crowd[..3]), &s).unwrap());
        assert!(localization_membership(&line(&[0.0]), &LocalizationSpec::new(0, Growth::Linear)).is_err());
    }

    #[test]
    fn quadratic_bounds_grow_faster() {
        let s = LocalizationSpec::new(2, Growth::Quadratic);
        assert_eq!((s.a(1), s.a(3)), (2, 18));
        let pts: Vec<f64> = (0..8).map(|i| 1.5 + 0.05 * i as f64).collect();
        assert!(localization_membership(&line(&pts), &s).unwrap());
        assert!(!localization_membership(&line(&pts), &LocalizationSpec::new(2, Growth::Linear)).unwrap());
    }

    #[test]
    fn cutoff_is_one_in_the_interior() {
        let s = LocalizationSpec { k: 4, growth: Growth::Linear, p: 1, q: 2 };
        assert_eq!(cutoff_chi(&[0.5], &line(&[1.5, -1.0]), &s).unwrap(), 1.0);
    }

    #[test]
    fn cutoff_vanishes_outside_the_next_ball() {
        let s = LocalizationSpec { k: 4, growth: Growth::Linear, p: 1, q: 2 };
        assert_eq!(cutoff_chi(&[3.2], &line(&[0.0]), &s).unwrap(), 0.0);
        assert_eq!(cutoff_chi(&[-3.0], &line(&[0.0]), &s).unwrap(), 0.0);
    }

    #[test]
    fn one_near_point_gives_the_hand_value() {
        // Point at 0.75·2^{-p}: d_p = 2^{-p}/4, h_p = 1 - 2^{p+1}·2^{-p}/4 = 1/2.
        let s = LocalizationSpec { k: 4, growth: Growth::Linear, p: 1, q: 2 };
        let v = cutoff_chi(&[0.5], &line(&[0.875]), &s).unwrap();
        assert!((v - 0.5).abs() < 1e-15, "{v}");
        // At 2^{-p-2} the same factor is already 0.
        assert_eq!(cutoff_chi(&[0.5], &line(&[0.625]), &s).unwrap(), 0.0);
    }

    #[test]
    fn crowded_configuration_is_damped() {
        let s = LocalizationSpec { k: 1, growth: Growth::Linear, p: 0, q: 3 };
        // Two points in S_1: the outer one contributes (1 - 0.8)² to d².
        let v = cutoff_chi(&[2.9], &line(&[0.1, 0.8]), &s).unwrap();
        assert!((v - 0.6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn bump_profile() {
        assert_eq!(phi_q(1, &[0.5, 0.5]), 1.0);
        assert!((phi_q(1, &[1.5, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(phi_q(1, &[0.0, 2.0]), 0.0);
        assert_eq!(h_p(2, -1.0), 1.0);
        assert_eq!(h_p(2, 0.125), 0.0);
    }

    #[test]
    fn finite_difference_slopes_stay_below_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (d, p) in [(1usize, 0i32), (1, 2), (2, 1)] {
            let pts: Vec<Vec<f64>> =
                (0..12).map(|_| (0..d).map(|_| rng.random_range(-2.5..2.5)).collect()).collect();
            let c = Configuration::from_points(&pts, Window::Whole { dim: d }).unwrap();
            let s = LocalizationSpec { k: 3, growth: Growth::Linear, p, q: 2 };
            let bound = cutoff_lipschitz_bound(&c, &s);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.5..3.5)).collect();
                let h = rng.random_range(1e-6..1e-2);
                let y: Vec<f64> = x.iter().map(|v| v + h * rng.random_range(-1.0..1.0f64)).collect();
                let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                if dist == 0.0 {
                    continue;
                }
                let slope = (cutoff_chi(&x, &c, &s).unwrap() - cutoff_chi(&y, &c, &s).unwrap()).abs() / dist;
                assert!(slope <= bound * 1.01, "slope {slope} > {bound}");
            }
        }
    }

    proptest! {
        #[test]
        fn cutoff_lies_in_unit_interval(
            pts in proptest::collection::vec(-4.0..4.0f64, 0..10),
            x in -5.0..5.0f64,
            p in -1..3i32,
            k in 1..4u64,
        ) {
            let mut pts = pts;
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let c = line(&pts);
            let s = LocalizationSpec { k, growth: Growth::Linear, p, q: 2 };
            let v = cutoff_chi(&[x], &c, &s).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            if localization_membership(&c, &s).unwrap() {
                prop_assert_eq!(chi_a(&c, &s), 1.0);
            }
        }
    }
}
