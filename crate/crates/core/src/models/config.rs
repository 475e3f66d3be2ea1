//! Finite simple point configurations and the windows they are sampled in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Region a configuration was observed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    /// All of R^d (no boundary).
    Whole { dim: usize },
    /// Closed interval [lo, hi] in R.
    Interval { lo: f64, hi: f64 },
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Closed axis-aligned box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Torus [-half_i, half_i) in each coordinate, centered at the origin.
    PeriodicBox { half: Vec<f64> },
    /// [0, inf) in R.
    HalfLine,
}

impl Window {
    pub fn dim(&self) -> usize {
        match self {
            Window::Whole { dim } => *dim,
            Window::Interval { .. } | Window::HalfLine => 1,
            Window::Ball { center, .. } => center.len(),
            Window::Box { lo, .. } => lo.len(),
            Window::PeriodicBox { half } => half.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Window::Whole { .. } => x.iter().all(|v| v.is_finite()),
            Window::Interval { lo, hi } => x[0] >= *lo && x[0] <= *hi,
            Window::Ball { center, radius } => dist(x, center) <= *radius,
            Window::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h),
            Window::PeriodicBox { half } => {
                x.iter().zip(half).all(|(v, h)| *v >= -*h && *v < *h)
            }
            Window::HalfLine => x[0] >= 0.0,
        }
    }

    /// Center used for the balls S_r of this window.
    pub fn center(&self) -> Vec<f64> {
        match self {
            Window::Interval { lo, hi } => vec![0.5 * (lo + hi)],
            Window::Ball { center, .. } => center.clone(),
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            _ => vec![0.0; self.dim()],
        }
    }

    /// Inradius (half-extent) of the window; infinite for unbounded windows.
    pub fn radius(&self) -> f64 {
        match self {
            Window::Whole { .. } | Window::HalfLine => f64::INFINITY,
            Window::Interval { lo, hi } => 0.5 * (hi - lo),
            Window::Ball { radius, .. } => *radius,
            Window::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| 0.5 * (h - l))
                .fold(f64::INFINITY, f64::min),
            Window::PeriodicBox { half } => half.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// Euclidean distance from `x` to the complement of the window.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Window::Whole { .. } | Window::PeriodicBox { .. } => f64::INFINITY,
            Window::Interval { lo, hi } => (x[0] - lo).min(hi - x[0]),
            Window::Ball { center, radius } => radius - dist(x, center),
            Window::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
            Window::HalfLine => x[0],
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Window::Whole { .. } | Window::HalfLine => f64::INFINITY,
            Window::Interval { lo, hi } => hi - lo,
            Window::Ball { radius, .. } => 2.0 * radius,
            Window::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (h - l) * (h - l))
                .sum::<f64>()
                .sqrt(),
            Window::PeriodicBox { half } => 2.0 * half.iter().map(|h| h * h).sum::<f64>().sqrt(),
        }
    }

    /// Lebesgue volume of the window.
    pub fn volume(&self) -> f64 {
        match self {
            Window::Whole { .. } | Window::HalfLine => f64::INFINITY,
            Window::Interval { lo, hi } => hi - lo,
            Window::Ball { center, radius } => ball_volume(center.len(), *radius),
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Window::PeriodicBox { half } => half.iter().map(|h| 2.0 * h).product(),
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Window::PeriodicBox { .. })
    }

    /// Displacement x - y, using the minimum-image convention on a torus.
    pub fn displacement(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            Window::PeriodicBox { half } => {
                for k in 0..x.len() {
                    let len = 2.0 * half[k];
                    let mut u = x[k] - y[k];
                    u -= len * (u / len).round();
                    out[k] = u;
                }
            }
            _ => {
                for k in 0..x.len() {
                    out[k] = x[k] - y[k];
                }
            }
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Window::PeriodicBox { .. } => {
                let mut u = vec![0.0; x.len()];
                self.displacement(x, y, &mut u);
                norm(&u)
            }
            _ => dist(x, y),
        }
    }

    /// Wraps a point back onto the torus; identity for other windows.
    pub fn wrap(&self, x: &mut [f64]) {
        if let Window::PeriodicBox { half } = self {
            for (v, h) in x.iter_mut().zip(half) {
                let len = 2.0 * h;
                *v -= len * ((*v + h) / len).floor();
                if *v >= *h {
                    *v -= len;
                }
            }
        }
    }
}

/// Volume of the d-dimensional ball of radius r.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let d = d as f64;
    std::f64::consts::PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0 + 1.0) * r.powf(d)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Relative tolerance used to reject duplicate points.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// A finite simple point configuration: the points of a window of an
/// infinite configuration, stored as a flat coordinate array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
    window: Window,
}

impl Configuration {
    /// Validates containment and simplicity.
    ///
    /// Two points closer than `1e-12` times the window diameter (or times the
    /// spread of the points, for unbounded windows) count as duplicates.
    pub fn new(dim: usize, coords: Vec<f64>, window: Window) -> Result<Self> {
        if dim == 0 || window.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "configuration dim {dim}, window dim {}",
                window.dim()
            )));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates is not a multiple of dim {dim}",
                coords.len()
            )));
        }
        let c = Configuration { dim, coords, window };
        for i in 0..c.len() {
            if !c.window.contains(c.point(i)) {
                return Err(Error::OutsideWindow { index: i });
            }
        }
        let scale = if c.window.diameter().is_finite() {
            c.window.diameter()
        } else {
            c.spread().max(1.0)
        };
        if let Some((i, j)) = c.find_close_pair(DUPLICATE_TOL * scale) {
            return Err(Error::DuplicatePoint { i, j });
        }
        Ok(c)
    }

    pub fn empty(window: Window) -> Self {
        Configuration { dim: window.dim(), coords: Vec::new(), window }
    }

    /// 1-d convenience constructor.
    pub fn from_points_1d(points: &[f64], window: Window) -> Result<Self> {
        Self::new(1, points.to_vec(), window)
    }

    pub fn from_points(points: &[Vec<f64>], window: Window) -> Result<Self> {
        let dim = window.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(format!("point of dim {}", p.len())));
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords, window)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Same points with a different window; containment is re-checked.
    pub fn with_window(&self, window: Window) -> Result<Self> {
        Self::new(self.dim, self.coords.clone(), window)
    }

    /// Index order of the canonical label: |x| increasing, ties broken by
    /// lexicographic order of the coordinates.
    pub fn canonical_order(&self) -> Vec<usize> {
        canonical_order(&self.coords, self.dim)
    }

    /// Copy with points relabeled in canonical order.
    pub fn canonicalized(&self) -> Self {
        let order = self.canonical_order();
        let mut coords = Vec::with_capacity(self.coords.len());
        for i in order {
            coords.extend_from_slice(self.point(i));
        }
        Configuration { dim: self.dim, coords, window: self.window.clone() }
    }

    /// First `n` points in canonical order (or all, if fewer).
    pub fn truncate_canonical(&self, n: usize) -> Self {
        let c = self.canonicalized();
        let n = n.min(c.len());
        Configuration {
            dim: self.dim,
            coords: c.coords[..n * self.dim].to_vec(),
            window: self.window.clone(),
        }
    }

    /// Number of points within distance r of the origin.
    pub fn count_in_ball(&self, r: f64) -> usize {
        self.points().filter(|p| norm(p) <= r).count()
    }

    fn spread(&self) -> f64 {
        let mut m: f64 = 0.0;
        for p in self.points() {
            m = m.max(norm(p));
        }
        2.0 * m
    }

    /// Some pair of points closer than `tol`, if any. Sweeps along the
    /// first coordinate so large configurations stay cheap.
    pub fn find_close_pair(&self, tol: f64) -> Option<(usize, usize)> {
        let n = self.len();
        if n < 2 {
            return None;
        }
        if self.window.is_periodic() {
            for i in 0..n {
                for j in (i + 1)..n {
                    if self.window.distance(self.point(i), self.point(j)) <= tol {
                        return Some((i, j));
                    }
                }
            }
            return None;
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| self.point(a)[0].total_cmp(&self.point(b)[0]));
        for a in 0..n {
            let pa = self.point(idx[a]);
            for &jb in &idx[a + 1..] {
                let pb = self.point(jb);
                if pb[0] - pa[0] > tol {
                    break;
                }
                if dist(pa, pb) <= tol {
                    let (i, j) = (idx[a].min(jb), idx[a].max(jb));
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// Canonical label order for a flat coordinate array.
pub fn canonical_order(coords: &[f64], dim: usize) -> Vec<usize> {
    let n = coords.len() / dim;
    let mut idx: Vec<usize> = (0..n).collect();
    let key = |i: usize| &coords[i * dim..(i + 1) * dim];
    idx.sort_by(|&a, &b| {
        let (pa, pb) = (key(a), key(b));
        norm(pa).total_cmp(&norm(pb)).then_with(|| {
            for (x, y) in pa.iter().zip(pb) {
                match x.total_cmp(y) {
                    std::cmp::Ordering::Equal => continue,
                    o => return o,
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_outside_points() {
        let w = Window::Interval { lo: 0.0, hi: 10.0 };
        assert!(matches!(
            Configuration::from_points_1d(&[1.0, 2.0, 1.0], w.clone()),
            Err(Error::DuplicatePoint { i: 0, j: 2 })
        ));
        assert!(matches!(
            Configuration::from_points_1d(&[1.0, 11.0], w.clone()),
            Err(Error::OutsideWindow { index: 1 })
        ));
        // 1e-12 * diameter(10) = 1e-11
        assert!(Configuration::from_points_1d(&[1.0, 1.0 + 5e-12], w.clone()).is_err());
        assert!(Configuration::from_points_1d(&[1.0, 1.0 + 1e-10], w).is_ok());
    }

    #[test]
    fn canonical_order_sorts_by_modulus_then_lexicographic() {
        let c = Configuration::from_points(
            &[vec![0.0, 2.0], vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.5, 0.5]],
            Window::Whole { dim: 2 },
        )
        .unwrap();
        assert_eq!(c.canonical_order(), vec![3, 2, 1, 0]);
    }

    #[test]
    fn periodic_displacement_uses_minimum_image() {
        let w = Window::PeriodicBox { half: vec![2.0] };
        let mut u = [0.0];
        w.displacement(&[1.9], &[-1.9], &mut u);
        assert!((u[0] + 0.2).abs() < 1e-12);
        let mut x = [2.5];
        w.wrap(&mut x);
        assert!((x[0] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1, 2.0) - 4.0).abs() < 1e-12);
        assert!((ball_volume(2, 1.0) - std::f64::consts::PI).abs() < 1e-12);
        assert!((ball_volume(3, 1.0) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}
