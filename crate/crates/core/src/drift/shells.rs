use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Configuration;

/// Radii r_1 < ... < r_K of the truncation balls and the relative tolerance
/// used to call a shell sum converged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSchedule {
    radii: Vec<f64>,
    tol: f64,
}

impl ShellSchedule {
    pub fn new(radii: Vec<f64>, tol: f64) -> Result<Self> {
        if radii.len() < 2 {
            return Err(Error::InvalidSchedule(format!("need at least 2 radii, got {}", radii.len())));
        }
        if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidSchedule("radii must be positive and finite".into()));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSchedule("radii must be strictly increasing".into()));
        }
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(Error::InvalidSchedule(format!("tol {tol}")));
        }
        Ok(ShellSchedule { radii, tol })
    }

    /// Radii 2^0, ..., 2^k_max.
    pub fn dyadic(k_max: u32, tol: f64) -> Result<Self> {
        Self::new((0..=k_max).map(|k| 2f64.powi(k as i32)).collect(), tol)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn outer(&self) -> f64 {
        self.radii[self.radii.len() - 1]
    }

    /// Index of the shell containing distance `d`, or `len()` if d ≥ r_K.
    pub fn shell_of(&self, d: f64) -> usize {
        self.radii.partition_point(|&r| r <= d)
    }
}

impl Default for ShellSchedule {
    fn default() -> Self {
        Self::dyadic(7, 1e-3).expect("valid default schedule")
    }
}

/// Indices of a configuration bucketed by annulus around a center:
/// shell k holds r_{k-1} ≤ |s - center| < r_k (r_0 = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ShellPartition {
    pub shells: Vec<Vec<usize>>,
    pub outside: Vec<usize>,
}

impl ShellPartition {
    pub fn total(&self) -> usize {
        self.shells.iter().map(Vec::len).sum::<usize>() + self.outside.len()
    }
}

pub fn shell_partition(c: &Configuration, center: &[f64], s: &ShellSchedule) -> ShellPartition {
    let mut shells = vec![Vec::new(); s.len()];
    let mut outside = Vec::new();
    let w = c.window();
    for (i, p) in c.points().enumerate() {
        let k = s.shell_of(w.distance(p, center));
        if k < shells.len() {
            shells[k].push(i);
        } else {
            outside.push(i);
        }
    }
    ShellPartition { shells, outside }
}
