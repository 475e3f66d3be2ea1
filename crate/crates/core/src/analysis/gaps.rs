use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Window;
use crate::sde::LabeledPath;

/// N(t) = P(Z > t) for a standard normal Z.
pub fn gaussian_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// Constant of the exit bound in dimension d: a union bound over the d
/// components, a factor 2 for the two signs and a factor 2 from the
/// reflection principle.
pub fn c_d(d: usize) -> f64 {
    4.0 * d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinGap {
    pub gap: f64,
    pub time: f64,
    pub pair: Option<(usize, usize)>,
}

/// Smallest inter-particle distance over grid times and pairs.
pub fn min_gap(path: &LabeledPath) -> MinGap {
    let (n, d) = (path.n(), path.dim);
    let mut best = MinGap { gap: f64::INFINITY, time: 0.0, pair: None };
    for (k, s) in path.states.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                let g = path.window.distance(&s[i * d..(i + 1) * d], &s[j * d..(j + 1) * d]);
                if g < best.gap {
                    best = MinGap { gap: g, time: path.times[k], pair: Some((i, j)) };
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTailRow {
    pub label: usize,
    /// |s_i|, distance of the start from the origin.
    pub start: f64,
    pub hits: usize,
    pub runs: usize,
    pub frequency: f64,
    pub stderr: f64,
    pub bound: f64,
    pub within: bool,
}

/// For each label starting outside the ball of radius r, the frequency of
/// runs in which the particle enters the ball before T, against
/// 2·c_d·N((|s_i| - r)/√(d·T)). All paths must share their initial state.
pub fn exit_tail_bound(paths: &[LabeledPath], r: f64, t_end: f64) -> Result<Vec<ExitTailRow>> {
    let first = paths.first().ok_or(Error::InsufficientSamples { needed: 1, got: 0 })?;
    if paths.iter().any(|p| p.states[0] != first.states[0]) {
        return Err(Error::Precondition("paths start from different configurations".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::Precondition(format!("T must be positive, got {t_end}")));
    }
    let (n, d) = (first.n(), first.dim);
    let origin = vec![0.0; d];
    let dist = |w: &Window, x: &[f64]| w.distance(x, &origin);
    let labels: Vec<usize> = (0..n).filter(|&i| dist(&first.window, first.position(0, i)) > r).collect();
    let hits: Vec<Vec<bool>> = paths
        .par_iter()
        .map(|p| {
            labels
                .iter()
                .map(|&i| {
                    p.times
                        .iter()
                        .enumerate()
                        .take_while(|(_, &t)| t <= t_end + 1e-12)
                        .any(|(k, _)| dist(&p.window, p.position(k, i)) <= r)
                })
                .collect()
        })
        .collect();
    let runs = paths.len();
    Ok(labels
        .iter()
        .enumerate()
        .map(|(a, &i)| {
            let start = dist(&first.window, first.position(0, i));
            let h = hits.iter().filter(|v| v[a]).count();
            let f = h as f64 / runs as f64;
            let stderr = (f * (1.0 - f) / runs as f64).sqrt();
            let bound = 2.0 * c_d(d) * gaussian_tail((start - r) / (d as f64 * t_end).sqrt());
            ExitTailRow {
                label: i,
                start,
                hits: h,
                runs,
                frequency: f,
                stderr,
                bound,
                within: f <= bound + 3.0 * stderr,
            }
        })
        .collect())
}
