use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::models::{Configuration, Window};

/// Uniform point in a bounded window.
pub(crate) fn uniform_point(w: &Window, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match w {
        Window::Interval { lo, hi } => vec![rng.random_range(*lo..*hi)],
        Window::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect(),
        Window::PeriodicBox { half } => half.iter().map(|h| rng.random_range(-*h..*h)).collect(),
        Window::Ball { center, radius } => loop {
            let p: Vec<f64> = center.iter().map(|_| rng.random_range(-*radius..*radius)).collect();
            if p.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                break p.iter().zip(center).map(|(v, c)| v + c).collect();
            }
        },
        Window::Whole { .. } | Window::HalfLine => unreachable!("unbounded window"),
    }
}

/// Poisson point field of constant intensity on a bounded window.
pub fn sample_poisson(intensity: f64, window: &Window, seed: u64) -> Result<Configuration> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::InvalidParameter { name: "intensity", reason: format!("{intensity}") });
    }
    let vol = window.volume();
    if !vol.is_finite() {
        return Err(Error::InvalidParameter { name: "window", reason: "unbounded window".into() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = intensity * vol;
    let n = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::InvalidParameter { name: "intensity", reason: e.to_string() })?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let d = window.dim();
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n {
        coords.extend(uniform_point(window, &mut rng));
    }
    Configuration::new(d, coords, window.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_have_poisson_mean_and_variance() {
        let w = Window::Box { lo: vec![0.0, 0.0], hi: vec![5.0, 4.0] };
        let counts: Vec<f64> =
            (0..2000).map(|s| sample_poisson(0.5, &w, s).unwrap().len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        assert!((mean - 10.0).abs() < 0.3, "{mean}");
        assert!((var / mean - 1.0).abs() < 0.1, "{var}");
        assert!(sample_poisson(0.0, &w, 1).unwrap().is_empty());
        assert!(sample_poisson(1.0, &Window::Whole { dim: 1 }, 1).is_err());
    }

    #[test]
    fn ball_points_are_uniform_in_radius_squared() {
        let w = Window::Ball { center: vec![1.0, -1.0], radius: 2.0 };
        let mut inner = 0;
        let mut total = 0;
        for s in 0..200 {
            let c = sample_poisson(1.0, &w, s).unwrap();
            for p in c.points() {
                let r = (p[0] - 1.0).hypot(p[1] + 1.0);
                inner += (r < 1.0) as usize;
                total += 1;
            }
        }
        let f = inner as f64 / total as f64;
        assert!((f - 0.25).abs() < 0.02, "{f}");
    }
}
