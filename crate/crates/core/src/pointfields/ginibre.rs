//! Eigenvalues of finite complex Ginibre matrices.

use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::linalg::{hessenberg_eigenvalues, hessenberg_eigenvalues_f32};
use crate::error::Result;
use crate::models::{Configuration, Window};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

/// The Hessenberg form of an n×n matrix with i.i.d. standard complex
/// Gaussian entries (E|g|² = 1), column-major. Entries on and above the
/// diagonal are again standard complex Gaussians; the subdiagonal entry in
/// column k is the norm of the remaining n-k-1 entries, √Gamma(n-k-1, 1).
fn hessenberg_ginibre(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..=j {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            h[j * n + i] = Complex64::new(s * re, s * im);
        }
        if j + 1 < n {
            let g = Gamma::new((n - j - 1) as f64, 1.0).expect("positive shape");
            h[j * n + j + 1] = Complex64::new(g.sample(rng).sqrt(), 0.0);
        }
    }
    h
}

/// Eigenvalues of an n×n complex Ginibre matrix, unscaled, so the bulk
/// intensity is 1/π. The window is the disk of radius √n, enlarged to
/// contain the rare eigenvalues that fall beyond it.
pub fn sample_ginibre_matrix(n: usize, seed: u64) -> Result<Configuration> {
    sample_ginibre_matrix_with(n, seed, Precision::F64)
}

pub fn sample_ginibre_matrix_with(n: usize, seed: u64, precision: Precision) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = hessenberg_ginibre(n, &mut rng);
    let eig: Vec<Complex64> = match precision {
        Precision::F64 => hessenberg_eigenvalues(h, n)?,
        Precision::F32 => {
            let h32 = h.iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect();
            hessenberg_eigenvalues_f32(h32, n)?
                .iter()
                .map(|z| Complex64::new(z.re as f64, z.im as f64))
                .collect()
        }
    };
    let far = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let radius = (n as f64).sqrt().max(far * (1.0 + 1e-9));
    let coords = eig.iter().flat_map(|z| [z.re, z.im]).collect();
    Configuration::new(2, coords, Window::Ball { center: vec![0.0, 0.0], radius })
}
