//! Thin wrappers over the LAPACK routines the samplers need.

use lapack_sys::{__BindgenComplex, chseqr_, zhseqr_};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::{Complex32, Complex64};
use std::os::raw::{c_char, c_int};

use crate::error::{Error, Result};

/// Eigenvalues (ascending) and column-major eigenvectors of a symmetric
/// n×n matrix given column-major.
///
/// Pure Rust: the real-valued OpenBLAS kernels on some AVX-512 hosts return
/// wrong products, which corrupts LAPACK's symmetric solvers.
pub fn sym_eigen(a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let m = DMatrix::from_column_slice(n, n, &a);
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or(Error::EigenFailure { eigenvalue: f64::NAN })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let w = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut v = Vec::with_capacity(n * n);
    for &i in &order {
        v.extend(eig.eigenvectors.column(i).iter());
    }
    Ok((w, v))
}

/// Eigenvalues of an upper Hessenberg matrix (column-major, n×n).
pub fn hessenberg_eigenvalues(mut h: Vec<Complex64>, n: usize) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let (job, compz) = (b'E' as c_char, b'N' as c_char);
    let (nn, one) = (n as c_int, 1 as c_int);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut z = [Complex64::new(0.0, 0.0)];
    let mut info: c_int = 0;
    let mut wq = [Complex64::new(0.0, 0.0)];
    let query: c_int = -1;
    let cast = |p: *mut Complex64| p as *mut __BindgenComplex<f64>;
    unsafe {
        zhseqr_(
            &job,
            &compz,
            &nn,
            &one,
            &nn,
            cast(h.as_mut_ptr()),
            &nn,
            cast(w.as_mut_ptr()),
            cast(z.as_mut_ptr()),
            &one,
            cast(wq.as_mut_ptr()),
            &query,
            &mut info,
        );
    }
    let lwork = (wq[0].re as c_int).max(n as c_int);
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    unsafe {
        zhseqr_(
            &job,
            &compz,
            &nn,
            &one,
            &nn,
            cast(h.as_mut_ptr()),
            &nn,
            cast(w.as_mut_ptr()),
            cast(z.as_mut_ptr()),
            &one,
            cast(work.as_mut_ptr()),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::EigenFailure { eigenvalue: f64::NAN });
    }
    Ok(w)
}

/// Single-precision variant of [`hessenberg_eigenvalues`].
pub fn hessenberg_eigenvalues_f32(mut h: Vec<Complex32>, n: usize) -> Result<Vec<Complex32>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let (job, compz) = (b'E' as c_char, b'N' as c_char);
    let (nn, one) = (n as c_int, 1 as c_int);
    let mut w = vec![Complex32::new(0.0, 0.0); n];
    let mut z = [Complex32::new(0.0, 0.0)];
    let mut info: c_int = 0;
    let mut wq = [Complex32::new(0.0, 0.0)];
    let query: c_int = -1;
    let cast = |p: *mut Complex32| p as *mut __BindgenComplex<f32>;
    unsafe {
        chseqr_(
            &job,
            &compz,
            &nn,
            &one,
            &nn,
            cast(h.as_mut_ptr()),
            &nn,
            cast(w.as_mut_ptr()),
            cast(z.as_mut_ptr()),
            &one,
            cast(wq.as_mut_ptr()),
            &query,
            &mut info,
        );
    }
    let lwork = (wq[0].re as c_int).max(n as c_int);
    let mut work = vec![Complex32::new(0.0, 0.0); lwork as usize];
    unsafe {
        chseqr_(
            &job,
            &compz,
            &nn,
            &one,
            &nn,
            cast(h.as_mut_ptr()),
            &nn,
            cast(w.as_mut_ptr()),
            cast(z.as_mut_ptr()),
            &one,
            cast(work.as_mut_ptr()),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::EigenFailure { eigenvalue: f64::NAN });
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_eigen_of_small_matrix() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let (w, v) = sym_eigen(vec![2.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 3.0).abs() < 1e-14);
        assert!((v[2].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn symmetric_eigen_residuals() {
        for n in [50usize, 160, 400] {
            let mut a = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    let u = i as f64 - j as f64;
                    a[j * n + i] = (-u * u / 50.0).exp();
                }
            }
            let (w, v) = sym_eigen(a.clone(), n).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..n {
                for i in 0..n {
                    let av: f64 = (0..n).map(|j| a[j * n + i] * v[k * n + j]).sum();
                    worst = worst.max((av - w[k] * v[k * n + i]).abs());
                }
            }
            assert!(worst < 1e-10, "n={n}: {worst}");
        }
    }

    #[test]
    fn hessenberg_power_sums_match_traces() {
        // Σλ^k = tr(H^k) for k = 1, 2 on a dense 300×300 Hessenberg matrix.
        let n = 300;
        let mut h = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for i in 0..n.min(j + 2) {
                h[j * n + i] = Complex64::new((0.37 * (i * n + j) as f64).sin(), (0.11 * (i + 3 * j) as f64).cos());
            }
        }
        let tr1: Complex64 = (0..n).map(|i| h[i * n + i]).sum();
        let mut tr2 = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                tr2 += h[k * n + i] * h[i * n + k];
            }
        }
        let w = hessenberg_eigenvalues(h, n).unwrap();
        let s1: Complex64 = w.iter().sum();
        let s2: Complex64 = w.iter().map(|z| z * z).sum();
        assert!((s1 - tr1).norm() < 1e-9 * (1.0 + tr1.norm()));
        assert!((s2 - tr2).norm() < 1e-9 * (1.0 + tr2.norm()));
    }

    #[test]
    fn hessenberg_eigenvalues_of_triangular_matrix() {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        // Upper triangular: eigenvalues are the diagonal.
        let h = vec![c(1.0, 1.0), c(0.0, 0.0), c(5.0, 0.0), c(-2.0, 0.5)];
        let mut w = hessenberg_eigenvalues(h, 2).unwrap();
        w.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((w[0] - c(-2.0, 0.5)).norm() < 1e-14);
        assert!((w[1] - c(1.0, 1.0)).norm() < 1e-14);
        let h32: Vec<Complex32> = vec![
            Complex32::new(0.0, 0.0),
            Complex32::new(1.0, 0.0),
            Complex32::new(-1.0, 0.0),
            Complex32::new(0.0, 0.0),
        ];
        // [[0, -1], [1, 0]] has eigenvalues ±i.
        let w = hessenberg_eigenvalues_f32(h32, 2).unwrap();
        assert!(w.iter().all(|z| (z.norm() - 1.0).abs() < 1e-6 && z.re.abs() < 1e-6));
    }
}
