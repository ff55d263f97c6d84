//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;

use num_traits::Float;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub type Matrix = DMatrix<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Normalizes in place; returns the original norm.
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

pub fn column(m: &Matrix, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

pub fn mat_vec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).iter().copied().collect()
}

pub fn mat_t_vec(m: &Matrix, x: &[f64]) -> Vec<f64> {
    (m.transpose() * DVector::from_column_slice(x))
        .iter()
        .copied()
        .collect()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eigen_extremes(m: &Matrix) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        })
}

/// `max |Q^T Q - I|`.
pub fn orthogonality_defect(q: &Matrix) -> f64 {
    let g = q.transpose() * q;
    let n = g.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Inverse via LU, refusing matrices whose pivots span more than twelve
/// orders of magnitude.
pub fn checked_inverse(m: &Matrix) -> Result<Matrix> {
    let lu = m.clone().lu();
    let u = lu.u();
    let (lo, hi) = (0..u.nrows()).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let p = u[(i, i)].abs();
        (lo.min(p), hi.max(p))
    });
    if !(hi > 0.0) || lo <= 1e-12 * hi {
        return Err(Error::Singular);
    }
    lu.try_inverse().ok_or(Error::Singular)
}

/// Haar-ish random orthogonal matrix from the QR factors of a Gaussian one.
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> Matrix {
    let g = rng.gaussian_matrix(n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Removes the components along `basis` (assumed orthonormal) and
/// renormalizes. Returns the norm left after projection.
pub fn project_out(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    normalize(v)
}

/// Completes an orthonormal set to a basis of `R^n`, deterministically
/// trying standard basis vectors in order.
pub fn complete_basis(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut extra = Vec::new();
    let mut candidates: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let mut e = alloc::vec![0.0; n];
            e[i] = 1.0;
            (project_out(&mut e, &all), i)
        })
        .collect();
    // prefer the axes least covered by the existing vectors
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in candidates {
        if all.len() == n {
            break;
        }
        let mut e = alloc::vec![0.0; n];
        e[i] = 1.0;
        if project_out(&mut e, &all) > 1e-8 {
            all.push(e.clone());
            extra.push(e);
        }
    }
    extra
}
