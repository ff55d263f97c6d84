#![allow(dead_code)]

use hpds_core::linalg::{self, Matrix};
use hpds_core::polynomial::{from_polynomial, Monomial, PolynomialSpec};
use hpds_core::rng::SeededRng;
use hpds_core::tensor::{AlmostSymTensor, SymTensor, Tensor};

pub fn mono(e: &[u32], c: f64) -> Monomial {
    Monomial::new(e.to_vec(), c)
}

/// Two-dimensional quartic odeco tensor `-v1^4 - 2 v2^4` whose entries,
/// rounded to four decimals, are the published synthetic example.
pub fn synthetic_exact() -> SymTensor {
    let (a, b) = ((2.0f64).sqrt() / 3.0, (7.0f64).sqrt() / 3.0);
    let v = Matrix::from_row_slice(2, 2, &[a, -b, b, a]);
    SymTensor::from_rank_one_sum(4, &[-1.0, -2.0], &v)
}

/// The synthetic example as printed (four decimals).
pub fn synthetic_printed() -> PolynomialSpec {
    PolynomialSpec::new(
        2,
        3,
        vec![
            vec![
                mono(&[3, 0], -1.2593),
                mono(&[2, 1], 1.6630),
                mono(&[1, 2], -1.5554),
                mono(&[0, 3], -0.1386),
            ],
            vec![
                mono(&[3, 0], 0.5543),
                mono(&[2, 1], -1.5554),
                mono(&[1, 2], -0.4158),
                mono(&[0, 3], -0.7037),
            ],
        ],
    )
    .unwrap()
}

pub fn population_vectors() -> Matrix {
    let h = (0.5f64).sqrt();
    Matrix::from_row_slice(2, 2, &[h, h, h, -h])
}

/// `2 v1^4 + 2 v2^4` with `v1 = (1, 1)/sqrt 2`, `v2 = (1, -1)/sqrt 2`.
pub fn population_tensor() -> SymTensor {
    SymTensor::from_rank_one_sum(4, &[2.0, 2.0], &population_vectors())
}

/// Three species with cubic interactions and a constant supply rate of 2.
pub fn three_species() -> (AlmostSymTensor, Vec<f64>) {
    let spec = PolynomialSpec::new(
        3,
        3,
        vec![
            vec![mono(&[3, 0, 0], -1.0), mono(&[2, 1, 0], -3.0), mono(&[1, 2, 0], -3.0)],
            vec![mono(&[0, 3, 0], -1.0)],
            vec![
                mono(&[0, 0, 3], -1.0),
                mono(&[2, 0, 1], -3.0),
                mono(&[1, 0, 2], -3.0),
                mono(&[0, 2, 1], -3.0),
                mono(&[0, 1, 2], -3.0),
                mono(&[1, 1, 1], -6.0),
            ],
        ],
    )
    .unwrap();
    (from_polynomial(&spec), vec![2.0, 2.0, 2.0])
}

pub fn three_species_p() -> Matrix {
    Matrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0])
}

/// Random odeco tensor with a Haar-like orthogonal basis.
pub fn random_odeco(order: usize, dim: usize, rng: &mut SeededRng, lo: f64, hi: f64) -> (SymTensor, Vec<f64>, Matrix) {
    let q = linalg::random_orthogonal(dim, rng);
    let lambdas: Vec<f64> = (0..dim).map(|_| rng.uniform_in(lo, hi)).collect();
    (SymTensor::from_rank_one_sum(order, &lambdas, &q), lambdas, q)
}

/// `sum_r w_r v_r^{∘(k-1)} ∘ W_r` with `W = V^{-T}`.
pub fn structured(order: usize, v: &Matrix, weights: &[f64]) -> AlmostSymTensor {
    let n = v.nrows();
    let w = linalg::checked_inverse(v).unwrap().transpose();
    let mut t = Tensor::zeros(order, n);
    for r in 0..n {
        let vr = linalg::column(v, r);
        let wr = linalg::column(&w, r);
        let mut factors: Vec<&[f64]> = (0..order - 1).map(|_| vr.as_slice()).collect();
        factors.push(&wr);
        t.add_rank_one(weights[r], &factors);
    }
    AlmostSymTensor::new(t).unwrap()
}

/// Random invertible matrix with condition number below `max_cond`.
pub fn well_conditioned(n: usize, rng: &mut SeededRng, max_cond: f64) -> Matrix {
    loop {
        let m = rng.gaussian_matrix(n, n);
        let sv = m.clone().singular_values();
        if sv.min() > 0.0 && sv.max() / sv.min() < max_cond {
            return m;
        }
    }
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d / linalg::norm(b).max(1e-300)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
