//! Z-eigenpairs of supersymmetric tensors and orthogonal (odeco)
//! decomposition by deflation.
//!
//! Eigenpairs come from a shifted symmetric higher-order power iteration
//! `v <- normalize(T v^{k-1} + gamma v)`. The adaptive shift keeps the
//! shifted form locally convex (ascent) or concave (descent), so the
//! Rayleigh value `T v^k` moves monotonically. Once the residual is small
//! the pair is polished with Newton steps on `T v^{k-1} = lambda v`,
//! `v^T v = 1`.


use alloc::vec::Vec;

use num_traits::Float;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::SeededRng;
use crate::tensor::{frob_distance, SymTensor};

/// Margin added to the convexity shift.
const SHIFT_MARGIN: f64 = 1e-6;

/// Residual below which Newton polishing is attempted (relative to scale).
const POLISH_START: f64 = 1e-4;

/// Shift used by the power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    /// Constant shift; `gamma >= 0` ascends `T v^k`, `gamma < 0` descends.
    Fixed(f64),
    /// Shift recomputed every step from the local Hessian `k(k-1) T v^{k-2}`.
    Adaptive { maximize: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZEigenPair {
    pub value: f64,
    /// Unit vector.
    pub vector: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `||T v^{k-1} - value v||`.
    pub residual: f64,
}

/// `(T v^k, ||T v^{k-1} - (T v^k) v||)` for unit `v`.
pub fn eigen_residual(t: &SymTensor, v: &[f64]) -> (f64, f64) {
    let tv = t.apply(v).expect("length checked by caller");
    let lambda = linalg::dot(&tv, v);
    let res = tv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - lambda * b) * (a - lambda * b))
        .sum::<f64>()
        .sqrt();
    (lambda, res)
}

/// Computes one Z-eigenpair from `init`.
///
/// Non-convergence within `max_iter` is reported through
/// [`ZEigenPair::converged`] rather than an error.
pub fn z_eigenpair(
    t: &SymTensor,
    shift: Shift,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ZEigenPair> {
    if init.len() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: init.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive"));
    }
    if linalg::norm(init) == 0.0 {
        return Err(Error::InvalidArgument("initial vector must be nonzero"));
    }
    Ok(power_iterate(t, shift, init, tol, max_iter, &[]))
}

fn power_iterate(
    t: &SymTensor,
    shift: Shift,
    init: &[f64],
    tol: f64,
    max_iter: usize,
    exclude: &[Vec<f64>],
) -> ZEigenPair {
    let k = t.order() as f64;
    let scale = t.norm().max(1.0);
    let ascend = match shift {
        Shift::Fixed(g) => g >= 0.0,
        Shift::Adaptive { maximize } => maximize,
    };
    let sign = if ascend { 1.0 } else { -1.0 };

    let mut x = init.to_vec();
    linalg::project_out(&mut x, exclude);
    let mut iterations = 0;
    let mut polished = false;
    loop {
        let (lambda, res) = eigen_residual(t, &x);
        if res <= tol {
            return ZEigenPair {
                value: lambda,
                vector: x,
                converged: true,
                iterations,
                residual: res,
            };
        }
        if !polished && res <= POLISH_START * scale {
            polished = true;
            if let Some((v, l, r)) = newton_polish(t, &x, exclude, tol) {
                if r <= tol {
                    return ZEigenPair {
                        value: l,
                        vector: v,
                        converged: true,
                        iterations,
                        residual: r,
                    };
                }
                x = v;
            }
        }
        if iterations >= max_iter {
            return ZEigenPair {
                value: lambda,
                vector: x,
                converged: false,
                iterations,
                residual: res,
            };
        }
        let gamma = match shift {
            Shift::Fixed(g) => g,
            Shift::Adaptive { .. } => {
                let h = t.contract_to_matrix(&x).expect("dims") * (k * (k - 1.0));
                let (lo, hi) = linalg::sym_eigen_extremes(&h);
                if ascend {
                    ((SHIFT_MARGIN - lo) / k).max(0.0)
                } else {
                    -((SHIFT_MARGIN + hi) / k).max(0.0)
                }
            }
        };
        let tx = t.apply(&x).expect("dims");
        let mut y: Vec<f64> = tx
            .iter()
            .zip(&x)
            .map(|(a, b)| sign * (a + gamma * b))
            .collect();
        if linalg::project_out(&mut y, exclude) == 0.0 {
            // T v^{k-1} + gamma v vanished: v is already a null eigenvector
            let (lambda, res) = eigen_residual(t, &x);
            return ZEigenPair {
                value: lambda,
                vector: x,
                converged: res <= tol,
                iterations,
                residual: res,
            };
        }
        let step: f64 = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = y;
        iterations += 1;
        if step < 1e-15 {
            // fixed point of the (projected) map that is not an eigenpair
            if let Some((v, l, r)) = newton_polish(t, &x, exclude, tol) {
                return ZEigenPair {
                    value: l,
                    vector: v,
                    converged: r <= tol,
                    iterations,
                    residual: r,
                };
            }
            let (lambda, res) = eigen_residual(t, &x);
            return ZEigenPair {
                value: lambda,
                vector: x,
                converged: res <= tol,
                iterations,
                residual: res,
            };
        }
    }
}

/// Newton iterations on `F(v, l) = (T v^{k-1} - l v, (1 - v^T v)/2)`.
/// Returns the best point reached if it improved on the start.
fn newton_polish(
    t: &SymTensor,
    x0: &[f64],
    exclude: &[Vec<f64>],
    tol: f64,
) -> Option<(Vec<f64>, f64, f64)> {
    let n = t.dim();
    let k = t.order() as f64;
    let (mut lambda, start_res) = eigen_residual(t, x0);
    let mut x = x0.to_vec();
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut best_res = start_res;
    for _ in 0..12 {
        let m = t.contract_to_matrix(&x).ok()?;
        let tx = t.apply(&x).ok()?;
        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = (k - 1.0) * m[(i, j)];
            }
            jac[(i, i)] -= lambda;
            jac[(i, n)] = -x[i];
            jac[(n, i)] = -x[i];
            rhs[i] = -(tx[i] - lambda * x[i]);
        }
        rhs[n] = -(1.0 - linalg::dot(&x, &x)) / 2.0;
        let delta = jac.lu().solve(&rhs)?;
        for i in 0..n {
            x[i] += delta[i];
        }
        if linalg::project_out(&mut x, exclude) == 0.0 {
            return best;
        }
        let (l, res) = eigen_residual(t, &x);
        lambda = l;
        if !res.is_finite() {
            return best;
        }
        if res < best_res {
            best_res = res;
            best = Some((x.clone(), l, res));
            if res <= tol * 1e-2 {
                break;
            }
        } else if best.is_some() {
            break;
        }
    }
    // a marginal improvement that stays above tolerance is not worth a jump
    best.filter(|(_, _, r)| *r <= tol || *r <= 0.5 * start_res)
}

/// Orthogonal decomposition `T ≈ sum_r lambda_r v_r^{∘k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdecoDecomposition {
    order: usize,
    /// Descending.
    eigenvalues: Vec<f64>,
    /// Orthonormal columns `v_r`.
    eigenvectors: Matrix,
    /// Frobenius distance between the input and the reconstruction.
    residual: f64,
    tensor_norm: f64,
}

impl OdecoDecomposition {
    /// Builds a decomposition from pairs, canonicalizing signs and order,
    /// and measures the residual against `t`.
    ///
    /// Signs: each `v_r` is flipped so its first nonzero component is
    /// positive; for odd `k` this flips `lambda_r` as well. Order: descending
    /// `lambda`, near-equal values ordered by descending lexicographic
    /// comparison of the vectors.
    pub fn from_pairs(t: &SymTensor, pairs: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let n = t.dim();
        let k = t.order();
        if pairs.len() != n || pairs.iter().any(|(_, v)| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: pairs.len(),
            });
        }
        let mut pairs: Vec<(f64, Vec<f64>)> = pairs
            .into_iter()
            .map(|(mut l, mut v)| {
                if let Some(&first) = v.iter().find(|c| c.abs() > 1e-12) {
                    if first < 0.0 {
                        v.iter_mut().for_each(|c| *c = -*c);
                        if k % 2 == 1 {
                            l = -l;
                        }
                    }
                }
                (l, v)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        // regroup near-ties by eigenvector
        let mut start = 0;
        while start < pairs.len() {
            let mut end = start + 1;
            while end < pairs.len() {
                let (a, b) = (pairs[end - 1].0, pairs[end].0);
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    break;
                }
                end += 1;
            }
            pairs[start..end].sort_by(|a, b| {
                for (x, y) in a.1.iter().zip(&b.1) {
                    let ord = y.total_cmp(x);
                    if ord != core::cmp::Ordering::Equal {
                        return ord;
                    }
                }
                core::cmp::Ordering::Equal
            });
            start = end;
        }
        let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut eigenvectors = Matrix::zeros(n, n);
        for (j, (_, v)) in pairs.iter().enumerate() {
            for i in 0..n {
                eigenvectors[(i, j)] = v[i];
            }
        }
        let recon = SymTensor::from_rank_one_sum(k, &eigenvalues, &eigenvectors);
        let residual = frob_distance(t.as_tensor(), recon.as_tensor())?;
        Ok(OdecoDecomposition {
            order: k,
            eigenvalues,
            eigenvectors,
            residual,
            tensor_norm: t.norm(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, r: usize) -> Vec<f64> {
        linalg::column(&self.eigenvectors, r)
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn tensor_norm(&self) -> f64 {
        self.tensor_norm
    }

    /// Residual relative to `max(1, ||T||)`.
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.tensor_norm.max(1.0)
    }

    pub fn reconstruct(&self) -> SymTensor {
        SymTensor::from_rank_one_sum(self.order, &self.eigenvalues, &self.eigenvectors)
    }

    /// Largest absolute Z-eigenvalue, `max(|lambda_1|, |lambda_n|)`.
    pub fn z_spectral_radius(&self) -> f64 {
        z_spectral_radius(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    /// Random initializations per deflation stage.
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Stage acceptance: eigen-residual below `stage_tol * max(1, ||T||)`.
    pub stage_tol: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            restarts: 30,
            max_iter: 500,
            seed: 0,
            stage_tol: 1e-10,
        }
    }
}

/// Outcome of a decomposition run that never fails.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionAttempt {
    pub decomposition: OdecoDecomposition,
    /// Every deflation stage found a pair meeting the stage tolerance.
    pub stages_converged: bool,
}

/// Deflation with seeded restarts. Later stages search the orthogonal
/// complement of the vectors already found, so the returned basis is
/// orthonormal even for tensors that are not odeco.
pub fn decompose_best_effort(t: &SymTensor, opts: &DecomposeOptions) -> DecompositionAttempt {
    let n = t.dim();
    let k = t.order();
    let scale = t.norm().max(1.0);
    let stage_tol = opts.stage_tol * scale;
    let mut rng = SeededRng::new(opts.seed);
    let mut deflated = t.clone();
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut all_converged = true;

    while found.len() < n {
        if deflated.norm() <= stage_tol || found.len() + 1 == n {
            // the remaining directions are fixed by orthogonality
            for v in linalg::complete_basis(&found, n) {
                let (lambda, res) = eigen_residual(&deflated, &v);
                all_converged &= res <= stage_tol;
                pairs.push((lambda, v.clone()));
                found.push(v);
            }
            break;
        }
        let directions: &[bool] = if k.is_multiple_of(2) { &[true, false] } else { &[true] };
        let mut best: Option<ZEigenPair> = None;
        let mut fallback: Option<ZEigenPair> = None;
        for _ in 0..opts.restarts.max(1) {
            let init = rng.unit_vector(n);
            for &maximize in directions {
                let pair = power_iterate(
                    &deflated,
                    Shift::Adaptive { maximize },
                    &init,
                    stage_tol,
                    opts.max_iter,
                    &found,
                );
                if pair.converged {
                    if best.as_ref().is_none_or(|b| pair.value.abs() > b.value.abs()) {
                        best = Some(pair);
                    }
                } else if fallback.as_ref().is_none_or(|b| pair.residual < b.residual) {
                    fallback = Some(pair);
                }
            }
        }
        let chosen = match best {
            Some(p) => p,
            None => {
                all_converged = false;
                fallback.expect("at least one restart ran")
            }
        };
        deflated = deflated.deflate(chosen.value, &chosen.vector);
        pairs.push((chosen.value, chosen.vector.clone()));
        found.push(chosen.vector);
    }

    let decomposition = OdecoDecomposition::from_pairs(t, pairs).expect("n pairs of length n");
    DecompositionAttempt {
        decomposition,
        stages_converged: all_converged,
    }
}

/// Orthogonal decomposition with default options. Returns an error when
/// some deflation stage stagnated and the reconstruction misses `tol`.
pub fn odeco_decompose(t: &SymTensor, tol: f64) -> Result<OdecoDecomposition> {
    odeco_decompose_with(t, tol, &DecomposeOptions::default())
}

pub fn odeco_decompose_with(
    t: &SymTensor,
    tol: f64,
    opts: &DecomposeOptions,
) -> Result<OdecoDecomposition> {
    let attempt = decompose_best_effort(t, opts);
    let d = attempt.decomposition;
    if !attempt.stages_converged && d.residual > tol {
        return Err(Error::DecompositionFailed {
            best_residual: d.residual,
        });
    }
    Ok(d)
}

/// `(residual <= tol, residual)` for the best decomposition found.
pub fn is_odeco(t: &SymTensor, tol: f64) -> (bool, f64) {
    is_odeco_with(t, tol, &DecomposeOptions::default())
}

pub fn is_odeco_with(t: &SymTensor, tol: f64, opts: &DecomposeOptions) -> (bool, f64) {
    let r = decompose_best_effort(t, opts).decomposition.residual;
    (r <= tol, r)
}

pub fn z_spectral_radius(d: &OdecoDecomposition) -> f64 {
    match (d.eigenvalues.first(), d.eigenvalues.last()) {
        (Some(a), Some(b)) => a.abs().max(b.abs()),
        _ => 0.0,
    }
}

/// Largest eigenvalue of the square unfolding of an even-order tensor; an
/// upper bound on its largest Z-eigenvalue.
pub fn mu_max(t: &SymTensor) -> Result<f64> {
    let u = t.unfold_psi()?;
    let sym = (&u + u.transpose()) * 0.5;
    Ok(linalg::sym_eigen_extremes(&sym).1)
}
