//! Transforming a general system to an odeco one.
//!
//! A system tensor that admits the structured decomposition
//!
//! ```text
//! A = sum_r w_r v_r ∘ ... ∘ v_r ∘ W_r,    W = V^{-T}
//! ```
//!
//! becomes odeco under `x = P y` with `P = W U^T` for any orthogonal `U`:
//! the transformed tensor is `sum_r w_r u_r^{∘k}`. The factors are fitted by
//! damped Gauss-Newton (Levenberg-Marquardt) over `(V, w)` with `W` tied to
//! `V` by construction.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::control::{controlled_escape_time, modal_problems, modal_states};
use crate::dynamics::explicit_solution;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::SeededRng;
use crate::spectral::OdecoDecomposition;
use crate::tensor::{AlmostSymTensor, SymTensor, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// A restart meeting `fit_error <= stop_tol * max(1, ||A||)` ends the
    /// search.
    pub stop_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 20,
            max_iter: 400,
            seed: 0,
            stop_tol: 1e-14,
        }
    }
}

impl FitOptions {
    /// Seed used by restart `i`.
    pub fn restart_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

/// Acceptance threshold on the fit error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub epsilon: f64,
    /// Compare against `epsilon` itself instead of `epsilon * ||A||`.
    pub absolute: bool,
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold {
            epsilon: 1e-14,
            absolute: false,
        }
    }
}

impl Threshold {
    pub fn relative(epsilon: f64) -> Self {
        Threshold {
            epsilon,
            absolute: false,
        }
    }

    pub fn absolute(epsilon: f64) -> Self {
        Threshold {
            epsilon,
            absolute: true,
        }
    }

    pub fn bound(&self, tensor_norm: f64) -> f64 {
        if self.absolute {
            self.epsilon
        } else {
            self.epsilon * tensor_norm
        }
    }
}

/// Fitted structured decomposition, optionally with a transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformModel {
    order: usize,
    /// Unit-norm columns `v_r`.
    v: Matrix,
    /// `W = V^{-T}`.
    w_mat: Matrix,
    weights: Vec<f64>,
    fit_error: f64,
    tensor_norm: f64,
    seed: u64,
    iterations: usize,
    transformation: Option<(Matrix, Matrix)>,
}

impl TransformModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    /// `(V^{-1})^T`.
    pub fn w(&self) -> &Matrix {
        &self.w_mat
    }

    /// The weighted last-mode factor `W diag(weights)`.
    pub fn vf(&self) -> Matrix {
        let mut vf = self.w_mat.clone();
        for (j, w) in self.weights.iter().enumerate() {
            vf.column_mut(j).scale_mut(*w);
        }
        vf
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `||A - Â||_F` for the input `A`.
    pub fn fit_error(&self) -> f64 {
        self.fit_error
    }

    pub fn relative_fit_error(&self) -> f64 {
        if self.tensor_norm > 0.0 {
            self.fit_error / self.tensor_norm
        } else {
            self.fit_error
        }
    }

    pub fn tensor_norm(&self) -> f64 {
        self.tensor_norm
    }

    /// Seed of the restart that produced the model.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn p(&self) -> Option<&Matrix> {
        self.transformation.as_ref().map(|t| &t.0)
    }

    pub fn u(&self) -> Option<&Matrix> {
        self.transformation.as_ref().map(|t| &t.1)
    }

    /// `sum_r w_r v_r^{∘(k-1)} ∘ W_r`.
    pub fn reconstruct(&self) -> AlmostSymTensor {
        AlmostSymTensor::from_tensor_unchecked(assemble(self.order, &self.v, &self.w_mat, &self.weights))
    }
}

fn assemble(order: usize, v: &Matrix, w_mat: &Matrix, weights: &[f64]) -> Tensor {
    let n = v.nrows();
    let mut t = Tensor::zeros(order, n);
    for (r, &wr) in weights.iter().enumerate() {
        let vr = linalg::column(v, r);
        let wc = linalg::column(w_mat, r);
        let mut factors: Vec<&[f64]> = (0..order - 1).map(|_| vr.as_slice()).collect();
        factors.push(&wc);
        t.add_rank_one(wr, &factors);
    }
    t
}

/// Least-squares weights for fixed `V`: Gram matrix
/// `G_rs = (v_r . v_s)^{k-1} (W_r . W_s)`, right-hand side `W_r . A v_r^{k-1}`.
fn solve_weights(a: &AlmostSymTensor, v: &Matrix, w_mat: &Matrix) -> Vec<f64> {
    let n = v.ncols();
    let k = a.order() as i32;
    let gv = v.transpose() * v;
    let gw = w_mat.transpose() * w_mat;
    let gram = Matrix::from_fn(n, n, |r, s| gv[(r, s)].powi(k - 1) * gw[(r, s)]);
    let rhs = DVector::from_fn(n, |r, _| {
        let av = a.apply(&linalg::column(v, r)).expect("dims");
        linalg::dot(&av, &linalg::column(w_mat, r))
    });
    let svd = gram.svd(true, true);
    let cutoff = 1e-13 * svd.singular_values.max();
    match svd.solve(&rhs, cutoff) {
        Ok(w) => w.iter().copied().collect(),
        Err(_) => vec![0.0; n],
    }
}

/// Residual `Â - A` (row-major entries) and, when requested, its Jacobian
/// with respect to `(vec(V), w)`; `vec` is column-major, so `V_ab` sits at
/// `a + n b`.
fn residual_and_jacobian(
    a: &AlmostSymTensor,
    v: &Matrix,
    w_mat: &Matrix,
    weights: &[f64],
    with_jacobian: bool,
) -> (Vec<f64>, Option<Matrix>) {
    let n = v.nrows();
    let k = a.order();
    let data = a.as_tensor().data();
    let m = data.len();
    let mut res = vec![0.0; m];
    let mut jac = with_jacobian.then(|| Matrix::zeros(m, n * n + n));
    let mut idx = vec![0usize; k];
    let mut prods = vec![0.0; n];
    let mut prefix = vec![0.0; k];
    let mut suffix = vec![0.0; k];
    for lin in 0..m {
        a.as_tensor().multi_index(lin, &mut idx);
        let j = idx[k - 1];
        let lead = &idx[..k - 1];
        let mut value = 0.0;
        for b in 0..n {
            prods[b] = lead.iter().map(|&i| v[(i, b)]).product();
            value += weights[b] * prods[b] * w_mat[(j, b)];
        }
        res[lin] = value - data[lin];
        let Some(jac) = jac.as_mut() else { continue };
        for b in 0..n {
            jac[(lin, n * n + b)] = prods[b] * w_mat[(j, b)];
            // d/dV_ab of prod_q v_{i_q b}: sum over positions holding a
            let len = k - 1;
            let mut acc = 1.0;
            for p in 0..len {
                prefix[p] = acc;
                acc *= v[(lead[p], b)];
            }
            acc = 1.0;
            for p in (0..len).rev() {
                suffix[p] = acc;
                acc *= v[(lead[p], b)];
            }
            let scale = weights[b] * w_mat[(j, b)];
            for p in 0..len {
                jac[(lin, lead[p] + n * b)] += scale * prefix[p] * suffix[p];
            }
        }
        // dW = -W dV^T W: contributes -(sum_r w_r W_ar prod_r) W_jb
        for aa in 0..n {
            let q: f64 = (0..n).map(|r| weights[r] * w_mat[(aa, r)] * prods[r]).sum();
            if q == 0.0 {
                continue;
            }
            for b in 0..n {
                jac[(lin, aa + n * b)] -= q * w_mat[(j, b)];
            }
        }
    }
    (res, jac)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Rescales columns of `V` to unit norm, pushing the scale into the weights.
fn normalize_columns(order: usize, v: &mut Matrix, weights: &mut [f64]) {
    for r in 0..v.ncols() {
        let s = v.column(r).norm();
        if s > 0.0 {
            v.column_mut(r).unscale_mut(s);
            weights[r] *= s.powi(order as i32 - 2);
        }
    }
}

/// One Levenberg-Marquardt run from a seeded random start.
pub fn fit_single(a: &AlmostSymTensor, seed: u64, max_iter: usize, stop_tol: f64) -> Result<TransformModel> {
    let n = a.dim();
    let k = a.order();
    if k < 3 {
        return Err(Error::UnsupportedOrder {
            order: k,
            reason: "the structured fit needs k >= 3",
        });
    }
    let norm = a.norm();
    let target = stop_tol * norm.max(1.0);
    let mut rng = SeededRng::new(seed);
    let mut v = rng.gaussian_matrix(n, n);
    let mut w_mat = linalg::checked_inverse(&v)?.transpose();
    let mut weights = solve_weights(a, &v, &w_mat);
    normalize_columns(k, &mut v, &mut weights);
    w_mat = linalg::checked_inverse(&v)?.transpose();

    let (mut res, mut jac) = residual_and_jacobian(a, &v, &w_mat, &weights, true);
    let mut cost = sum_sq(&res);
    let mut mu = {
        let j = jac.as_ref().expect("requested");
        let diag_max = (0..j.ncols()).map(|c| j.column(c).norm_squared()).fold(0.0, f64::max);
        1e-3 * diag_max.max(1e-300)
    };
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < max_iter && cost.sqrt() > target {
        iterations += 1;
        let j = jac.as_ref().expect("current jacobian");
        let jt = j.transpose();
        let h = &jt * j;
        let g = &jt * DVector::from_column_slice(&res);
        let mut accepted = false;
        while mu < 1e300 {
            let mut damped = h.clone();
            for d in 0..damped.nrows() {
                damped[(d, d)] += mu;
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 4.0;
                continue;
            };
            let mut v_new = v.clone();
            for b in 0..n {
                for aa in 0..n {
                    v_new[(aa, b)] += step[aa + n * b];
                }
            }
            let mut w_new: Vec<f64> = (0..n).map(|r| weights[r] + step[n * n + r]).collect();
            let Ok(inv) = linalg::checked_inverse(&v_new) else {
                mu *= 4.0;
                continue;
            };
            let wm_new = inv.transpose();
            let (r_new, _) = residual_and_jacobian(a, &v_new, &wm_new, &w_new, false);
            let c_new = sum_sq(&r_new);
            if c_new < cost {
                normalize_columns(k, &mut v_new, &mut w_new);
                v = v_new;
                weights = w_new;
                w_mat = linalg::checked_inverse(&v)?.transpose();
                mu = (mu / 3.0).max(1e-300);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
        let (r_next, j_next) = residual_and_jacobian(a, &v, &w_mat, &weights, true);
        let improvement = cost - sum_sq(&r_next);
        res = r_next;
        jac = j_next;
        let previous = cost;
        cost = sum_sq(&res);
        // near the rounding floor progress stalls; stop after a few weak steps
        if improvement <= 1e-3 * previous && cost.sqrt() <= 1e-8 * norm.max(1.0) {
            stalled += 1;
            if stalled >= 4 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(canonical_model(a, v, weights, seed, iterations))
}

/// Unit columns, first significant entry positive, columns sorted by
/// descending weight (ties by descending vector).
fn canonical_model(a: &AlmostSymTensor, mut v: Matrix, mut weights: Vec<f64>, seed: u64, iterations: usize) -> TransformModel {
    let n = a.dim();
    let k = a.order();
    normalize_columns(k, &mut v, &mut weights);
    for r in 0..n {
        let first = v.column(r).iter().copied().find(|c| c.abs() > 1e-12);
        if first.is_some_and(|f| f < 0.0) {
            v.column_mut(r).neg_mut();
            if k % 2 == 1 {
                weights[r] = -weights[r];
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        weights[y].total_cmp(&weights[x]).then_with(|| {
            for i in 0..n {
                let o = v[(i, y)].total_cmp(&v[(i, x)]);
                if o != core::cmp::Ordering::Equal {
                    return o;
                }
            }
            core::cmp::Ordering::Equal
        })
    });
    let v = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    let weights: Vec<f64> = order.iter().map(|&r| weights[r]).collect();
    let w_mat = linalg::checked_inverse(&v)
        .map(|m| m.transpose())
        .unwrap_or_else(|_| Matrix::zeros(n, n));
    let recon = assemble(k, &v, &w_mat, &weights);
    let fit_error = crate::tensor::frob_distance(a.as_tensor(), &recon).unwrap_or(f64::INFINITY);
    TransformModel {
        order: k,
        v,
        w_mat,
        weights,
        fit_error,
        tensor_norm: a.norm(),
        seed,
        iterations,
        transformation: None,
    }
}

/// Picks the model of the lowest seed meeting the stop tolerance, else the
/// smallest error (ties by seed). Independent of the order of `fits`.
pub fn select_best(fits: Vec<Result<TransformModel>>, stop_tol: f64) -> Result<TransformModel> {
    let models: Vec<TransformModel> = fits.into_iter().filter_map(|f| f.ok()).collect();
    if models.is_empty() {
        return Err(Error::FitFailed {
            best_error: f64::INFINITY,
        });
    }
    let meets = |m: &TransformModel| m.fit_error <= stop_tol * m.tensor_norm.max(1.0);
    if let Some(m) = models.iter().filter(|m| meets(m)).min_by_key(|m| m.seed) {
        return Ok(m.clone());
    }
    let best = models
        .into_iter()
        .min_by(|x, y| x.fit_error.total_cmp(&y.fit_error).then(x.seed.cmp(&y.seed)))
        .expect("nonempty");
    if !best.fit_error.is_finite() {
        return Err(Error::FitFailed {
            best_error: best.fit_error,
        });
    }
    Ok(best)
}

/// Best structured fit over seeded restarts, run in seed order and stopped
/// at the first restart meeting the stop tolerance.
pub fn fit_structured_cpd(a: &AlmostSymTensor, opts: &FitOptions) -> Result<TransformModel> {
    if a.order() < 3 {
        return Err(Error::UnsupportedOrder {
            order: a.order(),
            reason: "the structured fit needs k >= 3",
        });
    }
    let mut fits = Vec::new();
    for i in 0..opts.restarts.max(1) {
        let fit = fit_single(a, opts.restart_seed(i), opts.max_iter, opts.stop_tol);
        let done = fit
            .as_ref()
            .is_ok_and(|m| m.fit_error <= opts.stop_tol * m.tensor_norm.max(1.0));
        fits.push(fit);
        if done {
            break;
        }
    }
    select_best(fits, opts.stop_tol)
}

/// `(fit_error <= threshold, model)`.
pub fn is_transformable(a: &AlmostSymTensor, threshold: Threshold, opts: &FitOptions) -> Result<(bool, TransformModel)> {
    let model = fit_structured_cpd(a, opts)?;
    Ok((accepts(&model, threshold), model))
}

pub fn accepts(model: &TransformModel, threshold: Threshold) -> bool {
    model.fit_error <= threshold.bound(model.tensor_norm)
}

/// Attaches `P = W U^T`, so that `P^T V = U`.
pub fn build_transformation(model: &TransformModel, u: &Matrix) -> Result<TransformModel> {
    let n = model.dim();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.nrows(),
        });
    }
    let deviation = linalg::orthogonality_defect(u);
    if deviation > 1e-10 {
        return Err(Error::NotOrthogonal { deviation });
    }
    let w_mat = linalg::checked_inverse(&model.v)?.transpose();
    let p = &w_mat * u.transpose();
    let mut out = model.clone();
    out.w_mat = w_mat;
    out.transformation = Some((p, u.clone()));
    Ok(out)
}

fn require_transformation(model: &TransformModel) -> Result<(&Matrix, &Matrix)> {
    model
        .transformation
        .as_ref()
        .map(|(p, u)| (p, u))
        .ok_or(Error::InvalidArgument("build the transformation first"))
}

/// `sum_r w_r u_r^{∘k}`.
pub fn transformed_tensor(model: &TransformModel) -> Result<SymTensor> {
    let (_, u) = require_transformation(model)?;
    Ok(SymTensor::from_rank_one_sum(model.order, &model.weights, u))
}

/// Orthogonal decomposition of the transformed tensor, read off the model.
pub fn transformed_decomposition(model: &TransformModel) -> Result<OdecoDecomposition> {
    let (_, u) = require_transformation(model)?;
    let t = transformed_tensor(model)?;
    let pairs = (0..model.dim())
        .map(|r| (model.weights[r], linalg::column(u, r)))
        .collect();
    OdecoDecomposition::from_pairs(&t, pairs)
}

/// `P^{-1} = U V^T`.
pub fn inverse_transformation(model: &TransformModel) -> Result<Matrix> {
    let (_, u) = require_transformation(model)?;
    Ok(u * model.v.transpose())
}

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct SolveOptions {
    pub threshold: Threshold,
    pub fit: FitOptions,
    /// Orthogonal target basis; identity when absent.
    pub basis: Option<Matrix>,
    /// Solve with the fitted model even when it misses the threshold.
    pub allow_approximation: bool,
}


#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSolution {
    pub model: TransformModel,
    pub transformable: bool,
    /// Requested times reached before any escape.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Escape time when it falls inside the requested horizon.
    pub blowup: Option<f64>,
}

/// Solves `x' = A x^{k-1} (+ b)` through the odeco transformation:
/// `y0 = P^{-1} x0`, closed-form `y(t)`, then `x(t) = P y(t)`.
pub fn solve_general(
    a: &AlmostSymTensor,
    b: Option<&[f64]>,
    x0: &[f64],
    times: &[f64],
    opts: &SolveOptions,
) -> Result<GeneralSolution> {
    let n = a.dim();
    if x0.len() != n || b.is_some_and(|b| b.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if times.iter().any(|&t| !(t >= 0.0)) || times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("times must be sorted and non-negative"));
    }
    let (transformable, model) = is_transformable(a, opts.threshold, &opts.fit)?;
    if !transformable && !opts.allow_approximation {
        return Err(Error::NotTransformable {
            fit_error: model.fit_error,
            threshold: opts.threshold.bound(model.tensor_norm),
        });
    }
    let u = opts.basis.clone().unwrap_or_else(|| Matrix::identity(n, n));
    let model = build_transformation(&model, &u)?;
    let d = transformed_decomposition(&model)?;
    let (p, _) = require_transformation(&model)?;
    let p = p.clone();
    let p_inv = inverse_transformation(&model)?;
    let y0 = linalg::mat_vec(&p_inv, x0);
    let control = b.filter(|b| b.iter().any(|&x| x != 0.0));

    let mut out_t = Vec::new();
    let mut out_x = Vec::new();
    let mut blowup = None;
    match control {
        None => {
            let sol = explicit_solution(&d, &y0)?;
            for &t in times {
                if t >= sol.domain_end() {
                    blowup = Some(sol.domain_end());
                    break;
                }
                out_t.push(t);
                out_x.push(linalg::mat_vec(&p, &sol.eval(t)?));
            }
        }
        Some(b) => {
            let by = linalg::mat_vec(&p_inv, b);
            let problems = modal_problems(&d, &by, &y0)?;
            let escape = controlled_escape_time(&problems);
            for &t in times {
                if t >= escape {
                    blowup = Some(escape);
                    break;
                }
                let c = modal_states(&problems, t)?;
                out_t.push(t);
                out_x.push(linalg::mat_vec(&p, &linalg::mat_vec(d.eigenvectors(), &c)));
            }
        }
    }
    Ok(GeneralSolution {
        model,
        transformable,
        times: out_t,
        states: out_x,
        blowup,
    })
}
