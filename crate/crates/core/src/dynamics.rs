//! Closed-form solutions, equilibria and stability of odeco systems
//! `x' = A x^{k-1}`.
//!
//! With `A = sum_r lambda_r v_r^{∘k}` and `x0 = sum_r alpha_r v_r`, each modal
//! coefficient obeys `c_r' = lambda_r c_r^{k-1}` and
//!
//! ```text
//! c_r(t) = alpha_r (1 - (k-2) lambda_r alpha_r^{k-2} t)^{-1/(k-2)}
//! ```
//!
//! which exists until the first mode with a positive product
//! `lambda_r alpha_r^{k-2}` escapes.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spectral::{mu_max, OdecoDecomposition};
use crate::tensor::{AlmostSymTensor, SymTensor};

/// Right-hand side of an autonomous ODE.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
}

/// `x' = A x^{k-1} + b`, with `b` absent for the free system.
#[derive(Debug, Clone, PartialEq)]
pub struct HPDSystem {
    tensor: AlmostSymTensor,
    control: Option<Vec<f64>>,
}

impl HPDSystem {
    pub fn new(tensor: AlmostSymTensor, control: Option<Vec<f64>>) -> Result<Self> {
        if let Some(b) = &control {
            if b.len() != tensor.dim() {
                return Err(Error::DimensionMismatch {
                    expected: tensor.dim(),
                    found: b.len(),
                });
            }
        }
        Ok(HPDSystem { tensor, control })
    }

    pub fn free(tensor: impl Into<AlmostSymTensor>) -> Self {
        HPDSystem {
            tensor: tensor.into(),
            control: None,
        }
    }

    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    pub fn tensor(&self) -> &AlmostSymTensor {
        &self.tensor
    }

    pub fn control(&self) -> Option<&[f64]> {
        self.control.as_deref()
    }

    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.tensor.apply(x)?;
        if let Some(b) = &self.control {
            y.iter_mut().zip(b).for_each(|(yi, bi)| *yi += bi);
        }
        Ok(y)
    }
}

impl VectorField for HPDSystem {
    fn dim(&self) -> usize {
        self.tensor.dim()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.rhs(x).expect("state length equals system dimension")
    }
}

/// Residual above which a decomposition is not accepted as certifying an
/// odeco tensor: `1e-8 * max(1, ||T||)`.
pub fn odeco_tolerance(d: &OdecoDecomposition) -> f64 {
    1e-8 * d.tensor_norm().max(1.0)
}

/// `alpha = V^T x0`.
pub fn modal_coordinates(d: &OdecoDecomposition, x0: &[f64]) -> Result<Vec<f64>> {
    if x0.len() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            found: x0.len(),
        });
    }
    Ok(linalg::mat_t_vec(d.eigenvectors(), x0))
}

/// `lambda_r alpha_r^{k-2}` with the integer power keeping the sign of
/// `alpha_r`.
pub fn modal_products(d: &OdecoDecomposition, alphas: &[f64]) -> Vec<f64> {
    let e = d.order() as i32 - 2;
    d.eigenvalues()
        .iter()
        .zip(alphas)
        .map(|(l, a)| l * a.powi(e))
        .collect()
}

/// Products with magnitude at most `1e-12 * max(1, rho ||x0||^{k-2})`
/// (`rho` the Z-spectral radius) count as zero.
pub fn product_zero_tolerance(d: &OdecoDecomposition, x0: &[f64]) -> f64 {
    let e = d.order() as i32 - 2;
    1e-12 * (d.z_spectral_radius() * linalg::norm(x0).powi(e)).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitSolution {
    decomposition: OdecoDecomposition,
    alphas: Vec<f64>,
    products: Vec<f64>,
    domain_end: f64,
    blowup_modes: Vec<usize>,
}

/// Builds the closed-form solution from `x0`. Requires `k >= 3` and a
/// decomposition whose residual certifies the tensor as odeco.
pub fn explicit_solution(d: &OdecoDecomposition, x0: &[f64]) -> Result<ExplicitSolution> {
    let k = d.order();
    if k < 3 {
        return Err(Error::UnsupportedOrder {
            order: k,
            reason: "the closed form needs k >= 3; use the exponential solution for k = 2",
        });
    }
    let tolerance = odeco_tolerance(d);
    if d.residual() > tolerance {
        return Err(Error::NotOdeco {
            residual: d.residual(),
            tolerance,
        });
    }
    let alphas = modal_coordinates(d, x0)?;
    let products = modal_products(d, &alphas);
    let zero = product_zero_tolerance(d, x0);
    let blowup_modes: Vec<usize> = (0..products.len()).filter(|&r| products[r] > zero).collect();
    let km2 = (k - 2) as f64;
    let domain_end = blowup_modes
        .iter()
        .map(|&r| 1.0 / (km2 * products[r]))
        .fold(f64::INFINITY, f64::min);
    Ok(ExplicitSolution {
        decomposition: d.clone(),
        alphas,
        products,
        domain_end,
        blowup_modes,
    })
}

impl ExplicitSolution {
    pub fn decomposition(&self) -> &OdecoDecomposition {
        &self.decomposition
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn products(&self) -> &[f64] {
        &self.products
    }

    pub fn order(&self) -> usize {
        self.decomposition.order()
    }

    /// Right end of the existence interval; `+inf` when nothing escapes.
    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    /// Modes with `lambda_r alpha_r^{k-2} > 0` (0-based).
    pub fn blowup_modes(&self) -> &[usize] {
        &self.blowup_modes
    }

    /// Modal coefficients `c_r(t)`.
    pub fn modal(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) || t >= self.domain_end {
            return Err(Error::DomainViolation {
                t,
                domain_end: self.domain_end,
            });
        }
        let km2 = (self.order() - 2) as f64;
        self.alphas
            .iter()
            .zip(&self.products)
            .map(|(&a, &p)| {
                if a == 0.0 {
                    return Ok(0.0);
                }
                let base = 1.0 - km2 * p * t;
                if !(base > 0.0) {
                    return Err(Error::DomainViolation {
                        t,
                        domain_end: self.domain_end,
                    });
                }
                Ok(a * base.powf(-1.0 / km2))
            })
            .collect()
    }

    /// `x(t) = sum_r c_r(t) v_r` for `0 <= t < domain_end`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let c = self.modal(t)?;
        Ok(linalg::mat_vec(self.decomposition.eigenvectors(), &c))
    }
}

pub fn eval_solution(sol: &ExplicitSolution, t: f64) -> Result<Vec<f64>> {
    sol.eval(t)
}

/// Linear case `k = 2`: `x(t) = sum_r exp(lambda_r t) alpha_r v_r`.
pub fn eval_solution_k2(d: &OdecoDecomposition, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    if d.order() != 2 {
        return Err(Error::UnsupportedOrder {
            order: d.order(),
            reason: "the exponential solution applies to k = 2 only",
        });
    }
    let alphas = modal_coordinates(d, x0)?;
    let c: Vec<f64> = alphas
        .iter()
        .zip(d.eigenvalues())
        .map(|(a, l)| a * (l * t).exp())
        .collect();
    Ok(linalg::mat_vec(d.eigenvectors(), &c))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquilibriumStructure {
    UniqueOrigin,
    /// The listed modes (0-based) have zero eigenvalue; every point of
    /// their span is an equilibrium.
    InfinitelyMany(Vec<usize>),
}

/// Zero test `|lambda_r| <= 1e-12 * max(1, rho)`.
pub fn equilibrium_structure(d: &OdecoDecomposition) -> EquilibriumStructure {
    let tol = 1e-12 * d.z_spectral_radius().max(1.0);
    let null: Vec<usize> = (0..d.dim())
        .filter(|&r| d.eigenvalues()[r].abs() <= tol)
        .collect();
    if null.is_empty() {
        EquilibriumStructure::UniqueOrigin
    } else {
        EquilibriumStructure::InfinitelyMany(null)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    AsymptoticallyStable,
    Unstable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::AsymptoticallyStable => "asymptotically_stable",
            Verdict::Unstable => "unstable",
        }
    }

    /// Ordering by strength of the stability claim.
    fn strength(self) -> u8 {
        match self {
            Verdict::Unstable => 0,
            Verdict::Stable => 1,
            Verdict::AsymptoticallyStable => 2,
        }
    }

    /// `self` claims at least as much stability as `other`.
    pub fn at_least(self, other: Verdict) -> bool {
        self.strength() >= other.strength()
    }
}

/// Criterion that produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Signs of `lambda_r alpha_r^{k-2}` for a given initial state.
    ModalProducts,
    /// Signs of the eigenvalues alone (even `k`, every initial state).
    EigenvalueSigns,
    /// Sign of the largest eigenvalue of the square unfolding (sufficient only).
    Unfolding,
}

impl Basis {
    pub fn as_str(self) -> &'static str {
        match self {
            Basis::ModalProducts => "modal_products",
            Basis::EigenvalueSigns => "eigenvalue_signs",
            Basis::Unfolding => "unfolding_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub verdict: Verdict,
    /// Modal products, eigenvalues, or `[mu_max]` depending on `basis`.
    pub mode_products: Vec<f64>,
    pub blowup_time: Option<f64>,
    pub basis: Basis,
}

fn verdict_from_signs(values: &[f64], zero: f64) -> Verdict {
    if values.iter().any(|&p| p > zero) {
        Verdict::Unstable
    } else if values.iter().all(|&p| p < -zero) {
        Verdict::AsymptoticallyStable
    } else {
        Verdict::Stable
    }
}

/// Verdict for the trajectory from `x0`: unstable if some modal product
/// is positive, asymptotically stable if all are negative, stable otherwise.
pub fn classify_stability(d: &OdecoDecomposition, x0: &[f64]) -> Result<StabilityReport> {
    let k = d.order();
    if k < 3 {
        return Err(Error::UnsupportedOrder {
            order: k,
            reason: "modal stability test needs k >= 3",
        });
    }
    let alphas = modal_coordinates(d, x0)?;
    let products = modal_products(d, &alphas);
    let zero = product_zero_tolerance(d, x0);
    let verdict = verdict_from_signs(&products, zero);
    let blowup_time = if verdict == Verdict::Unstable {
        let km2 = (k - 2) as f64;
        products
            .iter()
            .filter(|&&p| p > zero)
            .map(|&p| 1.0 / (km2 * p))
            .reduce(f64::min)
    } else {
        None
    };
    Ok(StabilityReport {
        verdict,
        mode_products: products,
        blowup_time,
        basis: Basis::ModalProducts,
    })
}

/// Verdict valid for every initial state, from eigenvalue signs (even k).
pub fn classify_global_even(d: &OdecoDecomposition) -> Result<StabilityReport> {
    let k = d.order();
    if k < 4 || k % 2 == 1 {
        return Err(Error::UnsupportedOrder {
            order: k,
            reason: "the eigenvalue-sign test needs even k >= 4",
        });
    }
    let zero = 1e-12 * d.z_spectral_radius().max(1.0);
    Ok(StabilityReport {
        verdict: verdict_from_signs(d.eigenvalues(), zero),
        mode_products: d.eigenvalues().to_vec(),
        blowup_time: None,
        basis: Basis::EigenvalueSigns,
    })
}

/// Sufficient test from the square unfolding: `mu_max < 0` gives
/// asymptotic stability, `mu_max = 0` stability; positive values are
/// inconclusive and return `None`.
pub fn classify_by_unfolding(t: &SymTensor) -> Result<Option<StabilityReport>> {
    let k = t.order();
    if k < 4 || k % 2 == 1 {
        return Err(Error::UnsupportedOrder {
            order: k,
            reason: "the unfolding bound needs even k >= 4",
        });
    }
    let mu = mu_max(t)?;
    let zero = 1e-12 * t.norm().max(1.0);
    let verdict = if mu < -zero {
        Verdict::AsymptoticallyStable
    } else if mu <= zero {
        Verdict::Stable
    } else {
        return Ok(None);
    };
    Ok(Some(StabilityReport {
        verdict,
        mode_products: vec![mu],
        blowup_time: None,
        basis: Basis::Unfolding,
    }))
}

/// Every modal product strictly negative.
pub fn in_region_of_attraction(d: &OdecoDecomposition, x: &[f64]) -> Result<bool> {
    if d.order() < 3 {
        return Err(Error::UnsupportedOrder {
            order: d.order(),
            reason: "region of attraction is defined for k >= 3",
        });
    }
    let alphas = modal_coordinates(d, x)?;
    Ok(modal_products(d, &alphas).iter().all(|&p| p < 0.0))
}
