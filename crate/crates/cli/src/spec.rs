//! The JSON system file read by every command.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "degree": 3,
//!   "equations": [
//!     [{"exponents": [3, 0], "coeff": 1.0}, {"exponents": [1, 2], "coeff": 3.0}],
//!     [{"exponents": [2, 1], "coeff": 3.0}, {"exponents": [0, 3], "coeff": 1.0}]
//!   ],
//!   "x0": [0.5, 0.1]
//! }
//! ```
//!
//! `degree` is the common degree `k-1` of the right-hand sides. Instead of
//! `equations` a file may give `tensor`, the `n^k` entries of the order-`k`
//! tensor in row-major order with the last index selecting the equation.
//! `control` adds a constant input `b`, and `x0` supplies an initial state.

use std::path::Path;

use hpds_core::dynamics::HPDSystem;
use hpds_core::polynomial::{from_polynomial, Monomial, PolynomialSpec};
use hpds_core::tensor::{AlmostSymTensor, SymTensor, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpecFile {
    pub dim: usize,
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equations: Option<Vec<Vec<Term>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl SystemSpecFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    /// A file carrying `t` in its flat form.
    pub fn from_tensor(t: &Tensor, control: Option<Vec<f64>>, x0: Option<Vec<f64>>) -> Self {
        SystemSpecFile {
            dim: t.dim(),
            degree: t.order() - 1,
            equations: None,
            tensor: Some(t.data().to_vec()),
            control,
            x0,
        }
    }

    /// Validates the file and assembles the system.
    pub fn system(&self) -> Result<System, CliError> {
        if self.dim == 0 {
            return Err(CliError::Input("\"dim\" must be positive".into()));
        }
        if self.degree == 0 {
            return Err(CliError::Input("\"degree\" must be at least 1".into()));
        }
        let tensor = match (&self.equations, &self.tensor) {
            (Some(eqs), None) => {
                let equations = eqs
                    .iter()
                    .map(|eq| eq.iter().map(|m| Monomial::new(m.exponents.clone(), m.coeff)).collect())
                    .collect();
                from_polynomial(&PolynomialSpec::new(self.dim, self.degree, equations)?)
            }
            (None, Some(flat)) => {
                let expected = checked_len(self.dim, self.degree + 1)?;
                if flat.len() != expected {
                    return Err(CliError::Input(format!(
                        "\"tensor\" holds {} entries, expected dim^(degree+1) = {expected}",
                        flat.len()
                    )));
                }
                // only the part symmetric in the input modes enters the field
                AlmostSymTensor::project(&Tensor::from_vec(self.degree + 1, self.dim, flat.clone())?)?
            }
            (Some(_), Some(_)) => return Err(CliError::Input("give either \"equations\" or \"tensor\", not both".into())),
            (None, None) => return Err(CliError::Input("one of \"equations\" or \"tensor\" is required".into())),
        };
        for (key, v) in [("control", &self.control), ("x0", &self.x0)] {
            if let Some(v) = v {
                if v.len() != self.dim {
                    return Err(CliError::Input(format!("\"{key}\" has {} entries, expected {}", v.len(), self.dim)));
                }
            }
        }
        Ok(System {
            tensor,
            control: self.control.clone(),
            x0: self.x0.clone(),
        })
    }
}

fn checked_len(dim: usize, order: usize) -> Result<usize, CliError> {
    dim.checked_pow(order as u32)
        .filter(|&n| n <= 1 << 24)
        .ok_or_else(|| CliError::Input(format!("a tensor with dim {dim} and order {order} is too large")))
}

/// A validated system `x' = A x^{k-1} (+ b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub tensor: AlmostSymTensor,
    pub control: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
}

impl System {
    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    /// Nonzero control, if any.
    pub fn active_control(&self) -> Option<&[f64]> {
        self.control.as_deref().filter(|b| b.iter().any(|&x| x != 0.0))
    }

    /// Symmetrized tensor when the system is symmetric to
    /// `tol * max(1, ||A||)`.
    pub fn symmetric(&self, tol: f64) -> Option<SymTensor> {
        let t = self.tensor.as_tensor();
        (t.symmetry_deviation() <= tol * t.norm().max(1.0)).then(|| t.symmetrize())
    }

    pub fn x0(&self) -> Result<&[f64], CliError> {
        self.x0
            .as_deref()
            .ok_or_else(|| CliError::Input("this command needs \"x0\" in the system file".into()))
    }

    pub fn hpds(&self) -> Result<HPDSystem, CliError> {
        Ok(HPDSystem::new(self.tensor.clone(), self.active_control().map(<[f64]>::to_vec))?)
    }
}
