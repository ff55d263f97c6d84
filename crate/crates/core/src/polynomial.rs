//! Homogeneous polynomial systems and their tensor representations.
//!
//! Each monomial coefficient is split evenly across the multinomial-many
//! index tuples realizing its exponent vector, which gives the unique
//! symmetric representative.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::{AlmostSymTensor, SymTensor, Tensor};

/// `coeff * x_1^{e_1} ... x_n^{e_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>, coeff: f64) -> Self {
        Monomial { exponents, coeff }
    }

    pub fn degree(&self) -> usize {
        self.exponents.iter().map(|&e| e as usize).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .fold(self.coeff, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }
}

/// A homogeneous polynomial system `x_i' = p_i(x)` with every monomial of
/// total degree `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSpec {
    dim: usize,
    degree: usize,
    equations: Vec<Vec<Monomial>>,
}

impl PolynomialSpec {
    pub fn new(dim: usize, degree: usize, equations: Vec<Vec<Monomial>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive"));
        }
        if degree == 0 {
            return Err(Error::InvalidArgument("degree must be at least one"));
        }
        if equations.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: equations.len(),
            });
        }
        for (i, eq) in equations.iter().enumerate() {
            validate_form(dim, degree, eq, i)?;
        }
        Ok(PolynomialSpec {
            dim,
            degree,
            equations,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn equations(&self) -> &[Vec<Monomial>] {
        &self.equations
    }

    /// Direct monomial evaluation of the right-hand side.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.equations
            .iter()
            .map(|eq| eq.iter().map(|m| m.eval(x)).sum())
            .collect()
    }
}

fn validate_form(dim: usize, degree: usize, monomials: &[Monomial], equation: usize) -> Result<()> {
    let mut seen = BTreeMap::new();
    for m in monomials {
        if m.exponents.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.exponents.len(),
            });
        }
        if m.degree() != degree {
            return Err(Error::DegreeMismatch {
                equation,
                expected: degree,
                found: m.degree(),
            });
        }
        if seen.insert(m.exponents.clone(), ()).is_some() {
            return Err(Error::DuplicateMonomial { equation });
        }
    }
    Ok(())
}

/// `d! / (e_1! ... e_n!)`.
fn multinomial(exponents: &[u32]) -> f64 {
    let mut total = 0u32;
    let mut acc = 1.0;
    for &e in exponents {
        for j in 1..=e {
            total += 1;
            acc *= f64::from(total) / f64::from(j);
        }
    }
    acc
}

fn exponents_of(idx: &[usize], dim: usize) -> Vec<u32> {
    let mut e = vec![0u32; dim];
    for &j in idx {
        e[j] += 1;
    }
    e
}

/// Writes the symmetric representative of one form into the slice
/// `out[.., offset]` with stride `stride` (entries of the form occupy the
/// leading `degree` indices).
fn fill_form(dim: usize, degree: usize, monomials: &[Monomial], out: &mut [f64], stride: usize, offset: usize) {
    let lookup: BTreeMap<&[u32], f64> = monomials
        .iter()
        .map(|m| (m.exponents.as_slice(), m.coeff / multinomial(&m.exponents)))
        .collect();
    let slots = dim.pow(degree as u32);
    let mut idx = vec![0usize; degree];
    for lin in 0..slots {
        let mut rem = lin;
        for slot in idx.iter_mut().rev() {
            *slot = rem % dim;
            rem /= dim;
        }
        if let Some(&c) = lookup.get(exponents_of(&idx, dim).as_slice()) {
            out[lin * stride + offset] = c;
        }
    }
}

/// Reads one form back from its symmetric representative. Monomials come
/// out in descending lexicographic exponent order; zero coefficients are
/// dropped.
fn read_form(dim: usize, degree: usize, data: &[f64], stride: usize, offset: usize) -> Vec<Monomial> {
    let slots = dim.pow(degree as u32);
    let mut idx = vec![0usize; degree];
    let mut out = Vec::new();
    for lin in 0..slots {
        let mut rem = lin;
        for slot in idx.iter_mut().rev() {
            *slot = rem % dim;
            rem /= dim;
        }
        if idx.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        let e = exponents_of(&idx, dim);
        let coeff = multinomial(&e) * data[lin * stride + offset];
        if coeff != 0.0 {
            out.push(Monomial::new(e, coeff));
        }
    }
    out
}

/// Order-`(degree+1)` almost-symmetric tensor whose slice for last index
/// `i` represents equation `i`.
pub fn from_polynomial(spec: &PolynomialSpec) -> AlmostSymTensor {
    let (n, d) = (spec.dim, spec.degree);
    let mut data = vec![0.0; n.pow(d as u32 + 1)];
    for (i, eq) in spec.equations.iter().enumerate() {
        fill_form(n, d, eq, &mut data, n, i);
    }
    AlmostSymTensor::from_tensor_unchecked(Tensor::from_vec(d + 1, n, data).expect("sized above"))
}

/// Inverse of [`from_polynomial`].
pub fn to_polynomial(t: &AlmostSymTensor) -> PolynomialSpec {
    let (n, d) = (t.dim(), t.order() - 1);
    let equations = (0..n)
        .map(|i| read_form(n, d, t.as_tensor().data(), n, i))
        .collect();
    PolynomialSpec {
        dim: n,
        degree: d,
        equations,
    }
}

/// Supersymmetric order-`degree` tensor of a single homogeneous form, so
/// that `T x^degree` reproduces the form.
pub fn form_to_tensor(dim: usize, degree: usize, monomials: &[Monomial]) -> Result<SymTensor> {
    if degree < 2 {
        return Err(Error::UnsupportedOrder {
            order: degree,
            reason: "forms need degree >= 2 to give a tensor of order >= 2",
        });
    }
    validate_form(dim, degree, monomials, 0)?;
    let mut data = vec![0.0; dim.pow(degree as u32)];
    fill_form(dim, degree, monomials, &mut data, 1, 0);
    SymTensor::new(Tensor::from_vec(degree, dim, data)?)
}

/// Coefficients of the form `T x^k`.
pub fn tensor_to_form(t: &SymTensor) -> Vec<Monomial> {
    read_form(t.dim(), t.order(), t.as_tensor().data(), 1, 0)
}
