//! Tensor-based analysis of homogeneous polynomial dynamical systems.
//!
//! A system `x' = A x^{k-1}` is stored as an order-`k` tensor whose first
//! `k-1` modes are symmetric. When `A` is supersymmetric and orthogonally
//! decomposable the flow splits into scalar modal equations with closed-form
//! solutions; the [`transform`] module extends this to systems that are
//! similar to such a tensor.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// When std is linked (tests, dev-dependencies) its inherent float methods
// shadow `num_traits::Float`, leaving those imports unused.
#![allow(unused_imports)]

extern crate alloc;

pub mod control;
pub mod dynamics;
pub mod error;
pub mod hypergeometric;
pub mod linalg;
pub mod oracle;
pub mod polynomial;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod transform;

pub use error::{Error, Result};
pub use tensor::{AlmostSymTensor, SymTensor, Tensor};
