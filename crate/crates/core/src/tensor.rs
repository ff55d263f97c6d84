//! Dense cubical tensors, supersymmetric and almost-symmetric wrappers, and
//! the multilinear products used by the dynamics.
//!
//! Storage is a flat row-major array: the entry at multi-index
//! `(j_1, ..., j_k)` (0-based) sits at `sum_p j_p * n^(k-p)`, so the last
//! mode varies fastest. The last mode is the free (output) mode of
//! [`AlmostSymTensor::apply`].

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance used when checking symmetry on ingestion.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Dense order-`k`, dimension-`n` cubical tensor with no symmetry assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(order: usize, dim: usize) -> Self {
        Tensor {
            order,
            dim,
            data: vec![0.0; dim.pow(order as u32)],
        }
    }

    pub fn from_vec(order: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let expected = dim
            .checked_pow(order as u32)
            .ok_or(Error::InvalidArgument("tensor too large"))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Tensor { order, dim, data })
    }

    /// Builds a tensor from an explicit shape, rejecting non-cubical shapes.
    pub fn from_shape(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let dim = *shape.first().ok_or(Error::InvalidArgument("empty shape"))?;
        if shape.iter().any(|&s| s != dim) {
            return Err(Error::NotCubical);
        }
        Tensor::from_vec(shape.len(), dim, data)
    }

    /// `weight * v ∘ v ∘ ... ∘ v` with `order` factors.
    pub fn rank_one_power(weight: f64, v: &[f64], order: usize) -> Self {
        let mut t = Tensor::zeros(order, v.len());
        t.add_rank_one_power(weight, v);
        t
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order);
        index.iter().fold(0, |acc, &j| acc * self.dim + j)
    }

    pub fn multi_index(&self, mut lin: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = lin % self.dim;
            lin /= self.dim;
        }
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.linear_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let i = self.linear_index(index);
        self.data[i] = value;
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Adds `weight * a_1 ∘ a_2 ∘ ... ∘ a_k`.
    pub fn add_rank_one(&mut self, weight: f64, factors: &[&[f64]]) {
        assert_eq!(factors.len(), self.order);
        let mut idx = vec![0usize; self.order];
        for lin in 0..self.data.len() {
            self.multi_index(lin, &mut idx);
            let prod: f64 = idx
                .iter()
                .zip(factors)
                .map(|(&j, f)| f[j])
                .product();
            self.data[lin] += weight * prod;
        }
    }

    /// Adds `weight * v^{∘k}`.
    pub fn add_rank_one_power(&mut self, weight: f64, v: &[f64]) {
        let factors: Vec<&[f64]> = (0..self.order).map(|_| v).collect();
        self.add_rank_one(weight, &factors);
    }

    fn check_vector(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Contracts the first `modes` modes with `x`, returning the remaining
    /// order-`(k - modes)` block as a flat array.
    pub fn contract_leading(&self, x: &[f64], modes: usize) -> Vec<f64> {
        assert!(modes <= self.order);
        let n = self.dim;
        let mut cur: Vec<f64> = self.data.clone();
        for _ in 0..modes {
            let block = cur.len() / n;
            let mut next = vec![0.0; block];
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                let src = &cur[j * block..(j + 1) * block];
                next.iter_mut().zip(src).for_each(|(o, s)| *o += xj * s);
            }
            cur = next;
        }
        cur
    }

    /// `T x^{k-1}`: contracts modes `1..k-1`, leaving the last mode free.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(x)?;
        if self.order == 0 {
            return Err(Error::UnsupportedOrder {
                order: 0,
                reason: "apply needs order >= 1",
            });
        }
        Ok(self.contract_leading(x, self.order - 1))
    }

    /// Full contraction `T x^k`.
    pub fn full_contraction(&self, x: &[f64]) -> Result<f64> {
        self.check_vector(x)?;
        Ok(self.contract_leading(x, self.order)[0])
    }

    /// `T x^{k-2}` as an `n x n` matrix (the last two modes stay free).
    pub fn contract_to_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_vector(x)?;
        if self.order < 2 {
            return Err(Error::UnsupportedOrder {
                order: self.order,
                reason: "matrix contraction needs order >= 2",
            });
        }
        let flat = self.contract_leading(x, self.order - 2);
        Ok(DMatrix::from_row_slice(self.dim, self.dim, &flat))
    }

    /// Averages every entry over all permutations of its indices.
    ///
    /// The average over all `k!` permutations equals the average over the
    /// distinct members of the index orbit, so entries are pooled by their
    /// sorted multi-index.
    pub fn symmetrize(&self) -> SymTensor {
        SymTensor(self.pool_by_sorted_prefix(self.order))
    }

    /// Pools entries by sorting the first `prefix` indices of each
    /// multi-index; `prefix = k` gives full symmetrization and
    /// `prefix = k - 1` the almost-symmetric projection.
    fn pool_by_sorted_prefix(&self, prefix: usize) -> Tensor {
        let len = self.data.len();
        let mut sums = vec![0.0; len];
        let mut counts = vec![0u32; len];
        let mut canon = vec![0usize; len];
        let mut idx = vec![0usize; self.order];
        for (lin, slot) in canon.iter_mut().enumerate() {
            self.multi_index(lin, &mut idx);
            idx[..prefix].sort_unstable();
            let c = self.linear_index(&idx);
            *slot = c;
            sums[c] += self.data[lin];
            counts[c] += 1;
        }
        let data = canon
            .iter()
            .map(|&c| sums[c] / f64::from(counts[c]))
            .collect();
        Tensor {
            order: self.order,
            dim: self.dim,
            data,
        }
    }

    fn max_deviation(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of any entry from its full permutation average.
    pub fn symmetry_deviation(&self) -> f64 {
        self.max_deviation(&self.pool_by_sorted_prefix(self.order))
    }

    fn check_order_at_least_two(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::UnsupportedOrder {
                order: self.order,
                reason: "dynamic tensors need order >= 2",
            });
        }
        Ok(())
    }
}

impl core::ops::Sub<&Tensor> for &Tensor {
    type Output = Tensor;

    fn sub(self, rhs: &Tensor) -> Tensor {
        assert_eq!((self.order, self.dim), (rhs.order, rhs.dim));
        Tensor {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Frobenius norm of the entrywise difference.
pub fn frob_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.order != b.order || a.dim != b.dim {
        return Err(Error::ShapeMismatch(alloc::format!(
            "order {} dim {} vs order {} dim {}",
            a.order,
            a.dim,
            b.order,
            b.dim
        )));
    }
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Supersymmetric tensor: invariant under every permutation of its indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor(Tensor);

impl SymTensor {
    /// Validates supersymmetry to [`SYMMETRY_TOL`] relative to the norm.
    /// Use [`Tensor::symmetrize`] to sanitize inputs instead.
    pub fn new(t: Tensor) -> Result<Self> {
        t.check_order_at_least_two()?;
        let dev = t.symmetry_deviation();
        if dev > SYMMETRY_TOL * t.norm() {
            return Err(Error::NotSymmetric { deviation: dev });
        }
        Ok(SymTensor(t))
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        SymTensor(Tensor::zeros(order, dim))
    }

    /// `sum_r weights[r] * v_r^{∘k}` where `v_r` are the columns of `vectors`.
    pub fn from_rank_one_sum(order: usize, weights: &[f64], vectors: &DMatrix<f64>) -> Self {
        let mut t = Tensor::zeros(order, vectors.nrows());
        for (w, col) in weights.iter().zip(vectors.column_iter()) {
            let v: Vec<f64> = col.iter().copied().collect();
            t.add_rank_one_power(*w, &v);
        }
        SymTensor(t)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.0.order
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    #[inline]
    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `T x^{k-1}`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.apply(x)
    }

    /// The homogeneous form `T x^k`.
    pub fn polyval(&self, x: &[f64]) -> Result<f64> {
        self.0.full_contraction(x)
    }

    pub fn contract_to_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.0.contract_to_matrix(x)
    }

    /// `self - weight * v^{∘k}`, which stays supersymmetric.
    pub fn deflate(&self, weight: f64, v: &[f64]) -> SymTensor {
        let mut t = self.0.clone();
        t.add_rank_one_power(-weight, v);
        SymTensor(t)
    }

    /// Square unfolding of an even-order tensor of order `2m` into an
    /// `n^m x n^m` matrix. Index positions alternate row, column, row, ...:
    /// `T[j_1, i_1, j_2, i_2, ...]` lands at row `j_1 + j_2 n + ...` and
    /// column `i_1 + i_2 n + ...` (0-based, first index least significant).
    pub fn unfold_psi(&self) -> Result<DMatrix<f64>> {
        let k = self.order();
        if !k.is_multiple_of(2) {
            return Err(Error::UnsupportedOrder {
                order: k,
                reason: "unfolding needs even order",
            });
        }
        let n = self.dim();
        let m = k / 2;
        let side = n.pow(m as u32);
        let mut out = DMatrix::zeros(side, side);
        let mut idx = vec![0usize; k];
        for (lin, &value) in self.0.data.iter().enumerate() {
            self.0.multi_index(lin, &mut idx);
            let (mut row, mut col, mut stride) = (0, 0, 1);
            for p in 0..m {
                row += idx[2 * p] * stride;
                col += idx[2 * p + 1] * stride;
                stride *= n;
            }
            out[(row, col)] = value;
        }
        Ok(out)
    }
}

impl From<SymTensor> for Tensor {
    fn from(t: SymTensor) -> Tensor {
        t.0
    }
}

/// Tensor symmetric in its first `k-1` modes; each slice with the last index
/// fixed is a supersymmetric order-`(k-1)` tensor. Every homogeneous
/// polynomial system has such a representation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostSymTensor(Tensor);

impl AlmostSymTensor {
    pub fn new(t: Tensor) -> Result<Self> {
        t.check_order_at_least_two()?;
        let pooled = t.pool_by_sorted_prefix(t.order - 1);
        let dev = t.max_deviation(&pooled);
        if dev > SYMMETRY_TOL * t.norm() {
            return Err(Error::NotSymmetric { deviation: dev });
        }
        Ok(AlmostSymTensor(t))
    }

    /// Projects an arbitrary cubical tensor onto the almost-symmetric
    /// subspace (averaging over permutations of the first `k-1` indices).
    /// The induced vector field is unchanged.
    pub fn project(t: &Tensor) -> Result<Self> {
        t.check_order_at_least_two()?;
        Ok(AlmostSymTensor(t.pool_by_sorted_prefix(t.order - 1)))
    }

    pub(crate) fn from_tensor_unchecked(t: Tensor) -> Self {
        AlmostSymTensor(t)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.0.order
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    #[inline]
    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// The vector field `A x^{k-1}` (last mode is the output mode).
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.apply(x)
    }

    /// Returns the tensor as supersymmetric when it is one.
    pub fn to_symmetric(&self) -> Result<SymTensor> {
        SymTensor::new(self.0.clone())
    }
}

impl From<SymTensor> for AlmostSymTensor {
    fn from(t: SymTensor) -> Self {
        AlmostSymTensor(t.0)
    }
}

impl From<AlmostSymTensor> for Tensor {
    fn from(t: AlmostSymTensor) -> Tensor {
        t.0
    }
}
