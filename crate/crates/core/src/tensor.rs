//! Dense vectors, row-major matrices and rank-3 tensors.
//!
//! Every reduction runs left to right over the contraction index, so equal
//! inputs give bit-identical outputs. Nothing broadcasts: shapes must match
//! exactly or the kernel returns [`Error::Shape`].

use std::ops::{Index, IndexMut};

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Vector<S> {
    data: Vec<S>,
}

impl<S: Scalar> Vector<S> {
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vectors must be non-empty");
        Self {
            data: vec![S::zero(); len],
        }
    }

    pub fn from_vec(data: Vec<S>) -> Self {
        assert!(!data.is_empty(), "vectors must be non-empty");
        Self { data }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Self::from_vec(values.iter().map(|&v| S::lit(v)).collect())
    }

    /// Unit basis vector `e_index`.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[index] = S::one();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.data.iter()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.to_f64_lossy()).collect()
    }

    pub fn dot(&self, other: &Self) -> Result<S> {
        self.check_len("dot", other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> S {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: S) -> Self {
        Self {
            data: self.data.iter().map(|&v| v * a).collect(),
        }
    }

    pub fn scale_in_place(&mut self, a: S) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_len("add", other)?;
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_len("sub", other)?;
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        })
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: S, x: &Self) -> Result<()> {
        self.check_len("axpy", x)?;
        axpy_slice(&mut self.data, a, &x.data);
        Ok(())
    }

    pub fn fill(&mut self, value: S) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// `[self ‖ 1]`, the synthesiser input with its bias entry appended.
    pub fn with_bias(&self) -> Self {
        let mut data = Vec::with_capacity(self.len() + 1);
        data.extend_from_slice(&self.data);
        data.push(S::one());
        Self { data }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        self.check_len("max_abs_diff", other)?;
        Ok(max_abs_diff(&self.data, &other.data))
    }

    fn check_len(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(shape_err(op, self.len(), other.len()));
        }
        Ok(())
    }
}

impl<S> Index<usize> for Vector<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.data[i]
    }
}

impl<S> IndexMut<usize> for Vector<S> {
    fn index_mut(&mut self, i: usize) -> &mut S {
        &mut self.data[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(shape_err(
                "Matrix::from_vec",
                format!("{} entries", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(shape_err("Matrix::from_rows", cols, row.len()));
            }
            data.extend(row.iter().map(|&v| S::lit(v)));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diagonal(values: &Vector<S>) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = values[i];
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: S) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn scale_in_place(&mut self, a: S) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: S, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_err(
                "Matrix::add_scaled",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        axpy_slice(&mut self.data, a, &other.data);
        Ok(())
    }

    pub fn fill(&mut self, value: S) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn frobenius(&self) -> S {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        if self.shape() != other.shape() {
            return Err(shape_err(
                "Matrix::max_abs_diff",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(max_abs_diff(&self.data, &other.data))
    }
}

/// Rank-3 tensor with dims `(d0, d1, d2)`, stored with `d2` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<S> {
    dims: [usize; 3],
    data: Vec<S>,
}

impl<S: Scalar> Tensor3<S> {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self {
            dims: [d0, d1, d2],
            data: vec![S::zero(); d0 * d1 * d2],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<S>) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        if n != data.len() {
            return Err(shape_err("Tensor3::from_vec", n, data.len()));
        }
        Ok(Self { dims, data })
    }

    /// Stacks `d0` equally shaped matrices along the first axis.
    pub fn from_slices(slices: &[Matrix<S>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| shape_err("Tensor3::from_slices", "at least one slice", 0))?;
        let (d1, d2) = first.shape();
        let mut data = Vec::with_capacity(slices.len() * d1 * d2);
        for s in slices {
            if s.shape() != (d1, d2) {
                return Err(shape_err(
                    "Tensor3::from_slices",
                    format!("{:?}", (d1, d2)),
                    format!("{:?}", s.shape()),
                ));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self {
            dims: [slices.len(), d1, d2],
            data,
        })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> S {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: S) {
        let idx = (i * self.dims[1] + j) * self.dims[2] + k;
        self.data[idx] = value;
    }

    /// Contiguous `(d1, d2)` block at first index `i`.
    #[inline]
    pub fn slab(&self, i: usize) -> &[S] {
        let n = self.dims[1] * self.dims[2];
        &self.data[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn slab_mut(&mut self, i: usize) -> &mut [S] {
        let n = self.dims[1] * self.dims[2];
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn slice(&self, i: usize) -> Matrix<S> {
        Matrix {
            rows: self.dims[1],
            cols: self.dims[2],
            data: self.slab(i).to_vec(),
        }
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn fill(&mut self, value: S) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_scaled(&mut self, a: S, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(shape_err(
                "Tensor3::add_scaled",
                format!("{:?}", self.dims),
                format!("{:?}", other.dims),
            ));
        }
        axpy_slice(&mut self.data, a, &other.data);
        Ok(())
    }

    pub fn scale_in_place(&mut self, a: S) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<S> {
        if self.dims != other.dims {
            return Err(shape_err(
                "Tensor3::max_abs_diff",
                format!("{:?}", self.dims),
                format!("{:?}", other.dims),
            ));
        }
        Ok(max_abs_diff(&self.data, &other.data))
    }
}

/// Result of [`trace_contract`]: a rank-3 tensor, or a matrix when the
/// contracting operand has a single row.
#[derive(Debug, Clone, PartialEq)]
pub enum Contracted<S> {
    Matrix(Matrix<S>),
    Tensor(Tensor3<S>),
}

impl<S: Scalar> Contracted<S> {
    pub fn into_tensor(self) -> Tensor3<S> {
        match self {
            Contracted::Tensor(t) => t,
            Contracted::Matrix(m) => {
                let (r, c) = m.shape();
                Tensor3 {
                    dims: [1, r, c],
                    data: m.data,
                }
            }
        }
    }

    pub fn into_matrix(self) -> Option<Matrix<S>> {
        match self {
            Contracted::Matrix(m) => Some(m),
            Contracted::Tensor(_) => None,
        }
    }
}

/// Contracts `a` (shape `(r, d0)`) against the first axis of `e`.
///
/// `e` is viewed as a `(d0, d1·d2)` matrix, left-multiplied by `a` and
/// reshaped to `(r, d1, d2)`. The leading axis is dropped when `r == 1`.
pub fn trace_contract<S: Scalar>(a: &Matrix<S>, e: &Tensor3<S>) -> Result<Contracted<S>> {
    if a.cols != e.dims[0] {
        return Err(shape_err("trace_contract", format!("A.cols == {}", e.dims[0]), a.cols));
    }
    let mut out = Tensor3::zeros(a.rows, e.dims[1], e.dims[2]);
    contract_into(a, e, &mut out);
    if a.rows == 1 {
        let [_, d1, d2] = out.dims;
        Ok(Contracted::Matrix(Matrix {
            rows: d1,
            cols: d2,
            data: out.data,
        }))
    } else {
        Ok(Contracted::Tensor(out))
    }
}

/// `Σ_i v_i · e[i, :, :]`, the single-row case of [`trace_contract`].
pub fn contract_row<S: Scalar>(v: &Vector<S>, e: &Tensor3<S>) -> Result<Matrix<S>> {
    if v.len() != e.dims[0] {
        return Err(shape_err("contract_row", e.dims[0], v.len()));
    }
    let mut out = Matrix::zeros(e.dims[1], e.dims[2]);
    for (i, &vi) in v.as_slice().iter().enumerate() {
        axpy_slice(&mut out.data, vi, e.slab(i));
    }
    Ok(out)
}

/// Shape-unchecked core of [`trace_contract`]; overwrites `out`.
pub(crate) fn contract_into<S: Scalar>(a: &Matrix<S>, e: &Tensor3<S>, out: &mut Tensor3<S>) {
    debug_assert_eq!(a.cols, e.dims[0]);
    debug_assert_eq!(out.dims, [a.rows, e.dims[1], e.dims[2]]);
    out.fill(S::zero());
    for r in 0..a.rows {
        let arow = a.row(r);
        let dst = out.slab_mut(r);
        for (m, &coef) in arow.iter().enumerate() {
            if coef != S::zero() {
                axpy_slice(dst, coef, e.slab(m));
            }
        }
    }
}

pub fn matvec<S: Scalar>(a: &Matrix<S>, v: &Vector<S>) -> Result<Vector<S>> {
    if a.cols != v.len() {
        return Err(shape_err("matvec", a.cols, v.len()));
    }
    Ok(Vector::from_vec(
        (0..a.rows).map(|r| dot(a.row(r), v.as_slice())).collect(),
    ))
}

/// `aᵀ · v`, the pullback of `v` through a Jacobian `a`.
pub fn matvec_t<S: Scalar>(a: &Matrix<S>, v: &Vector<S>) -> Result<Vector<S>> {
    if a.rows != v.len() {
        return Err(shape_err("matvec_t", a.rows, v.len()));
    }
    let mut out = vec![S::zero(); a.cols];
    for (r, &vr) in v.as_slice().iter().enumerate() {
        axpy_slice(&mut out, vr, a.row(r));
    }
    Ok(Vector::from_vec(out))
}

pub fn matmul<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    if a.cols != b.rows {
        return Err(shape_err("matmul", a.cols, b.rows));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for r in 0..a.rows {
        let dst = &mut out.data[r * b.cols..(r + 1) * b.cols];
        for (k, &coef) in a.row(r).iter().enumerate() {
            axpy_slice(dst, coef, b.row(k));
        }
    }
    Ok(out)
}

pub fn outer<S: Scalar>(u: &Vector<S>, v: &Vector<S>) -> Matrix<S> {
    let mut out = Matrix::zeros(u.len(), v.len());
    for (r, &ur) in u.as_slice().iter().enumerate() {
        for (c, &vc) in v.as_slice().iter().enumerate() {
            out.data[r * v.len() + c] = ur * vc;
        }
    }
    out
}

/// `y += a * x`
pub fn axpy<S: Scalar>(y: &mut Vector<S>, a: S, x: &Vector<S>) -> Result<()> {
    y.axpy(a, x)
}

#[inline]
pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn axpy_slice<S: Scalar>(y: &mut [S], a: S, x: &[S]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn max_abs_diff<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_contract(a: &Matrix<f64>, e: &Tensor3<f64>) -> Tensor3<f64> {
        let [d0, d1, d2] = e.dims();
        let mut out = Tensor3::zeros(a.rows(), d1, d2);
        for r in 0..a.rows() {
            for j in 0..d1 {
                for k in 0..d2 {
                    let mut s = 0.0;
                    for i in 0..d0 {
                        s += a.get(r, i) * e.get(i, j, k);
                    }
                    out.set(r, j, k, s);
                }
            }
        }
        out
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn identity_contraction_returns_single_slice() {
        let e = Tensor3::from_vec([1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let m = trace_contract(&Matrix::identity(1), &e).unwrap().into_matrix().unwrap();
        assert_eq!(m, e.slice(0));
    }

    #[test]
    fn zero_operand_annihilates() {
        let mut seed = 3;
        let e = Tensor3::from_vec([4, 2, 3], (0..24).map(|_| lcg(&mut seed)).collect()).unwrap();
        let out = trace_contract(&Matrix::<f64>::zeros(2, 4), &e).unwrap().into_tensor();
        assert_eq!(out.dims(), [2, 2, 3]);
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_row_contraction_matches_triple_loop() {
        let s0 = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 4.0]]).unwrap();
        let s1 = Matrix::from_rows(&[vec![3.0, 1.0], vec![-1.0, 2.5]]).unwrap();
        let e = Tensor3::from_slices(&[s0.clone(), s1.clone()]).unwrap();
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let got = trace_contract(&a, &e).unwrap().into_matrix().unwrap();
        let brute = brute_contract(&a, &e).slice(0);
        assert_eq!(got, brute);
        let mut expected = s0;
        expected.add_scaled(2.0, &s1).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn contraction_rejects_mismatch() {
        let e = Tensor3::<f64>::zeros(3, 2, 2);
        assert!(trace_contract(&Matrix::zeros(2, 4), &e).is_err());
        assert!(contract_row(&Vector::zeros(2), &e).is_err());
    }

    #[test]
    fn outer_and_identity_matvec() {
        let u = Vector::<f64>::from_f64(&[1.0, 0.0]);
        let v = Vector::from_f64(&[0.0, 1.0]);
        assert_eq!(
            outer(&u, &v),
            Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()
        );
        let w = Vector::<f64>::from_f64(&[3.0, -1.5, 2.0]);
        assert_eq!(matvec(&Matrix::identity(3), &w).unwrap(), w);
    }

    #[test]
    fn matmul_matches_naive_loop() {
        let mut seed = 11;
        let a = Matrix::from_vec(5, 4, (0..20).map(|_| lcg(&mut seed)).collect()).unwrap();
        let b = Matrix::from_vec(4, 3, (0..12).map(|_| lcg(&mut seed)).collect()).unwrap();
        let c = matmul(&a, &b).unwrap();
        for r in 0..5 {
            for col in 0..3 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a.get(r, k) * b.get(k, col);
                }
                assert_eq!(c.get(r, col), s);
            }
        }
        assert!(matmul(&b, &a).is_err());
    }

    #[test]
    fn matvec_t_is_transpose_matvec() {
        let mut seed = 5;
        let a = Matrix::from_vec(3, 4, (0..12).map(|_| lcg(&mut seed)).collect()).unwrap();
        let v = Vector::from_vec((0..3).map(|_| lcg(&mut seed)).collect());
        let got = matvec_t(&a, &v).unwrap();
        let want = matvec(&a.transpose(), &v).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() < 1e-15);
    }
}
