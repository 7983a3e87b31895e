use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input, intended for constants.
    pub fn from_rows<const N: usize>(rows: [[Complex64; N]; N]) -> Self {
        Self {
            dim: N,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn outer(v: &[Complex64]) -> Self {
        let dim = v.len();
        let mut data = Vec::with_capacity(dim * dim);
        for a in v {
            for b in v {
                data.push(a * b.conj());
            }
        }
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * factor).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Kronecker product; `self` occupies the high-order index bits.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (m, n) = (self.dim, rhs.dim);
        let dim = m * n;
        let mut out = Self::zeros(dim);
        for i in 0..m {
            for j in 0..m {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        out[(i * n + k, j * n + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len(), "mat_vec dimension mismatch");
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    /// Largest elementwise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim, rhs.dim, "max_abs_diff dimension mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_asymmetry(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigen-decomposition of a Hermitian matrix: real eigenvalues (ascending) and
/// the matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = nalgebra::SymmetricEigen::new(m.to_nalgebra());
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMatrix::zeros(m.dim());
    for (col, &k) in order.iter().enumerate() {
        for row in 0..m.dim() {
            vecs[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    (values, vecs)
}

/// Reassembles `V diag(values) V†`.
pub fn from_eigen(values: &[f64], vecs: &CMatrix) -> CMatrix {
    let n = vecs.dim();
    let mut out = CMatrix::zeros(n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = vecs[(i, k)] * lambda;
            for j in 0..n {
                out[(i, j)] += vi * vecs[(j, k)].conj();
            }
        }
    }
    out
}

/// Principal square root of a positive semidefinite Hermitian matrix; tiny
/// negative eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vecs) = hermitian_eigen(m);
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    from_eigen(&roots, &vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_places_left_operand_in_high_bits() {
        let x = CMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]]);
        let id = CMatrix::identity(2);
        let xi = x.kron(&id);
        // X on the high bit maps |00> -> |10> (index 2).
        assert_eq!(xi[(2, 0)], ONE);
        assert_eq!(xi[(1, 0)], ZERO);
    }

    #[test]
    fn eigen_roundtrip() {
        let m = CMatrix::from_rows([[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(2.0, 0.0)]]);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        assert!(from_eigen(&vals, &vecs).max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = CMatrix::from_rows([[c(0.5, 0.0), c(0.25, 0.1)], [c(0.25, -0.1), c(0.5, 0.0)]]);
        let r = psd_sqrt(&m);
        assert!(r.matmul(&r).max_abs_diff(&m) < 1e-12);
    }
}
