//! Sparse complex operators over a [`Basis`].
//!
//! Storage is compressed sparse rows. An operator carries the basis of its
//! rows and of its columns; ladder operators on shell bases are rectangular
//! (`shell(N) -> shell(N - 1)`), everything else is square.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::C64;

/// Tolerance used when an operator is required to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Operator {
    rows: Arc<Basis>,
    cols: Arc<Basis>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

pub(crate) fn same_basis(a: &Arc<Basis>, b: &Arc<Basis>) -> bool {
    Arc::ptr_eq(a, b) || a.kind() == b.kind()
}

pub(crate) fn check_basis(expected: &Arc<Basis>, found: &Arc<Basis>) -> Result<()> {
    if same_basis(expected, found) {
        Ok(())
    } else {
        Err(expected.mismatch(found))
    }
}

impl Operator {
    /// Builds an operator from `(row, col, value)` entries. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets<I>(rows: Arc<Basis>, cols: Arc<Basis>, entries: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let nrows = rows.dim();
        let mut per_row: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); nrows];
        for (r, c, v) in entries {
            assert!(
                r < nrows && c < cols.dim(),
                "entry ({r}, {c}) outside {}x{}",
                nrows,
                cols.dim()
            );
            *per_row[r].entry(c).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in per_row {
            for (c, v) in row {
                if v != C64::new(0.0, 0.0) {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn zeros(rows: Arc<Basis>, cols: Arc<Basis>) -> Self {
        Self::from_triplets(rows, cols, std::iter::empty())
    }

    pub fn identity(basis: &Arc<Basis>) -> Self {
        Self::diagonal(basis, |_| 1.0)
    }

    /// Real diagonal operator with entries `f(site)`.
    pub fn diagonal(basis: &Arc<Basis>, f: impl Fn(&crate::basis::BasisState) -> f64) -> Self {
        let entries = basis
            .states()
            .iter()
            .enumerate()
            .map(|(i, s)| (i, i, C64::new(f(s), 0.0)));
        Self::from_triplets(Arc::clone(basis), Arc::clone(basis), entries)
    }

    pub fn rows(&self) -> &Arc<Basis> {
        &self.rows
    }

    pub fn cols(&self) -> &Arc<Basis> {
        &self.cols
    }

    /// The basis of a square operator.
    pub fn basis(&self) -> &Arc<Basis> {
        &self.cols
    }

    pub fn nrows(&self) -> usize {
        self.rows.dim()
    }

    pub fn ncols(&self) -> usize {
        self.cols.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        same_basis(&self.rows, &self.cols)
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.nrows(),
                cols: self.ncols(),
            })
        }
    }

    /// Iterates over stored `(row, col, value)` entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows()).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    /// Matrix element `<row|A|col>`.
    pub fn get(&self, row: usize, col: usize) -> C64 {
        let span = self.indptr[row]..self.indptr[row + 1];
        match self.indices[span.clone()].binary_search(&col) {
            Ok(k) => self.values[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> Operator {
        let entries: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Operator::from_triplets(Arc::clone(&self.cols), Arc::clone(&self.rows), entries)
    }

    pub fn scale(&self, factor: C64) -> Operator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn scale_real(&self, factor: f64) -> Operator {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        check_basis(&self.rows, &other.rows)?;
        check_basis(&self.cols, &other.cols)?;
        let entries: Vec<_> = self.triplets().chain(other.triplets()).collect();
        Ok(Operator::from_triplets(
            Arc::clone(&self.rows),
            Arc::clone(&self.cols),
            entries,
        ))
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.add(&other.scale_real(-1.0))
    }

    /// Operator product `self * other`.
    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        check_basis(&self.cols, &other.rows)?;
        let mut entries = Vec::new();
        for (r, k, a) in self.triplets() {
            for idx in other.indptr[k]..other.indptr[k + 1] {
                entries.push((r, other.indices[idx], a * other.values[idx]));
            }
        }
        Ok(Operator::from_triplets(
            Arc::clone(&self.rows),
            Arc::clone(&other.cols),
            entries,
        ))
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest `|A_rc - conj(A_cr)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= HERMITIAN_TOL * self.max_abs().max(1.0)
    }

    pub fn require_hermitian(&self) -> Result<()> {
        self.require_square()?;
        let residual = self.hermiticity_residual();
        if residual <= HERMITIAN_TOL * self.max_abs().max(1.0) {
            Ok(())
        } else {
            Err(Error::NotHermitian(residual))
        }
    }

    /// Maximum absolute row sum; bounds the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows())
            .map(|r| {
                self.values[self.indptr[r]..self.indptr[r + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `out = A x` on raw amplitude slices.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols());
        debug_assert_eq!(out.len(), self.nrows());
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o = acc;
        }
    }

    /// `out += factor * A x`.
    pub fn apply_add(&self, factor: C64, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o += factor * acc;
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.nrows()];
        self.apply_into(x, &mut out);
        out
    }

    /// Sparse times dense: `out = A M` for a column-major dense matrix.
    pub fn mul_dense_into(&self, m: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        debug_assert_eq!(m.nrows(), self.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            let mut dst = out.column_mut(c);
            for r in 0..self.nrows() {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.indptr[r]..self.indptr[r + 1] {
                    acc += self.values[k] * col[self.indices[k]];
                }
                dst[r] = acc;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Coordinate-list dump for debugging and file output.
    pub fn to_coo(&self) -> CooDump {
        CooDump {
            rows: self.rows.kind(),
            cols: self.cols.kind(),
            entries: self
                .triplets()
                .map(|(r, c, v)| (r, c, v.re, v.im))
                .collect(),
        }
    }
}

/// `(row, col, re, im)` listing of an operator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CooDump {
    pub rows: crate::basis::BasisKind,
    pub cols: crate::basis::BasisKind,
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl CooDump {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,re,im")?;
        for (r, c, re, im) in &self.entries {
            writeln!(w, "{r},{c},{re:.16e},{im:.16e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_shell;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let b = enumerate_shell(1);
        let op = Operator::from_triplets(
            b.clone(),
            b.clone(),
            vec![
                (0, 1, c(1.0, 0.0)),
                (0, 1, c(1.0, 0.0)),
                (2, 2, c(1.0, 0.0)),
                (2, 2, c(-1.0, 0.0)),
            ],
        );
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.get(0, 1), c(2.0, 0.0));
        assert_eq!(op.get(2, 2), c(0.0, 0.0));
    }

    #[test]
    fn adjoint_and_hermiticity() {
        let b = enumerate_shell(1);
        let op = Operator::from_triplets(
            b.clone(),
            b.clone(),
            vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))],
        );
        assert!(op.is_hermitian());
        let skew = Operator::from_triplets(
            b.clone(),
            b,
            vec![(0, 1, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))],
        );
        assert!(!skew.is_hermitian());
        assert!(matches!(
            skew.require_hermitian(),
            Err(Error::NotHermitian(_))
        ));
        assert_eq!(skew.adjoint().get(1, 0), c(1.0, 0.0));
    }

    #[test]
    fn product_matches_dense() {
        let b = enumerate_shell(1);
        let a = Operator::from_triplets(
            b.clone(),
            b.clone(),
            vec![(0, 1, c(1.0, 2.0)), (3, 0, c(0.5, 0.0))],
        );
        let d = Operator::from_triplets(
            b.clone(),
            b.clone(),
            vec![(1, 2, c(0.0, 1.0)), (0, 3, c(2.0, 0.0))],
        );
        let sparse = a.matmul(&d).unwrap().to_dense();
        let dense = a.to_dense() * d.to_dense();
        assert!((sparse - dense).camax() < 1e-15);
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let a = Operator::identity(&enumerate_shell(1));
        let b = Operator::identity(&enumerate_shell(2));
        assert!(matches!(a.add(&b), Err(Error::BasisMismatch { .. })));
        assert!(matches!(a.matmul(&b), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn sparse_dense_product() {
        let b = enumerate_shell(2);
        let a = Operator::from_triplets(
            b.clone(),
            b.clone(),
            vec![(0, 4, c(1.0, -1.0)), (5, 5, c(3.0, 0.0))],
        );
        let m = DMatrix::from_fn(9, 9, |r, k| c(r as f64, k as f64));
        let mut out = DMatrix::zeros(9, 9);
        a.mul_dense_into(&m, &mut out);
        assert!((out - a.to_dense() * m).camax() < 1e-12);
    }
}
