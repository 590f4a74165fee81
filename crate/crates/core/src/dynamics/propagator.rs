//! Exact propagators `exp(-i H t)` of time-independent Hermitian operators.
//!
//! The sparsity graph of `H` is split into connected components (shells,
//! atom branches) and each component is diagonalized densely, so a
//! truncated basis of dimension ~10^4 costs no more than its largest block.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::operator::{check_basis, Operator};
use crate::state::StateVector;
use crate::C64;

struct Block {
    indices: Vec<usize>,
    energies: DVector<f64>,
    vectors: DMatrix<C64>,
}

/// Eigendecomposition of a Hermitian operator, reusable for any time.
pub struct SpectralPropagator {
    basis: Arc<Basis>,
    blocks: Vec<Block>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the sparsity pattern, each sorted ascending.
pub(crate) fn components(h: &Operator) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    for (r, c, _) in h.triplets() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = out.len();
            out.push(Vec::new());
        }
        out[slot[root]].push(i);
    }
    out
}

impl SpectralPropagator {
    pub fn new(h: &Operator) -> Result<Self> {
        h.require_hermitian()?;
        let blocks = components(h)
            .into_iter()
            .map(|indices| {
                let local = DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
                    h.get(indices[r], indices[c])
                });
                // symmetrize so the solver sees an exactly Hermitian input
                let eig = SymmetricEigen::new((&local + local.adjoint()).scale(0.5));
                Block {
                    indices,
                    energies: eig.eigenvalues,
                    vectors: eig.eigenvectors,
                }
            })
            .collect();
        Ok(Self {
            basis: Arc::clone(h.cols()),
            blocks,
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    /// Sizes of the independently diagonalized blocks.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.energies.iter().copied())
            .collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    /// `exp(-i H t) psi` on raw amplitudes.
    pub fn apply(&self, t: f64, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        for b in &self.blocks {
            let local = DVector::from_iterator(b.indices.len(), b.indices.iter().map(|&i| psi[i]));
            let mut coeffs = b.vectors.ad_mul(&local);
            for (c, e) in coeffs.iter_mut().zip(b.energies.iter()) {
                *c *= C64::from_polar(1.0, -e * t);
            }
            let back = &b.vectors * coeffs;
            for (k, &i) in b.indices.iter().enumerate() {
                out[i] = back[k];
            }
        }
        out
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        check_basis(&self.basis, psi.basis())?;
        Ok(StateVector::unchecked(
            Arc::clone(&self.basis),
            self.apply(t, psi.amplitudes()),
        ))
    }

    /// `exp(-i H t)` assembled as a sparse operator, block by block.
    pub fn unitary(&self, t: f64) -> Operator {
        let mut entries = Vec::new();
        for b in &self.blocks {
            let phases = DVector::from_iterator(
                b.energies.len(),
                b.energies.iter().map(|e| C64::from_polar(1.0, -e * t)),
            );
            let scaled = DMatrix::from_fn(b.vectors.nrows(), b.vectors.ncols(), |r, c| {
                b.vectors[(r, c)] * phases[c]
            });
            let u = scaled * b.vectors.adjoint();
            for (r, &i) in b.indices.iter().enumerate() {
                for (c, &j) in b.indices.iter().enumerate() {
                    entries.push((i, j, u[(r, c)]));
                }
            }
        }
        Operator::from_triplets(Arc::clone(&self.basis), Arc::clone(&self.basis), entries)
    }
}

/// `U = exp(-i H t)` for a Hermitian, time-independent `H`.
pub fn propagator_exact(h: &Operator, t: f64) -> Result<Operator> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "propagation time {t} is not finite"
        )));
    }
    Ok(SpectralPropagator::new(h)?.unitary(t))
}

/// `max |U^dag U - I|` over all elements.
pub fn unitarity_residual(u: &Operator) -> Result<f64> {
    let product = u.adjoint().matmul(u)?;
    Ok(product.sub(&Operator::identity(u.cols()))?.max_abs())
}
