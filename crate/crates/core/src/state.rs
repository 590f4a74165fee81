//! Pure and mixed states over a [`Basis`].

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::{Basis, BasisKind, BasisState, Sigma};
use crate::error::{Error, Result};
use crate::operator::{check_basis, Operator};
use crate::C64;

/// Allowed deviation of a state norm from one.
pub const NORM_TOL: f64 = 1e-10;

/// Default cap on the weight a coherent state may lose to truncation.
pub const COHERENT_LOSS_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<Basis>,
    amps: Vec<C64>,
}

fn norm_of(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

impl StateVector {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(basis: Arc<Basis>, amps: Vec<C64>) -> Result<Self> {
        assert_eq!(
            amps.len(),
            basis.dim(),
            "amplitude count does not match {}",
            basis.kind()
        );
        let norm = norm_of(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { basis, amps })
    }

    /// Wraps amplitudes and rescales them to unit norm.
    pub fn normalized(basis: Arc<Basis>, mut amps: Vec<C64>) -> Result<Self> {
        assert_eq!(
            amps.len(),
            basis.dim(),
            "amplitude count does not match {}",
            basis.kind()
        );
        let norm = norm_of(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { basis, amps })
    }

    /// Wraps amplitudes without checking the norm; used by integrators that
    /// report drift instead of correcting it.
    pub fn unchecked(basis: Arc<Basis>, amps: Vec<C64>) -> Self {
        assert_eq!(amps.len(), basis.dim());
        Self { basis, amps }
    }

    /// Equal-weight superposition `sum_k c_k |site_k>`, normalized.
    pub fn superposition(basis: &Arc<Basis>, terms: &[(BasisState, C64)]) -> Result<Self> {
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        for (s, c) in terms {
            amps[basis.require(s)?] += *c;
        }
        Self::normalized(Arc::clone(basis), amps)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amps)
    }

    pub fn amplitude(&self, s: &BasisState) -> C64 {
        self.basis
            .index_of(s)
            .map(|i| self.amps[i])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn probability(&self, s: &BasisState) -> f64 {
        self.amplitude(s).norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_basis(&self.basis, &other.basis)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Applies an operator; the result is not renormalized.
    pub fn apply(&self, op: &Operator) -> Result<StateVector> {
        check_basis(op.cols(), &self.basis)?;
        Ok(StateVector {
            basis: Arc::clone(op.rows()),
            amps: op.apply_vec(&self.amps),
        })
    }

    /// `<psi|A|psi>` for a square operator.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        op.require_square()?;
        check_basis(op.cols(), &self.basis)?;
        let a_psi = op.apply_vec(&self.amps);
        Ok(self
            .amps
            .iter()
            .zip(&a_psi)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn renormalize(&mut self) -> Result<f64> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        self.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(norm)
    }

    /// Copies the amplitudes into another basis containing every populated site.
    pub fn embed(&self, target: &Arc<Basis>) -> Result<StateVector> {
        let mut amps = vec![C64::new(0.0, 0.0); target.dim()];
        for (s, a) in self.basis.states().iter().zip(&self.amps) {
            if a.norm_sqr() > 0.0 {
                amps[target.require(s)?] = *a;
            }
        }
        Ok(StateVector {
            basis: Arc::clone(target),
            amps,
        })
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// Unit vector on one lattice site.
pub fn fock_state(
    basis: &Arc<Basis>,
    sigma: Sigma,
    n0: u32,
    n1: u32,
    n2: u32,
) -> Result<StateVector> {
    let s = BasisState::new(sigma, n0, n1, n2);
    let i = basis.require(&s)?;
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    amps[i] = C64::new(1.0, 0.0);
    Ok(StateVector {
        basis: Arc::clone(basis),
        amps,
    })
}

/// Coherent state together with the weight lost to truncation.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub state: StateVector,
    /// `1 - sum_n |c_n|^2` over the photon numbers the basis can hold.
    pub truncation_loss: f64,
}

/// Un-normalized coherent amplitude `exp(-|alpha|^2 / 2) alpha^n / sqrt(n!)`.
pub fn coherent_amplitude(alpha: C64, n: u32) -> C64 {
    if n == 0 {
        return C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    }
    if alpha.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let log_mag =
        -alpha.norm_sqr() / 2.0 + n as f64 * alpha.norm().ln() - 0.5 * crate::ln_factorial(n);
    C64::from_polar(log_mag.exp(), n as f64 * alpha.arg())
}

/// Coherent state `|alpha>` in cavity `j` with the atom in `g`, truncated at
/// the basis edge and renormalized.
pub fn coherent_state(basis: &Arc<Basis>, alpha: C64, j: usize) -> Result<CoherentState> {
    coherent_state_with_threshold(basis, alpha, j, COHERENT_LOSS_THRESHOLD)
}

pub fn coherent_state_with_threshold(
    basis: &Arc<Basis>,
    alpha: C64,
    j: usize,
    threshold: f64,
) -> Result<CoherentState> {
    let n_max = match basis.kind() {
        BasisKind::Truncated(n) => n,
        other => {
            return Err(Error::UnsupportedBasis(format!(
                "coherent states need a truncated basis, got {other}"
            )))
        }
    };
    if j >= 3 {
        return Err(Error::InvalidParameter(format!(
            "mode index {j} out of range"
        )));
    }
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
    let mut kept = 0.0;
    for n in 0..=n_max {
        let mut occ = [0; 3];
        occ[j] = n;
        let c = coherent_amplitude(alpha, n);
        kept += c.norm_sqr();
        amps[basis.require(&BasisState {
            sigma: Sigma::G,
            occ,
        })?] = c;
    }
    let truncation_loss = (1.0 - kept).max(0.0);
    if truncation_loss > threshold {
        return Err(Error::TruncationLoss {
            loss: truncation_loss,
            threshold,
        });
    }
    let state = StateVector::normalized(Arc::clone(basis), amps)?;
    Ok(CoherentState {
        state,
        truncation_loss,
    })
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    basis: Basis,
    amplitudes: Vec<[f64; 2]>,
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateRepr {
            basis: (*self.basis).clone(),
            amplitudes: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = StateRepr::deserialize(d)?;
        if repr.amplitudes.len() != repr.basis.dim() {
            return Err(D::Error::custom("amplitude count does not match the basis"));
        }
        let amps = repr
            .amplitudes
            .iter()
            .map(|[re, im]| C64::new(*re, *im))
            .collect();
        Ok(StateVector {
            basis: Arc::new(repr.basis),
            amps,
        })
    }
}

impl PartialEq for StateVector {
    fn eq(&self, other: &Self) -> bool {
        self.basis.kind() == other.basis.kind() && self.amps == other.amps
    }
}

/// Dense density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    basis: Arc<Basis>,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let matrix = &v * v.adjoint();
        Self {
            basis: Arc::clone(psi.basis()),
            matrix,
        }
    }

    pub fn from_matrix(basis: Arc<Basis>, matrix: DMatrix<C64>) -> Self {
        assert_eq!(matrix.nrows(), basis.dim());
        assert_eq!(matrix.ncols(), basis.dim());
        Self { basis, matrix }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `<bra|rho|ket>`.
    pub fn element(&self, bra: &BasisState, ket: &BasisState) -> C64 {
        match (self.basis.index_of(bra), self.basis.index_of(ket)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        op.require_square()?;
        check_basis(op.cols(), &self.basis)?;
        let mut a_rho = DMatrix::zeros(self.matrix.nrows(), self.matrix.ncols());
        op.mul_dense_into(&self.matrix, &mut a_rho);
        Ok(a_rho.trace())
    }

    /// Smallest eigenvalue. When the matrix is block diagonal in total
    /// excitation (the usual case for excitation-lowering dissipation) the
    /// blocks are diagonalized separately.
    pub fn min_eigenvalue(&self) -> f64 {
        let blocks = self.basis.excitation_blocks();
        let mut off_block = 0.0f64;
        let mut owner = vec![0usize; self.basis.dim()];
        for (b, idx) in blocks.iter().enumerate() {
            for &i in idx {
                owner[i] = b;
            }
        }
        for c in 0..self.matrix.ncols() {
            for r in 0..self.matrix.nrows() {
                if owner[r] != owner[c] {
                    off_block = off_block.max(self.matrix[(r, c)].norm());
                }
            }
        }
        let hermitian = |m: DMatrix<C64>| (&m + m.adjoint()).scale(0.5);
        if off_block > 0.0 || blocks.len() <= 1 {
            return SymmetricEigen::new(hermitian(self.matrix.clone()))
                .eigenvalues
                .min();
        }
        blocks
            .iter()
            .map(|idx| {
                let sub =
                    DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.matrix[(idx[r], idx[c])]);
                SymmetricEigen::new(hermitian(sub)).eigenvalues.min()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the density-matrix invariants: Hermitian within 1e-10, unit
    /// trace within 1e-8, eigenvalues above -1e-8.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_residual();
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let min = self.min_eigenvalue();
        if min < -1e-8 {
            return Err(Error::InvalidParameter(format!(
                "density matrix eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    basis: Basis,
    /// Row-major `[re, im]` pairs.
    matrix: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn matrix_rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}

pub(crate) fn matrix_from_rows(n: usize, rows: &[Vec<[f64; 2]>]) -> Option<DMatrix<C64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return None;
    }
    Some(DMatrix::from_fn(n, n, |r, c| {
        C64::new(rows[r][c][0], rows[r][c][1])
    }))
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DensityRepr {
            basis: (*self.basis).clone(),
            matrix: matrix_rows(&self.matrix),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = DensityRepr::deserialize(d)?;
        let matrix = matrix_from_rows(repr.basis.dim(), &repr.matrix)
            .ok_or_else(|| D::Error::custom("matrix shape does not match the basis"))?;
        Ok(DensityMatrix {
            basis: Arc::new(repr.basis),
            matrix,
        })
    }
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.basis.kind() == other.basis.kind() && self.matrix == other.matrix
    }
}
