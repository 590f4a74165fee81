//! Elementary operators: cavity ladder operators, atomic raising/lowering,
//! `sigma_z` and the number operators.
//!
//! On shell bases operators that change the excitation are rectangular and
//! land in the neighbouring shell; on truncated bases they are square and
//! entries that would leave the truncation are dropped.

use std::sync::Arc;

use crate::basis::{shifted, Basis, BasisState, Sigma};
use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::C64;

fn check_mode(basis: &Basis, j: usize) -> Result<()> {
    if j < basis.modes() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "mode index {j} out of range for {}",
            basis.kind()
        )))
    }
}

/// Builds an operator from a per-site action `site -> (target site, amplitude)`.
fn from_action(
    cols: &Arc<Basis>,
    rows: Arc<Basis>,
    action: impl Fn(&BasisState) -> Option<(BasisState, f64)>,
) -> Operator {
    let entries: Vec<_> = cols
        .states()
        .iter()
        .enumerate()
        .filter_map(|(c, s)| {
            let (t, amp) = action(s)?;
            let r = rows.index_of(&t)?;
            Some((r, c, C64::new(amp, 0.0)))
        })
        .collect();
    Operator::from_triplets(rows, Arc::clone(cols), entries)
}

/// Cavity annihilation operator `a_j`: `<..n_j - 1..| a_j |..n_j..> = sqrt(n_j)`.
pub fn annihilation(basis: &Arc<Basis>, j: usize) -> Result<Operator> {
    check_mode(basis, j)?;
    let rows = shifted(basis, -1, -1);
    Ok(from_action(basis, rows, |s| {
        let n = s.occ[j];
        (n > 0).then(|| {
            let mut t = *s;
            t.occ[j] -= 1;
            (t, (n as f64).sqrt())
        })
    }))
}

/// Cavity creation operator `a_j^dag`.
pub fn creation(basis: &Arc<Basis>, j: usize) -> Result<Operator> {
    check_mode(basis, j)?;
    let rows = shifted(basis, 1, 1);
    Ok(from_action(basis, rows, |s| {
        let mut t = *s;
        t.occ[j] += 1;
        Some((t, (t.occ[j] as f64).sqrt()))
    }))
}

/// `sigma^- = |g><e|`.
pub fn atom_lower(basis: &Arc<Basis>) -> Operator {
    let rows = shifted(basis, -1, 0);
    from_action(basis, rows, |s| {
        (s.sigma == Sigma::E).then(|| (s.with_sigma(Sigma::G), 1.0))
    })
}

/// `sigma^+ = |e><g|`.
pub fn atom_raise(basis: &Arc<Basis>) -> Operator {
    let rows = shifted(basis, 1, 0);
    from_action(basis, rows, |s| {
        (s.sigma == Sigma::G).then(|| (s.with_sigma(Sigma::E), 1.0))
    })
}

/// `sigma_z = |e><e| - |g><g|`.
pub fn pauli_z(basis: &Arc<Basis>) -> Operator {
    Operator::diagonal(basis, |s| s.sigma.z())
}

/// `a_j^dag a_j`.
pub fn number(basis: &Arc<Basis>, j: usize) -> Result<Operator> {
    check_mode(basis, j)?;
    Ok(Operator::diagonal(basis, |s| s.occ[j] as f64))
}

/// Total excitation `sum_j n_j + (sigma_z + 1) / 2`.
pub fn total_excitation(basis: &Arc<Basis>) -> Operator {
    Operator::diagonal(basis, |s| s.excitation() as f64)
}

/// Excitation-conserving Jaynes-Cummings pair `sigma^+ a_j` (square on any basis).
pub fn raise_absorb(basis: &Arc<Basis>, j: usize) -> Result<Operator> {
    check_mode(basis, j)?;
    Ok(from_action(basis, Arc::clone(basis), |s| {
        let n = s.occ[j];
        (s.sigma == Sigma::G && n > 0).then(|| {
            let mut t = s.with_sigma(Sigma::E);
            t.occ[j] -= 1;
            (t, (n as f64).sqrt())
        })
    }))
}

/// Photon transfer `a_to^dag a_from` (square on any basis).
pub fn transfer(basis: &Arc<Basis>, from: usize, to: usize) -> Result<Operator> {
    check_mode(basis, from)?;
    check_mode(basis, to)?;
    if from == to {
        return number(basis, from);
    }
    Ok(from_action(basis, Arc::clone(basis), |s| {
        let amp = ((s.occ[from] as f64) * (s.occ[to] as f64 + 1.0)).sqrt();
        s.hop(from, to).map(|t| (t, amp))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_shell, enumerate_truncated, enumerate_two_mode, BasisKind};

    fn site(sigma: Sigma, n0: u32, n1: u32, n2: u32) -> BasisState {
        BasisState::new(sigma, n0, n1, n2)
    }

    fn apply(op: &Operator, s: BasisState) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); op.ncols()];
        x[op.cols().index_of(&s).unwrap()] = C64::new(1.0, 0.0);
        op.apply_vec(&x)
    }

    #[test]
    fn annihilation_action() {
        let t = enumerate_truncated(1);
        let a0 = annihilation(&t, 0).unwrap();
        let out = apply(&a0, site(Sigma::G, 1, 0, 0));
        let vac = t.index_of(&site(Sigma::G, 0, 0, 0)).unwrap();
        assert_eq!(out[vac], C64::new(1.0, 0.0));
        assert_eq!(out.iter().filter(|v| v.norm() > 0.0).count(), 1);

        let a1 = annihilation(&t, 1).unwrap();
        assert!(apply(&a1, site(Sigma::G, 1, 0, 0))
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn number_operator_on_corner() {
        let b = enumerate_shell(10);
        let a0 = annihilation(&b, 0).unwrap();
        let n0 = a0.adjoint().matmul(&a0).unwrap();
        let i = b.index_of(&site(Sigma::G, 10, 0, 0)).unwrap();
        assert!((n0.get(i, i) - C64::new(10.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn shell_ladder_is_rectangular() {
        let b = enumerate_shell(3);
        let a = annihilation(&b, 2).unwrap();
        assert_eq!(a.rows().kind(), BasisKind::Shell(2));
        assert_eq!((a.nrows(), a.ncols()), (9, 16));
        let lower = atom_lower(&b);
        assert_eq!(lower.rows().kind(), BasisKind::Shell(2));
        let vac = enumerate_shell(0);
        let a_vac = annihilation(&vac, 0).unwrap();
        assert_eq!(a_vac.rows().kind(), BasisKind::Empty);
        assert_eq!((a_vac.nrows(), a_vac.ncols()), (0, 1));
    }

    #[test]
    fn pauli_and_pairs() {
        let b = enumerate_shell(1);
        let sz = pauli_z(&b);
        let e = b.index_of(&site(Sigma::E, 0, 0, 0)).unwrap();
        let g = b.index_of(&site(Sigma::G, 1, 0, 0)).unwrap();
        assert_eq!(sz.get(e, e), C64::new(1.0, 0.0));
        assert_eq!(sz.get(g, g), C64::new(-1.0, 0.0));

        let jc = raise_absorb(&b, 0).unwrap();
        let out = apply(&jc, site(Sigma::G, 1, 0, 0));
        assert_eq!(out[e], C64::new(1.0, 0.0));

        // the same pair through the rectangular route
        let a0 = annihilation(&b, 0).unwrap();
        let sp = atom_raise(a0.rows());
        let product = sp.matmul(&a0).unwrap();
        assert!((product.to_dense() - jc.to_dense()).camax() < 1e-15);
    }

    #[test]
    fn canonical_commutator_below_truncation_edge() {
        let n_max = 5;
        let t = enumerate_truncated(n_max);
        for j in 0..3 {
            for k in 0..3 {
                let a = annihilation(&t, j).unwrap();
                let ad = creation(&t, k).unwrap();
                let comm = a.commutator(&ad).unwrap();
                for (i, s) in t.states().iter().enumerate() {
                    if s.excitation() >= n_max {
                        continue;
                    }
                    for c in 0..t.dim() {
                        let expect = if j == k && c == i { 1.0 } else { 0.0 };
                        let got = comm.get(i, c);
                        assert!(
                            (got - C64::new(expect, 0.0)).norm() < 1e-12,
                            "j={j} k={k} at {s}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn atom_algebra() {
        let t = enumerate_truncated(4);
        let sz = pauli_z(&t);
        let sp = atom_raise(&t);
        let sm = atom_lower(&t);
        let sx = sp.add(&sm).unwrap();
        let anti = sz
            .matmul(&sx)
            .unwrap()
            .add(&sx.matmul(&sz).unwrap())
            .unwrap();
        assert!(anti.max_abs() < 1e-15);
        assert_eq!(sp.matmul(&sp).unwrap().nnz(), 0);
    }

    #[test]
    fn mode_range_checked() {
        let two = enumerate_two_mode(2);
        assert!(annihilation(&two, 1).is_ok());
        assert!(matches!(
            annihilation(&two, 2),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn transfer_matches_ladder_product() {
        let b = enumerate_shell(4);
        let hop = transfer(&b, 0, 1).unwrap();
        let a0 = annihilation(&b, 0).unwrap();
        let a1d = creation(a0.rows(), 1).unwrap();
        let product = a1d.matmul(&a0).unwrap();
        assert!((hop.to_dense() - product.to_dense()).camax() < 1e-12);
    }
}
