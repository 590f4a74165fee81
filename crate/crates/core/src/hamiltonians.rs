//! Hamiltonians of the three-cavity model (and the two-cavity variant).
//!
//! Units: hbar = 1, all frequencies angular. Sign convention: the chiral
//! Hamiltonian is `i kappa sigma_z sum_j a_{j+1}^dag a_j + h.c.` read
//! literally, so `<g;0,1,0|H|g;1,0,0> = -i kappa`. With `kappa > 0` photons
//! of the `g` branch circulate 0 -> 2 -> 1 and those of the `e` branch
//! 0 -> 1 -> 2.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisKind, BasisState};
use crate::bessel::bessel_j;
use crate::error::{Error, Result};
use crate::ladder::{pauli_z, raise_absorb};
use crate::operator::Operator;
use crate::C64;

/// First positive zero of `J_0`, the operating point of the frequency drive.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Physical constants of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Effective chiral coupling.
    pub kappa: f64,
    /// Vacuum Rabi coupling between each cavity and the atom.
    pub g_v: f64,
    /// Modulation frequency.
    pub nu_d: f64,
    /// Modulation index (depth over frequency).
    pub f: f64,
    /// Atom-cavity detuning.
    pub delta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            g_v: 1.0,
            nu_d: 100.0,
            f: J0_FIRST_ZERO,
            delta: 0.0,
        }
    }
}

impl ModelParams {
    pub fn with_kappa(kappa: f64) -> Self {
        Self {
            kappa,
            ..Self::default()
        }
    }

    /// Parameters whose chiral transfer time equals `t`.
    pub fn with_transfer_time(t: f64) -> Self {
        Self::with_kappa(kappa_for_transfer_time(t))
    }

    /// `T = 2 pi / (3 sqrt(3) |kappa|)`.
    pub fn transfer_time(&self) -> Result<f64> {
        if self.kappa == 0.0 || !self.kappa.is_finite() {
            return Err(Error::InvalidParameter(
                "transfer time needs a nonzero kappa".into(),
            ));
        }
        Ok(2.0 * PI / (3.0 * 3f64.sqrt() * self.kappa.abs()))
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.kappa, self.g_v, self.nu_d, self.f, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "model parameters must be finite".into(),
            ));
        }
        if self.g_v < 0.0 || self.nu_d < 0.0 {
            return Err(Error::InvalidParameter(
                "g_v and nu_d must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

pub fn kappa_for_transfer_time(t: f64) -> f64 {
    2.0 * PI / (3.0 * 3f64.sqrt() * t)
}

fn require_three_modes(basis: &Basis) -> Result<()> {
    match basis.kind() {
        BasisKind::TwoMode(_) => Err(Error::UnsupportedBasis(format!(
            "{} has only two cavities",
            basis.kind()
        ))),
        _ => Ok(()),
    }
}

/// Nearest-neighbour hopping on the Fock lattice: for every photon move
/// `j -> j + 1 (mod 3)` the entry `amplitude(site, j)` at `(target, site)` and
/// its conjugate at `(site, target)`.
fn cyclic_hopping(basis: &Arc<Basis>, amplitude: impl Fn(&BasisState, usize) -> C64) -> Operator {
    let mut entries = Vec::new();
    for (c, s) in basis.states().iter().enumerate() {
        for j in 0..3 {
            if let Some(t) = s.hop(j, (j + 1) % 3) {
                let r = basis.index_of(&t).expect("hops conserve excitation");
                let v = amplitude(s, j);
                entries.push((r, c, v));
                entries.push((c, r, v.conj()));
            }
        }
    }
    Operator::from_triplets(Arc::clone(basis), Arc::clone(basis), entries)
}

/// `H = i kappa sigma_z (a_1^dag a_0 + a_2^dag a_1 + a_0^dag a_2) + h.c.`
pub fn chiral_hamiltonian(params: &ModelParams, basis: &Arc<Basis>) -> Result<Operator> {
    require_three_modes(basis)?;
    let kappa = params.kappa;
    Ok(cyclic_hopping(basis, |s, j| {
        let m = (s.occ[j] as f64 * (s.occ[(j + 1) % 3] as f64 + 1.0)).sqrt();
        C64::new(0.0, kappa * s.sigma.z() * m)
    }))
}

/// Same graph and hopping phases as [`chiral_hamiltonian`], but every
/// hopping amplitude has modulus `hop` (no `sqrt(n)` factors).
pub fn homogeneous_lattice_hamiltonian(basis: &Arc<Basis>, hop: f64) -> Result<Operator> {
    require_three_modes(basis)?;
    Ok(cyclic_hopping(basis, |s, _| {
        C64::new(0.0, hop * s.sigma.z())
    }))
}

/// `sum_j (sigma^+ a_j w_j + h.c.)` with complex weights `w_j`.
fn weighted_jc(couplings: &[Operator; 3], weights: [C64; 3]) -> Result<Operator> {
    let mut h = Operator::zeros(
        Arc::clone(couplings[0].rows()),
        Arc::clone(couplings[0].cols()),
    );
    for (op, w) in couplings.iter().zip(weights) {
        let term = op.scale(w);
        h = h.add(&term)?.add(&term.adjoint())?;
    }
    Ok(h)
}

fn jc_couplings(basis: &Arc<Basis>) -> Result<[Operator; 3]> {
    Ok([
        raise_absorb(basis, 0)?,
        raise_absorb(basis, 1)?,
        raise_absorb(basis, 2)?,
    ])
}

/// Resonant Jaynes-Cummings part of the averaged Hamiltonian,
/// `delta sigma_z / 2 + g_v J_0(f) sum_j (sigma^+ a_j + h.c.)`.
pub fn jc_resonant(params: &ModelParams, basis: &Arc<Basis>) -> Result<Operator> {
    require_three_modes(basis)?;
    let g = params.g_v * bessel_j(0, params.f);
    let h = weighted_jc(&jc_couplings(basis)?, [C64::new(g, 0.0); 3])?;
    h.add(&pauli_z(basis).scale_real(params.delta / 2.0))
}

/// A Hamiltonian `H(t)` that can be applied to amplitude vectors.
pub trait TimeDependentHamiltonian: Sync {
    fn basis(&self) -> &Arc<Basis>;

    /// `out = H(t) psi`.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);

    /// `H(t)` as a sparse operator.
    fn at(&self, t: f64) -> Operator;

    /// Period of the drive, if any. Integrators never step over more than a
    /// twentieth of it.
    fn drive_period(&self) -> Option<f64> {
        None
    }
}

impl TimeDependentHamiltonian for Operator {
    fn basis(&self) -> &Arc<Basis> {
        self.cols()
    }

    fn apply(&self, _t: f64, psi: &[C64], out: &mut [C64]) {
        self.apply_into(psi, out);
    }

    fn at(&self, _t: f64) -> Operator {
        self.clone()
    }
}

/// Adapter for an arbitrary `t -> Operator` closure.
pub struct FnHamiltonian<F> {
    basis: Arc<Basis>,
    f: F,
    period: Option<f64>,
}

impl<F: Fn(f64) -> Operator + Sync> FnHamiltonian<F> {
    pub fn new(basis: Arc<Basis>, f: F, period: Option<f64>) -> Self {
        Self { basis, f, period }
    }
}

impl<F: Fn(f64) -> Operator + Sync> TimeDependentHamiltonian for FnHamiltonian<F> {
    fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        (self.f)(t).apply_into(psi, out);
    }

    fn at(&self, t: f64) -> Operator {
        (self.f)(t)
    }

    fn drive_period(&self) -> Option<f64> {
        self.period
    }
}

/// Frequency-modulated cavities in the frame rotating at the mean cavity
/// frequency:
/// `H(t) = delta sigma_z / 2 + g_v sum_j (sigma^+ a_j e^{i f cos(nu_d t - j phi)} + h.c.)`
/// with phase step `phi = 2 pi / 3` (or its reverse for the opposite drive chirality).
pub struct ModulatedHamiltonian {
    basis: Arc<Basis>,
    detuning: Operator,
    couplings: [Operator; 3],
    adjoints: [Operator; 3],
    g_v: f64,
    nu_d: f64,
    f: f64,
    phase_step: f64,
}

impl ModulatedHamiltonian {
    pub fn new(params: &ModelParams, basis: &Arc<Basis>) -> Result<Self> {
        Self::with_phase_step(params, basis, 2.0 * PI / 3.0)
    }

    pub fn with_phase_step(
        params: &ModelParams,
        basis: &Arc<Basis>,
        phase_step: f64,
    ) -> Result<Self> {
        require_three_modes(basis)?;
        params.validate()?;
        let couplings = jc_couplings(basis)?;
        let adjoints = [
            couplings[0].adjoint(),
            couplings[1].adjoint(),
            couplings[2].adjoint(),
        ];
        Ok(Self {
            basis: Arc::clone(basis),
            detuning: pauli_z(basis).scale_real(params.delta / 2.0),
            couplings,
            adjoints,
            g_v: params.g_v,
            nu_d: params.nu_d,
            f: params.f,
            phase_step,
        })
    }

    /// `g_v e^{i f cos(nu_d t - j phi)}` for the three cavities.
    pub fn weights(&self, t: f64) -> [C64; 3] {
        std::array::from_fn(|j| {
            C64::from_polar(
                self.g_v,
                self.f * (self.nu_d * t - j as f64 * self.phase_step).cos(),
            )
        })
    }
}

impl TimeDependentHamiltonian for ModulatedHamiltonian {
    fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        self.detuning.apply_into(psi, out);
        for (j, w) in self.weights(t).into_iter().enumerate() {
            self.couplings[j].apply_add(w, psi, out);
            self.adjoints[j].apply_add(w.conj(), psi, out);
        }
    }

    fn at(&self, t: f64) -> Operator {
        weighted_jc(&self.couplings, self.weights(t))
            .and_then(|h| h.add(&self.detuning))
            .expect("operators share one basis")
    }

    fn drive_period(&self) -> Option<f64> {
        (self.nu_d > 0.0).then(|| 2.0 * PI / self.nu_d)
    }
}

/// `H_I(t)` of the frequency-modulated scheme at one instant.
pub fn full_modulated(params: &ModelParams, basis: &Arc<Basis>, t: f64) -> Result<Operator> {
    Ok(ModulatedHamiltonian::new(params, basis)?.at(t))
}

/// Coupling-modulated scheme:
/// `H(t) = sum_j 2 g_v cos(nu_d t - 2 j pi / 3) (sigma^+ a_j + h.c.)`.
pub struct CouplingModulatedHamiltonian {
    basis: Arc<Basis>,
    couplings: [Operator; 3],
    adjoints: [Operator; 3],
    g_v: f64,
    nu_d: f64,
}

impl CouplingModulatedHamiltonian {
    pub fn new(params: &ModelParams, basis: &Arc<Basis>) -> Result<Self> {
        require_three_modes(basis)?;
        params.validate()?;
        let couplings = jc_couplings(basis)?;
        let adjoints = [
            couplings[0].adjoint(),
            couplings[1].adjoint(),
            couplings[2].adjoint(),
        ];
        Ok(Self {
            basis: Arc::clone(basis),
            couplings,
            adjoints,
            g_v: params.g_v,
            nu_d: params.nu_d,
        })
    }

    pub fn amplitudes(&self, t: f64) -> [f64; 3] {
        coupling_amplitudes(self.g_v, self.nu_d, t)
    }
}

/// Instantaneous couplings `g_j(t) = 2 g_v cos(nu_d t - 2 j pi / 3)`.
pub fn coupling_amplitudes(g_v: f64, nu_d: f64, t: f64) -> [f64; 3] {
    std::array::from_fn(|j| 2.0 * g_v * (nu_d * t - 2.0 * PI * j as f64 / 3.0).cos())
}

impl TimeDependentHamiltonian for CouplingModulatedHamiltonian {
    fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (j, g) in self.amplitudes(t).into_iter().enumerate() {
            let w = C64::new(g, 0.0);
            self.couplings[j].apply_add(w, psi, out);
            self.adjoints[j].apply_add(w, psi, out);
        }
    }

    fn at(&self, t: f64) -> Operator {
        weighted_jc(
            &self.couplings,
            self.amplitudes(t).map(|g| C64::new(g, 0.0)),
        )
        .expect("operators share one basis")
    }

    fn drive_period(&self) -> Option<f64> {
        (self.nu_d > 0.0).then(|| 2.0 * PI / self.nu_d)
    }
}

pub fn coupling_modulated(params: &ModelParams, basis: &Arc<Basis>, t: f64) -> Result<Operator> {
    Ok(CouplingModulatedHamiltonian::new(params, basis)?.at(t))
}

/// Effective chiral coupling predicted for the coupling-modulated scheme,
/// `sqrt(3) g_v^2 / nu_d`.
pub fn coupling_modulated_kappa(params: &ModelParams) -> f64 {
    3f64.sqrt() * params.g_v * params.g_v / params.nu_d
}

/// Two-cavity Hamiltonian `kappa sigma_z J_y` with `J_y = i a_0^dag a_1 - i a_1^dag a_0`.
pub fn two_cavity_hamiltonian(params: &ModelParams, basis: &Arc<Basis>) -> Result<Operator> {
    if !matches!(basis.kind(), BasisKind::TwoMode(_)) {
        return Err(Error::UnsupportedBasis(format!(
            "expected a two-mode basis, got {}",
            basis.kind()
        )));
    }
    let mut entries = Vec::new();
    for (c, s) in basis.states().iter().enumerate() {
        // a_0^dag a_1 moves a photon from cavity 1 to cavity 0
        if let Some(t) = s.hop(1, 0) {
            let r = basis.index_of(&t).expect("two-mode hops stay in the basis");
            let v = C64::new(
                0.0,
                params.kappa * s.sigma.z() * (s.occ[1] as f64 * (s.occ[0] as f64 + 1.0)).sqrt(),
            );
            entries.push((r, c, v));
            entries.push((c, r, v.conj()));
        }
    }
    Ok(Operator::from_triplets(
        Arc::clone(basis),
        Arc::clone(basis),
        entries,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_shell, enumerate_truncated, enumerate_two_mode, Sigma};
    use crate::ladder::{annihilation, creation, total_excitation};
    use nalgebra::{DMatrix, SymmetricEigen};

    fn site(sigma: Sigma, n0: u32, n1: u32, n2: u32) -> BasisState {
        BasisState::new(sigma, n0, n1, n2)
    }

    fn sorted_eigenvalues(m: DMatrix<C64>) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn one_photon_spectrum() {
        let kappa = 0.7;
        let b = enumerate_shell(1);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(kappa), &b).unwrap();
        let g_block = h.to_dense().view((0, 0), (3, 3)).into_owned();
        let ev = sorted_eigenvalues(g_block);
        let s3 = 3f64.sqrt() * kappa;
        for (got, want) in ev.iter().zip([-s3, 0.0, s3]) {
            assert!((got - want).abs() < 1e-12 * kappa);
        }
    }

    #[test]
    fn sign_convention() {
        let b = enumerate_shell(1);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(1.0), &b).unwrap();
        let from = b.index_of(&site(Sigma::G, 1, 0, 0)).unwrap();
        let to = b.index_of(&site(Sigma::G, 0, 1, 0)).unwrap();
        assert_eq!(h.get(to, from), C64::new(0.0, -1.0));
    }

    /// Independent route: assemble the chiral Hamiltonian from ladder-operator products.
    #[test]
    fn matches_ladder_product_construction() {
        let kappa = 1.3;
        let b = enumerate_shell(4);
        let sz = crate::ladder::pauli_z(&b);
        let mut hops = Operator::zeros(b.clone(), b.clone());
        for j in 0..3 {
            let a = annihilation(&b, j).unwrap();
            let ad = creation(a.rows(), (j + 1) % 3).unwrap();
            hops = hops.add(&ad.matmul(&a).unwrap()).unwrap();
        }
        let half = sz.matmul(&hops).unwrap().scale(C64::new(0.0, kappa));
        let reference = half.add(&half.adjoint()).unwrap();
        let h = chiral_hamiltonian(&ModelParams::with_kappa(kappa), &b).unwrap();
        assert!((h.to_dense() - reference.to_dense()).camax() < 1e-12);
    }

    #[test]
    fn conserves_excitation_and_sigma_z() {
        let t = enumerate_truncated(6);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(1.0), &t).unwrap();
        assert!(h.is_hermitian());
        assert_eq!(
            h.commutator(&crate::ladder::pauli_z(&t)).unwrap().max_abs(),
            0.0
        );
        assert_eq!(h.commutator(&total_excitation(&t)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn construction_is_deterministic() {
        let b = enumerate_shell(5);
        let p = ModelParams::with_kappa(0.3);
        let h1 = chiral_hamiltonian(&p, &b).unwrap().to_coo();
        let h2 = chiral_hamiltonian(&p, &b).unwrap().to_coo();
        assert_eq!(h1, h2);
    }

    #[test]
    fn jc_vanishes_at_j0_zero() {
        let n = 5;
        let b = enumerate_shell(n);
        let p = ModelParams {
            f: 2.4048,
            delta: 0.0,
            g_v: 1.0,
            ..ModelParams::default()
        };
        let h0 = jc_resonant(&p, &b).unwrap();
        assert!(h0.max_abs() <= 1e-4 * p.g_v * (n as f64).sqrt());

        let p0 = ModelParams { f: 0.0, ..p };
        let h = jc_resonant(&p0, &enumerate_shell(1)).unwrap();
        assert_eq!(h.get(3, 0), C64::new(1.0, 0.0));

        let pd = ModelParams {
            f: 0.0,
            g_v: 0.0,
            delta: 2.0,
            ..p
        };
        let hd = jc_resonant(&pd, &enumerate_shell(1)).unwrap();
        assert_eq!(hd.get(0, 0), C64::new(-1.0, 0.0));
        assert_eq!(hd.get(3, 3), C64::new(1.0, 0.0));
        assert_eq!(hd.nnz(), 4);
    }

    #[test]
    fn modulated_reduces_to_jc_without_modulation() {
        let b = enumerate_shell(2);
        let p = ModelParams {
            f: 0.0,
            delta: 0.3,
            ..ModelParams::default()
        };
        let h = full_modulated(&p, &b, 0.37).unwrap();
        let jc = jc_resonant(&p, &b).unwrap();
        assert!((h.to_dense() - jc.to_dense()).camax() < 1e-15);
    }

    #[test]
    fn modulated_is_hermitian_and_periodic() {
        let b = enumerate_shell(3);
        let p = ModelParams {
            nu_d: 7.0,
            delta: 0.1,
            ..ModelParams::default()
        };
        let hm = ModulatedHamiltonian::new(&p, &b).unwrap();
        let period = hm.drive_period().unwrap();
        for k in 0..7 {
            let t = 0.113 * k as f64;
            let a = hm.at(t);
            assert!(a.is_hermitian());
            let shifted = hm.at(t + period);
            assert!((a.to_dense() - shifted.to_dense()).camax() < 1e-12);
            // apply() agrees with the assembled operator
            let psi: Vec<C64> = (0..b.dim())
                .map(|i| C64::new(i as f64, 1.0 - i as f64))
                .collect();
            let mut out = vec![C64::new(0.0, 0.0); b.dim()];
            hm.apply(t, &psi, &mut out);
            let direct = a.apply_vec(&psi);
            assert!(out.iter().zip(&direct).all(|(x, y)| (x - y).norm() < 1e-12));
        }
    }

    /// Quadrature oracle: the period average of exp(i f cos(theta)) is J_0(f).
    #[test]
    fn period_average_of_phase_factor_is_j0() {
        let p = ModelParams {
            nu_d: 3.0,
            f: 1.7,
            ..ModelParams::default()
        };
        let b = enumerate_shell(1);
        let hm = ModulatedHamiltonian::new(&p, &b).unwrap();
        let period = hm.drive_period().unwrap();
        let nodes = 256;
        for j in 0..3 {
            let avg: C64 = (0..nodes)
                .map(|k| hm.weights(period * k as f64 / nodes as f64)[j])
                .sum::<C64>()
                / nodes as f64;
            assert!(
                (avg - C64::new(bessel_j(0, p.f), 0.0)).norm() < 1e-13,
                "mode {j}: {avg}"
            );
        }
    }

    #[test]
    fn coupling_modulation_values() {
        let g = coupling_amplitudes(1.0, 3.0, 0.0);
        assert!(
            (g[0] - 2.0).abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15 && (g[2] + 1.0).abs() < 1e-15
        );
        for k in 0..50 {
            let s: f64 = coupling_amplitudes(0.8, 3.0, 0.1 * k as f64).iter().sum();
            assert!(s.abs() < 1e-14);
        }
        let p = ModelParams {
            g_v: 1.0,
            nu_d: 50.0,
            ..ModelParams::default()
        };
        assert!((coupling_modulated_kappa(&p) - 0.034_641_016_151_377_54).abs() < 1e-15);
        let h = coupling_modulated(&p, &enumerate_shell(2), 0.2).unwrap();
        assert!(h.is_hermitian());
    }

    #[test]
    fn two_cavity_one_photon_block() {
        let kappa = 0.9;
        let b = enumerate_two_mode(1);
        let h = two_cavity_hamiltonian(&ModelParams::with_kappa(kappa), &b).unwrap();
        // g branch, ordered (|1,0>, |0,1>): -kappa [[0, i], [-i, 0]]
        let d = h.to_dense();
        assert_eq!(d[(0, 1)], C64::new(0.0, -kappa));
        assert_eq!(d[(1, 0)], C64::new(0.0, kappa));
        let ev = sorted_eigenvalues(d.view((0, 0), (2, 2)).into_owned());
        assert!((ev[0] + kappa).abs() < 1e-14 && (ev[1] - kappa).abs() < 1e-14);
        assert!(h.is_hermitian());
        let n_tot = crate::ladder::number(&b, 0)
            .unwrap()
            .add(&crate::ladder::number(&b, 1).unwrap())
            .unwrap();
        assert_eq!(h.commutator(&n_tot).unwrap().max_abs(), 0.0);
        assert!(chiral_hamiltonian(&ModelParams::default(), &b).is_err());
        assert!(two_cavity_hamiltonian(&ModelParams::default(), &enumerate_shell(1)).is_err());
    }

    #[test]
    fn homogeneous_lattice_magnitudes() {
        let b1 = enumerate_shell(1);
        let chiral = chiral_hamiltonian(&ModelParams::with_kappa(0.5), &b1).unwrap();
        let homog = homogeneous_lattice_hamiltonian(&b1, 0.5).unwrap();
        assert_eq!(chiral.to_coo(), homog.to_coo());

        let b2 = enumerate_shell(2);
        let chiral = chiral_hamiltonian(&ModelParams::with_kappa(1.0), &b2).unwrap();
        let homog = homogeneous_lattice_hamiltonian(&b2, 1.0).unwrap();
        assert!(homog
            .triplets()
            .all(|(_, _, v)| (v.norm() - 1.0).abs() < 1e-15));
        assert!(chiral
            .triplets()
            .any(|(_, _, v)| (v.norm() - 2f64.sqrt()).abs() < 1e-15));
        assert!(homog.hermiticity_residual() < 1e-12);
        // identical sparsity pattern
        let pattern = |op: &Operator| op.triplets().map(|(r, c, _)| (r, c)).collect::<Vec<_>>();
        assert_eq!(pattern(&chiral), pattern(&homog));
    }
}
