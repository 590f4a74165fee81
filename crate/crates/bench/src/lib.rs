//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use chiral_fock::analysis::Fig3Setup;
use chiral_fock::hamiltonians::{chiral_hamiltonian, ModulatedHamiltonian};
use chiral_fock::{
    build_collapse_ops, enumerate_shell, fock_state, Basis, DensityMatrix, ModelParams, Operator,
    Sigma, StateVector,
};

/// Chiral Hamiltonian on shell `n` with `|g;n,0,0>`.
pub struct ShellFixture {
    pub basis: Arc<Basis>,
    pub params: ModelParams,
    pub h: Operator,
    pub psi0: StateVector,
}

impl ShellFixture {
    pub fn new(n: u32) -> Self {
        let basis = enumerate_shell(n);
        let params = ModelParams::with_kappa(1.0);
        let h = chiral_hamiltonian(&params, &basis).expect("shell basis");
        let psi0 = fock_state(&basis, Sigma::G, n, 0, 0).expect("corner state");
        Self {
            basis,
            params,
            h,
            psi0,
        }
    }

    pub fn modulated(&self) -> ModulatedHamiltonian {
        ModulatedHamiltonian::new(&self.params, &self.basis).expect("three-mode basis")
    }
}

/// The dissipative transfer run at `n` photons: Hamiltonian, collapse
/// operators and initial density matrix on the truncated basis.
pub struct LindbladFixture {
    pub setup: Fig3Setup,
    pub h: Operator,
    pub collapse: Vec<Operator>,
    pub rho0: DensityMatrix,
}

impl LindbladFixture {
    pub fn new(n: u32) -> Self {
        let setup = Fig3Setup {
            n,
            ..Fig3Setup::default()
        };
        let basis = setup.basis();
        let h = chiral_hamiltonian(&setup.params(), &basis).expect("three-mode basis");
        let collapse = build_collapse_ops(&basis, &setup.dissipation).expect("valid rates");
        let rho0 = setup.initial_state().expect("n >= 1").to_density();
        Self {
            setup,
            h,
            collapse,
            rho0,
        }
    }
}
