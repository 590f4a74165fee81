//! Chiral Fock-state-lattice dynamics of three cavities sharing one
//! two-level atom.
//!
//! The crate builds the lattice of joint photon-number states, the
//! Hamiltonians acting on it (the chiral effective model, the modulated
//! laboratory-frame drives it averages, a homogeneous-coupling comparison
//! lattice and a two-cavity variant), evolves states exactly, with an
//! adaptive integrator, or under a Lindblad master equation, and runs the
//! state-preparation protocols built on the atom-conditioned photon
//! circulation (NOON, entangled coherent and GHZ-NOON states).
//!
//! Conventions: `hbar = 1`, all frequencies angular, time in the caller's
//! unit. See [`hamiltonians`] for the sign convention of the chiral coupling.

pub mod acceptance;
pub mod analysis;
pub mod basis;
pub mod bessel;
pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod hamiltonians;
pub mod io;
pub mod ladder;
pub mod normal_modes;
pub mod operator;
pub mod protocols;
pub mod state;

pub use num_complex::Complex64 as C64;

pub use basis::{
    enumerate_shell, enumerate_truncated, enumerate_two_mode, Basis, BasisKind, BasisState, Sigma,
};
pub use dynamics::{
    build_collapse_ops, evolve_exact, evolve_timedep, heisenberg_coefficients, lindblad_evolve,
    propagator_exact, DephasingConvention, Diagnostics, DissipationParams, EvolutionResult,
    SpectralPropagator, Trajectory,
};
pub use error::{Error, Result};
pub use hamiltonians::{ModelParams, TimeDependentHamiltonian};
pub use operator::Operator;
pub use state::{coherent_state, fock_state, DensityMatrix, StateVector};

/// `ln(n!)`, exact summation below 256 and Stirling's series above.
pub fn ln_factorial(n: u32) -> f64 {
    if n < 256 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
    }
}
