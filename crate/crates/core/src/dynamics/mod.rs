//! Time evolution: exact spectral propagation, adaptive integration of
//! time-dependent Hamiltonians, and the Lindblad master equation.

mod lindblad;
pub mod ode;
mod propagator;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use lindblad::{
    build_collapse_ops, lindblad_evolve, DephasingConvention, DissipationParams, LINDBLAD_TOL,
};
pub use propagator::{propagator_exact, unitarity_residual, SpectralPropagator};

use crate::basis::{Basis, Sigma};
use crate::error::{Error, Result};
use crate::hamiltonians::{ModelParams, TimeDependentHamiltonian};
use crate::io::format_float;
use crate::operator::{check_basis, Operator};
use crate::state::{DensityMatrix, StateVector};
use crate::C64;
use ode::{integrate, OdeOptions};

/// Default integrator tolerance for closed-system runs.
pub const SCHRODINGER_TOL: f64 = 1e-8;

/// Numerical health of an evolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Largest `| ||psi(t)|| - 1 |` over the output grid.
    pub norm_drift: f64,
    /// Largest `|tr rho(t) - tr rho(0)|` over the output grid.
    pub trace_drift: f64,
    /// Largest `|rho - rho^dag|` element before symmetrization.
    pub hermiticity_residual: f64,
    /// Smallest density-matrix eigenvalue over the output grid.
    pub min_eigenvalue: Option<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Set when any diagnostic exceeds its tolerance; see `notes`.
    pub flagged: bool,
    pub notes: Vec<String>,
}

impl Diagnostics {
    pub(crate) fn flag(&mut self, note: String) {
        self.flagged = true;
        self.notes.push(note);
    }
}

/// The states of an evolution, one per output time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "states", rename_all = "snake_case")]
pub enum Trajectory {
    Pure(Vec<StateVector>),
    Mixed(Vec<DensityMatrix>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    #[serde(flatten)]
    pub states: Trajectory,
    pub diagnostics: Diagnostics,
}

impl EvolutionResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn pure_states(&self) -> Option<&[StateVector]> {
        match &self.states {
            Trajectory::Pure(v) => Some(v),
            Trajectory::Mixed(_) => None,
        }
    }

    pub fn mixed_states(&self) -> Option<&[DensityMatrix]> {
        match &self.states {
            Trajectory::Mixed(v) => Some(v),
            Trajectory::Pure(_) => None,
        }
    }

    pub fn basis(&self) -> Option<&Arc<Basis>> {
        match &self.states {
            Trajectory::Pure(v) => v.first().map(StateVector::basis),
            Trajectory::Mixed(v) => v.first().map(DensityMatrix::basis),
        }
    }

    /// Site probabilities at output index `k`.
    pub fn probabilities(&self, k: usize) -> Vec<f64> {
        match &self.states {
            Trajectory::Pure(v) => v[k].probabilities(),
            Trajectory::Mixed(v) => v[k].populations(),
        }
    }

    /// `<O>` at output index `k`.
    pub fn expectation(&self, k: usize, op: &Operator) -> Result<C64> {
        match &self.states {
            Trajectory::Pure(v) => v[k].expectation(op),
            Trajectory::Mixed(v) => v[k].expectation(op),
        }
    }

    /// One row per time point: `t`, then the real part of each observable.
    pub fn write_csv<W: Write>(&self, mut w: W, observables: &[(&str, &Operator)]) -> Result<()> {
        let mut header = vec!["t"];
        header.extend(observables.iter().map(|(name, _)| *name));
        writeln!(w, "{}", header.join(","))?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![format_float(*t)];
            for (_, op) in observables {
                row.push(format_float(self.expectation(k, op)?.re));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `c_j(t) = [1 + 2 cos(sqrt(3) kappa sigma_z t + 2 j pi / 3)] / 3`, the
/// Heisenberg-picture expansion `a_0(t) = sum_j c_j(t) a_j(0)` within one
/// atom branch.
///
/// For one photon, `<sigma; 1_0| U(t) |sigma; 1_j> = c_j(t)`, so the
/// Schrodinger amplitudes of `U(t)|sigma;1,0,0>` are `c_k(-t)`.
pub fn heisenberg_coefficients(params: &ModelParams, sigma: Sigma, t: f64) -> [f64; 3] {
    let w = 3f64.sqrt() * params.kappa * sigma.z() * t;
    std::array::from_fn(|j| (1.0 + 2.0 * (w + 2.0 * j as f64 * PI / 3.0).cos()) / 3.0)
}

fn pure_result(
    times: &[f64],
    states: Vec<StateVector>,
    mut diag: Diagnostics,
    tol: f64,
) -> EvolutionResult {
    diag.norm_drift = states
        .iter()
        .map(|s| (s.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    if diag.norm_drift > 10.0 * tol {
        diag.flag(format!(
            "norm drift {:.3e} exceeds {:.1e}",
            diag.norm_drift,
            10.0 * tol
        ));
    }
    EvolutionResult {
        times: times.to_vec(),
        states: Trajectory::Pure(states),
        diagnostics: diag,
    }
}

/// Exact evolution of `psi0` under a time-independent Hermitian `h`;
/// `psi0` is the state at `times[0]`.
pub fn evolve_exact(h: &Operator, psi0: &StateVector, times: &[f64]) -> Result<EvolutionResult> {
    check_basis(h.cols(), psi0.basis())?;
    let prop = SpectralPropagator::new(h)?;
    let t0 = times.first().copied().unwrap_or(0.0);
    let states = times
        .iter()
        .map(|&t| prop.evolve(psi0, t - t0))
        .collect::<Result<Vec<_>>>()?;
    Ok(pure_result(times, states, Diagnostics::default(), 1e-11))
}

/// Adaptive integration of `i d psi/dt = H(t) psi` from `psi0` at
/// `times[0]`. Steps never exceed a twentieth of the drive period. The
/// state is never renormalized; norm drift beyond `10 tol` flags the result.
pub fn evolve_timedep(
    h: &dyn TimeDependentHamiltonian,
    psi0: &StateVector,
    times: &[f64],
    tol: f64,
) -> Result<EvolutionResult> {
    check_basis(h.basis(), psi0.basis())?;
    let mut opts = OdeOptions::new(tol);
    if let Some(period) = h.drive_period() {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "drive period {period} must be positive"
            )));
        }
        opts = opts.with_h_max(period / 20.0);
    }
    let basis = Arc::clone(psi0.basis());
    let mut states = Vec::with_capacity(times.len());
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        h.apply(t, y, dy);
        for v in dy.iter_mut() {
            *v = C64::new(v.im, -v.re);
        }
    };
    let stats = integrate(rhs, psi0.amplitudes().to_vec(), times, opts, |_, y| {
        states.push(StateVector::unchecked(Arc::clone(&basis), y.to_vec()));
    })?;
    let diag = Diagnostics {
        steps_accepted: stats.accepted,
        steps_rejected: stats.rejected,
        ..Diagnostics::default()
    };
    Ok(pure_result(times, states, diag, tol))
}

/// `n` evenly spaced points on `[0, t_end]` inclusive (`n >= 2`).
pub fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}
