//! End-to-end acceptance checks of the model's quantitative claims, shared
//! by the `acceptance` test target and the command-line `selftest`.
//!
//! Every check returns a [`CriterionOutcome`]; numerical errors inside a
//! check count as failures.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{flux_table, ipr, run_fig3, Fig3Setup, TriangleKind};
use crate::basis::{enumerate_shell, BasisState, Sigma};
use crate::bessel::find_j0_zero;
use crate::dynamics::{heisenberg_coefficients, linspace, SpectralPropagator};
use crate::error::Result;
use crate::floquet::{beta_series, compare_with, ComparisonOptions, BETA_TOL};
use crate::hamiltonians::{chiral_hamiltonian, homogeneous_lattice_hamiltonian, ModelParams};
use crate::protocols::{
    entangled_coherent_protocol, ghz_chain, noon_protocol, two_cavity_rotation, PulseMode,
    GHZ_DIMENSION_BUDGET,
};
use crate::state::fock_state;
use crate::C64;

/// Identifiers of the checks, in run order.
pub const CRITERIA: [&str; 13] = [
    "beta",
    "spectrum",
    "transfer",
    "revival",
    "coefficient_oracle",
    "flux",
    "floquet",
    "noon",
    "ghz",
    "entangled_coherent",
    "two_cavity",
    "dissipative_transfer",
    "nondispersive",
];

/// Ratios `nu_d / g_v` of the Floquet convergence scan.
pub const FLOQUET_RATIOS: [f64; 4] = [25.0, 50.0, 100.0, 200.0];

/// Recorded regression values (see the decisions log of the project).
pub mod regression {
    /// Floquet infidelity at `nu_d / g_v = 100`, `N = 1`, stroboscopic `T`.
    pub const FLOQUET_INFIDELITY_100: f64 = 4.11e-5;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag} {:<22} {:>8.2}s  {}",
            self.id, self.seconds, self.detail
        )
    }
}

type Check = (bool, String);

fn all_close(values: &[f64], want: f64, tol: f64) -> bool {
    values.iter().all(|v| (v - want).abs() <= tol)
}

fn beta() -> Result<Check> {
    let f = find_j0_zero();
    let mut best = f64::INFINITY;
    let mut b = 0.0;
    for _ in 0..5 {
        let start = Instant::now();
        b = std::hint::black_box(beta_series(std::hint::black_box(f), BETA_TOL));
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok((
        (b - 0.307).abs() <= 0.001 && best < 1e-3,
        format!("beta = {b:.6} at f = {f:.9}, {:.1} us", best * 1e6),
    ))
}

fn spectrum() -> Result<Check> {
    let mut worst = 0.0f64;
    for kappa in [1.0, 0.25, 3.0] {
        let h = chiral_hamiltonian(&ModelParams::with_kappa(kappa), &enumerate_shell(1))?;
        let prop = SpectralPropagator::new(&h)?;
        let s3 = 3f64.sqrt() * kappa;
        // g block (3 sites) then the single e site at energy 0
        let mut want = vec![-s3, 0.0, 0.0, s3];
        want.sort_by(f64::total_cmp);
        for (e, w) in prop.eigenvalues().iter().zip(&want) {
            worst = worst.max((e - w).abs() / kappa);
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max |E - E_exact| / kappa = {worst:.2e}"),
    ))
}

fn transfer() -> Result<Check> {
    let params = ModelParams::default();
    let t = params.transfer_time()?;
    let mut worst = 1.0f64;
    for n in [1, 5, 10] {
        let b = enumerate_shell(n);
        let prop = SpectralPropagator::new(&chiral_hamiltonian(&params, &b)?)?;
        let g = prop.evolve(&fock_state(&b, Sigma::G, n, 0, 0)?, t)?;
        let e = prop.evolve(&fock_state(&b, Sigma::E, n - 1, 0, 0)?, t)?;
        worst = worst.min(g.amplitude(&BasisState::new(Sigma::G, 0, 0, n)).norm());
        worst = worst.min(e.amplitude(&BasisState::new(Sigma::E, 0, n - 1, 0)).norm());
    }
    Ok((
        worst > 1.0 - 1e-9,
        format!(
            "min overlap = 1 - {:.2e} over N in {{1, 5, 10}}",
            1.0 - worst
        ),
    ))
}

fn revival() -> Result<Check> {
    let params = ModelParams::default();
    let t3 = 3.0 * params.transfer_time()?;
    let mut worst = 1.0f64;
    let mut count = 0;
    for n in 1..=10 {
        let b = enumerate_shell(n);
        let prop = SpectralPropagator::new(&chiral_hamiltonian(&params, &b)?)?;
        for sigma in [Sigma::G, Sigma::E] {
            let p = n - sigma.excitation();
            if p == 0 {
                continue;
            }
            for j in 0..3 {
                let mut occ = [0; 3];
                occ[j] = p;
                let psi = fock_state(&b, sigma, occ[0], occ[1], occ[2])?;
                worst = worst.min(psi.inner(&prop.evolve(&psi, t3)?)?.norm());
                count += 1;
            }
        }
    }
    Ok((
        worst > 1.0 - 1e-9,
        format!(
            "min |<psi|U(3T)|psi>| = 1 - {:.2e} over {count} corner states",
            1.0 - worst
        ),
    ))
}

fn coefficient_oracle() -> Result<Check> {
    let params = ModelParams::default();
    let t_end = 3.0 * params.transfer_time()?;
    let mut worst = 0.0f64;
    for sigma in [Sigma::G, Sigma::E] {
        let b = enumerate_shell(1 + sigma.excitation());
        let prop = SpectralPropagator::new(&chiral_hamiltonian(&params, &b)?)?;
        let psi0 = fock_state(&b, sigma, 1, 0, 0)?;
        for t in linspace(t_end, 301) {
            let psi = prop.evolve(&psi0, t)?;
            let c = heisenberg_coefficients(&params, sigma, -t);
            for k in 0..3 {
                let mut occ = [0; 3];
                occ[k] = 1;
                let a = psi.amplitude(&BasisState { sigma, occ });
                worst = worst.max((a - C64::new(c[k], 0.0)).norm());
            }
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max amplitude error = {worst:.2e} on 301 points of [0, 3T]"),
    ))
}

fn flux() -> Result<Check> {
    let h = chiral_hamiltonian(&ModelParams::default(), &enumerate_shell(3))?;
    let table = flux_table(&h)?;
    let mut worst = 0.0f64;
    for e in &table {
        let sign = match (e.plaquette.sigma, e.plaquette.kind) {
            (Sigma::G, TriangleKind::Up) | (Sigma::E, TriangleKind::Down) => 1.0,
            _ => -1.0,
        };
        worst = worst.max((e.flux - sign * PI / 2.0).abs());
    }
    Ok((
        worst == 0.0 && table.len() == 13,
        format!("{} plaquettes, max deviation {worst:.1e} rad", table.len()),
    ))
}

fn floquet() -> Result<Check> {
    let run = |stroboscopic: bool| -> Result<Vec<f64>> {
        FLOQUET_RATIOS
            .iter()
            .map(|&r| {
                let params = ModelParams {
                    g_v: 1.0,
                    nu_d: r,
                    ..ModelParams::default()
                };
                let opts = ComparisonOptions {
                    stroboscopic,
                    ..ComparisonOptions::default()
                };
                Ok(compare_with(&params, 1, &opts)?.infidelity)
            })
            .collect()
    };
    let strobe = run(true)?;
    let raw = run(false)?;
    let monotone = strobe.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3e}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok((
        monotone && strobe[2] < 0.01,
        format!(
            "infidelity at 25/50/100/200: {} (unsnapped T: {})",
            fmt(&strobe),
            fmt(&raw)
        ),
    ))
}

fn noon() -> Result<Check> {
    let mut worst_f = 1.0f64;
    let mut worst_p = 1.0f64;
    for n in [1, 5, 10] {
        let r = noon_protocol(n, &ModelParams::default(), PulseMode::Ideal)?;
        worst_f = worst_f.min(r.target_fidelity);
        worst_p = worst_p.min(r.atom_purity.unwrap_or(0.0));
    }
    Ok((
        worst_f > 1.0 - 1e-9 && worst_p > 1.0 - 1e-9,
        format!(
            "min fidelity 1 - {:.2e}, min atom purity 1 - {:.2e}",
            1.0 - worst_f,
            1.0 - worst_p
        ),
    ))
}

fn ghz() -> Result<Check> {
    let p = ModelParams::default();
    let one = ghz_chain(2, 1, &p, GHZ_DIMENSION_BUDGET)?;
    let two = ghz_chain(2, 2, &p, GHZ_DIMENSION_BUDGET)?;
    let photonic = one.metric("photonic_ghz_fidelity").unwrap_or(0.0);
    let ok = [one.target_fidelity, photonic, two.target_fidelity]
        .iter()
        .all(|&f| f > 1.0 - 1e-9);
    Ok((
        ok,
        format!(
            "M=2 N=1: 1 - {:.2e} (photonic after rotation 1 - {:.2e}); M=2 N=2: 1 - {:.2e}",
            1.0 - one.target_fidelity,
            1.0 - photonic,
            1.0 - two.target_fidelity
        ),
    ))
}

fn entangled_coherent() -> Result<Check> {
    let p = ModelParams::default();
    let physical: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&a| {
            Ok(entangled_coherent_protocol(a, &p, None, PulseMode::Physical)?.target_fidelity)
        })
        .collect::<Result<_>>()?;
    let ideal = entangled_coherent_protocol(2.0, &p, None, PulseMode::Ideal)?.target_fidelity;
    let increasing = physical.windows(2).all(|w| w[1] > w[0]);
    Ok((
        increasing && ideal > 0.99,
        format!(
            "physical alpha=1,2,3: {:.6}, {:.6}, {:.6}; ideal alpha=2: {ideal:.6}",
            physical[0], physical[1], physical[2]
        ),
    ))
}

fn two_cavity() -> Result<Check> {
    let p = ModelParams::default();
    let mut worst = 1.0f64;
    let mut time = 0.0;
    for n in [1, 6] {
        let r = two_cavity_rotation(n, &p, None)?;
        worst = r.branch_fidelities.iter().copied().fold(worst, f64::min);
        time = r.metric("time").unwrap_or(f64::NAN);
    }
    Ok((
        worst > 1.0 - 1e-9,
        format!(
            "t* = {time:.12} (pi/(4 kappa) = {:.12}), min branch fidelity 1 - {:.2e}",
            PI / 4.0,
            1.0 - worst
        ),
    ))
}

fn dissipative_transfer() -> Result<Check> {
    let setup = Fig3Setup {
        samples: 161,
        ..Fig3Setup::default()
    };
    let ideal = run_fig3(&setup, false)?;
    let k = ideal.curves.nearest(setup.transfer_time).unwrap_or(0);
    let at = |c: &crate::analysis::Fig3Curves| [c.p_e090[k], c.p_g0010[k], c.coh[k]];
    let ideal_ok = all_close(&at(&ideal.curves), 0.5, 1e-6);
    let lossy = run_fig3(&setup, true)?;
    let d = &lossy.result.diagnostics;
    let min_eig = d.min_eigenvalue.unwrap_or(f64::NEG_INFINITY);
    let values = at(&lossy.curves);
    let ok = ideal_ok
        && d.trace_drift <= 1e-7
        && min_eig > -1e-7
        && values.iter().all(|&v| v < 0.5)
        && lossy.curves.cauchy_schwarz_violation() <= 1e-9;
    let iv = at(&ideal.curves);
    Ok((
        ok,
        format!(
            "ideal at T: ({:.9}, {:.9}, {:.9}); dissipative at T: ({:.6}, {:.6}, {:.6}); trace drift {:.1e}, min eigenvalue {:.1e}",
            iv[0], iv[1], iv[2], values[0], values[1], values[2], d.trace_drift, min_eig
        ),
    ))
}

fn nondispersive() -> Result<Check> {
    let params = ModelParams::default();
    let t3 = 3.0 * params.transfer_time()?;
    let b = enumerate_shell(10);
    let psi = fock_state(&b, Sigma::G, 10, 0, 0)?;
    let chiral = SpectralPropagator::new(&chiral_hamiltonian(&params, &b)?)?.evolve(&psi, t3)?;
    let flat = SpectralPropagator::new(&homogeneous_lattice_hamiltonian(&b, params.kappa)?)?
        .evolve(&psi, t3)?;
    let (ic, ih) = (ipr(&chiral), ipr(&flat));
    Ok((
        ic > 0.99 && ih < 0.5 * ic,
        format!(
            "IPR at 3T: chiral {ic:.12}, homogeneous {ih:.6}, ratio {:.6}",
            ih / ic
        ),
    ))
}

/// Runs one check by identifier.
pub fn run_criterion(id: &str) -> CriterionOutcome {
    let start = Instant::now();
    let outcome = match id {
        "beta" => beta(),
        "spectrum" => spectrum(),
        "transfer" => transfer(),
        "revival" => revival(),
        "coefficient_oracle" => coefficient_oracle(),
        "flux" => flux(),
        "floquet" => floquet(),
        "noon" => noon(),
        "ghz" => ghz(),
        "entangled_coherent" => entangled_coherent(),
        "two_cavity" => two_cavity(),
        "dissipative_transfer" => dissipative_transfer(),
        "nondispersive" => nondispersive(),
        other => Ok((false, format!("unknown criterion {other:?}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome {
        id: id.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every check in order, calling `report` after each.
pub fn run_all(mut report: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .map(|id| {
            let o = run_criterion(id);
            report(&o);
            o
        })
        .collect()
}
