//! Floquet reduction of the modulated drives to the chiral model.
//!
//! Frequency modulation at index `f` yields `kappa = g_v^2 beta / nu_d` with
//! `beta = sum_n 2 J_n(f)^2 sin(2 n pi / 3) / n`; coupling modulation yields
//! `kappa = sqrt(3) g_v^2 / nu_d`. The reduction is checked dynamically by
//! evolving the same corner state under the drive and under the effective
//! Hamiltonian.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_shell, Sigma};
use crate::bessel::bessel_j;
use crate::dynamics::{evolve_timedep, SpectralPropagator};
use crate::error::{Error, Result};
use crate::hamiltonians::{
    chiral_hamiltonian, coupling_modulated_kappa, jc_resonant, CouplingModulatedHamiltonian,
    ModelParams, ModulatedHamiltonian, TimeDependentHamiltonian,
};
use crate::io::write_csv;
use crate::state::{fock_state, StateVector};

/// Default truncation tolerance for the `beta` series.
pub const BETA_TOL: f64 = 1e-12;

/// Which laboratory drive realizes the chiral coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveScheme {
    #[default]
    FrequencyModulated,
    CouplingModulated,
}

fn beta_term(f: f64, n: u32) -> f64 {
    if n.is_multiple_of(3) {
        return 0.0;
    }
    let j = bessel_j(n, f);
    2.0 * j * j * (2.0 * PI * n as f64 / 3.0).sin() / n as f64
}

/// `beta(f)`, summed until a nonzero term past `n > f` drops below `tol`.
/// Terms with `n` divisible by three vanish identically and are skipped.
pub fn beta_series(f: f64, tol: f64) -> f64 {
    let mut sum = 0.0;
    for n in 1..10_000u32 {
        if n % 3 == 0 {
            continue;
        }
        let term = beta_term(f, n);
        sum += term;
        if n as f64 > f.abs() && term.abs() < tol {
            break;
        }
    }
    sum
}

/// `beta(f)` truncated after order `n_max`.
pub fn beta_partial(f: f64, n_max: u32) -> f64 {
    (1..=n_max).map(|n| beta_term(f, n)).sum()
}

pub fn effective_kappa(params: &ModelParams, scheme: DriveScheme) -> f64 {
    if params.nu_d == 0.0 {
        return 0.0;
    }
    match scheme {
        DriveScheme::FrequencyModulated => {
            params.g_v * params.g_v * beta_series(params.f, BETA_TOL) / params.nu_d
        }
        DriveScheme::CouplingModulated => coupling_modulated_kappa(params),
    }
}

/// Settings of one full-versus-effective comparison.
///
/// The residual infidelity is dominated by micromotion: at a fixed final
/// drive phase it scales as `(g_v / nu_d)^2`, but its prefactor varies by an
/// order of magnitude over the drive cycle. Stroboscopic horizons remove
/// that phase dependence from scans.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonOptions {
    pub scheme: DriveScheme,
    /// Evolution time; defaults to the effective transfer time `T`, or one
    /// drive period when the effective coupling vanishes.
    pub horizon: Option<f64>,
    pub tol: f64,
    /// Reverse the drive phase sequence (`2 j pi / 3 -> -2 j pi / 3`).
    pub reverse_chirality: bool,
    /// Atom level of the initial corner state `|sigma; N - e, 0, 0>`.
    pub sigma: Sigma,
    /// Snap the horizon to the nearest whole number of drive periods, so
    /// every comparison ends at the same drive phase as it started.
    pub stroboscopic: bool,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        Self {
            scheme: DriveScheme::FrequencyModulated,
            horizon: None,
            tol: 1e-10,
            reverse_chirality: false,
            sigma: Sigma::G,
            stroboscopic: true,
        }
    }
}

/// Final states of both evolutions and their overlap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub kappa_eff: f64,
    pub horizon: f64,
    /// `1 - |<psi_full|psi_eff>|`.
    pub infidelity: f64,
    pub full: StateVector,
    pub effective: StateVector,
    pub steps_accepted: usize,
}

/// Evolves `|sigma; N - e, 0, 0>` in shell `N` under the drive and under
/// `jc_resonant + chiral(kappa_eff)` (the resonant part only for frequency
/// modulation), and compares the final states.
pub fn compare_with(params: &ModelParams, n: u32, opts: &ComparisonOptions) -> Result<Comparison> {
    params.validate()?;
    if n == 0 && opts.sigma == Sigma::E {
        return Err(Error::InvalidParameter(
            "an excited atom needs N >= 1".into(),
        ));
    }
    let basis = enumerate_shell(n);
    let psi0 = fock_state(&basis, opts.sigma, n - opts.sigma.excitation(), 0, 0)?;
    let sign = if opts.reverse_chirality { -1.0 } else { 1.0 };
    let kappa_eff = sign * effective_kappa(params, opts.scheme);
    let eff_params = ModelParams {
        kappa: kappa_eff,
        ..*params
    };

    let (drive, h_eff): (Box<dyn TimeDependentHamiltonian>, _) = match opts.scheme {
        DriveScheme::FrequencyModulated => {
            let step = sign * 2.0 * PI / 3.0;
            let drive = ModulatedHamiltonian::with_phase_step(params, &basis, step)?;
            let h = jc_resonant(params, &basis)?.add(&chiral_hamiltonian(&eff_params, &basis)?)?;
            (Box::new(drive), h)
        }
        DriveScheme::CouplingModulated => {
            if opts.reverse_chirality {
                return Err(Error::InvalidParameter(
                    "chirality reversal is defined for frequency modulation".into(),
                ));
            }
            let drive = CouplingModulatedHamiltonian::new(params, &basis)?;
            (Box::new(drive), chiral_hamiltonian(&eff_params, &basis)?)
        }
    };

    let period = drive.drive_period();
    let mut horizon = match opts.horizon {
        Some(h) => h,
        None if kappa_eff != 0.0 => eff_params.transfer_time()?,
        None => period.unwrap_or(0.0),
    };
    if let (true, Some(p)) = (opts.stroboscopic, period) {
        horizon = (horizon / p).round() * p;
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "comparison horizon {horizon} must be finite and nonnegative"
        )));
    }
    let run = evolve_timedep(drive.as_ref(), &psi0, &[0.0, horizon], opts.tol)?;
    let full = run.pure_states().expect("Schrodinger evolution")[1].clone();
    let effective = SpectralPropagator::new(&h_eff)?.evolve(&psi0, horizon)?;
    let overlap = full.inner(&effective)?.norm();
    Ok(Comparison {
        kappa_eff,
        horizon,
        infidelity: (1.0 - overlap).clamp(0.0, 1.0),
        full,
        effective,
        steps_accepted: run.diagnostics.steps_accepted,
    })
}

/// Default comparison over the effective transfer time.
pub fn compare_full_vs_effective(
    params: &ModelParams,
    n: u32,
    horizon: Option<f64>,
    tol: f64,
) -> Result<Comparison> {
    compare_with(
        params,
        n,
        &ComparisonOptions {
            horizon,
            tol,
            ..ComparisonOptions::default()
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub nu_d_over_gv: f64,
    pub infidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetReport {
    pub f: f64,
    pub beta: f64,
    pub kappa_eff: f64,
    /// `|J_0(f)|`, the residual static coupling per unit `g_v`.
    pub j0_residual: f64,
    pub comparison: Vec<ScanPoint>,
}

impl FloquetReport {
    /// `nu_d_over_gv,infidelity` table.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .comparison
            .iter()
            .map(|p| vec![p.nu_d_over_gv, p.infidelity])
            .collect();
        write_csv(w, &["nu_d_over_gv", "infidelity"], &rows)
    }
}

/// `beta` and `kappa_eff` at `params`, plus a comparison at each ratio
/// `nu_d / g_v` (with `g_v` fixed). Scan points run in parallel.
pub fn floquet_report(
    params: &ModelParams,
    n: u32,
    ratios: &[f64],
    opts: &ComparisonOptions,
) -> Result<FloquetReport> {
    params.validate()?;
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter(
            "scan ratios must be positive".into(),
        ));
    }
    if !ratios.is_empty() && params.g_v == 0.0 {
        return Err(Error::InvalidParameter("a ratio scan needs g_v > 0".into()));
    }
    let comparison = ratios
        .par_iter()
        .map(|&r| {
            let p = ModelParams {
                nu_d: r * params.g_v,
                ..*params
            };
            compare_with(&p, n, opts).map(|c| ScanPoint {
                nu_d_over_gv: r,
                infidelity: c.infidelity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FloquetReport {
        f: params.f,
        beta: beta_series(params.f, BETA_TOL),
        kappa_eff: effective_kappa(params, opts.scheme),
        j0_residual: bessel_j(0, params.f).abs(),
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisState;
    use crate::bessel::find_j0_zero;
    use crate::hamiltonians::J0_FIRST_ZERO;

    #[test]
    fn beta_at_operating_point() {
        let b = beta_series(find_j0_zero(), 1e-10);
        assert!((b - 0.307).abs() < 1e-3, "{b}");
        assert_eq!(beta_series(0.0, 1e-10), 0.0);
    }

    #[test]
    fn beta_terms_divisible_by_three_vanish() {
        for n in [3, 6, 9, 30] {
            assert_eq!(beta_term(2.4, n), 0.0);
        }
        assert_eq!(beta_partial(2.4, 3), beta_partial(2.4, 2));
    }

    #[test]
    fn beta_converges_quickly() {
        let f = J0_FIRST_ZERO;
        let full = beta_series(f, 1e-14);
        assert!((beta_partial(f, 2) - 0.305).abs() < 2e-3);
        assert!((beta_partial(f, 5) - full).abs() < 5e-4);
        // independent evaluation of the same sum by direct quadrature of J_n
        let quad = |n: u32| {
            let m = 512;
            (0..m)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    (n as f64 * t - f * t.sin()).cos()
                })
                .sum::<f64>()
                / m as f64
        };
        let direct: f64 = (1..40)
            .map(|n| 2.0 * quad(n).powi(2) * (2.0 * PI * n as f64 / 3.0).sin() / n as f64)
            .sum();
        assert!((full - direct).abs() < 1e-12);
    }

    #[test]
    fn beta_is_odd_in_drive_direction() {
        // reversing the phase sequence maps sin(2 n pi / 3) -> -sin(2 n pi / 3)
        let f = J0_FIRST_ZERO;
        let reversed: f64 = (1..60u32)
            .map(|n| 2.0 * bessel_j(n, f).powi(2) * (-2.0 * PI * n as f64 / 3.0).sin() / n as f64)
            .sum();
        assert!((reversed + beta_series(f, 1e-14)).abs() < 1e-14);
    }

    #[test]
    fn effective_kappa_values() {
        let p = ModelParams {
            g_v: 1.0,
            nu_d: 100.0,
            f: J0_FIRST_ZERO,
            ..ModelParams::default()
        };
        let k = effective_kappa(&p, DriveScheme::FrequencyModulated);
        assert!((k - 0.00307).abs() < 1e-5);
        assert!(
            (effective_kappa(&p, DriveScheme::CouplingModulated) - 3f64.sqrt() / 100.0).abs()
                < 1e-16
        );
        let doubled = ModelParams { nu_d: 200.0, ..p };
        assert!(
            (effective_kappa(&doubled, DriveScheme::FrequencyModulated) - k / 2.0).abs() < 1e-16
        );
    }

    #[test]
    fn undriven_comparison_is_exact() {
        let p = ModelParams {
            g_v: 0.0,
            nu_d: 50.0,
            delta: 0.2,
            ..ModelParams::default()
        };
        let c = compare_full_vs_effective(&p, 2, None, 1e-10).unwrap();
        assert!(c.infidelity < 1e-12);
        assert_eq!(c.kappa_eff, 0.0);
    }

    fn landing(c: &Comparison, n: u32) -> [f64; 2] {
        [
            c.full.probability(&BasisState::new(Sigma::G, 0, n, 0)),
            c.full.probability(&BasisState::new(Sigma::G, 0, 0, n)),
        ]
    }

    #[test]
    fn drive_reproduces_chiral_transfer() {
        let p = ModelParams {
            g_v: 1.0,
            nu_d: 100.0,
            ..ModelParams::default()
        };
        let c = compare_full_vs_effective(&p, 1, None, 1e-10).unwrap();
        assert!(c.infidelity < 0.01, "{}", c.infidelity);
        let [to1, to2] = landing(&c, 1);
        assert!(to2 > 0.98 && to1 < 0.01, "{to1} {to2}");
    }

    #[test]
    fn reversed_drive_reverses_transfer() {
        let p = ModelParams {
            g_v: 1.0,
            nu_d: 100.0,
            ..ModelParams::default()
        };
        let opts = ComparisonOptions {
            reverse_chirality: true,
            ..ComparisonOptions::default()
        };
        let c = compare_with(&p, 1, &opts).unwrap();
        assert!(c.kappa_eff < 0.0);
        assert!(c.infidelity < 0.01);
        let [to1, to2] = landing(&c, 1);
        assert!(to1 > 0.98 && to2 < 0.01, "{to1} {to2}");
    }

    #[test]
    fn coupling_modulation_reproduces_chiral_transfer() {
        let p = ModelParams {
            g_v: 1.0,
            nu_d: 100.0,
            ..ModelParams::default()
        };
        let opts = ComparisonOptions {
            scheme: DriveScheme::CouplingModulated,
            ..ComparisonOptions::default()
        };
        let c = compare_with(&p, 1, &opts).unwrap();
        assert!(c.infidelity < 0.01, "{}", c.infidelity);
    }

    #[test]
    fn infidelity_grows_with_photon_number() {
        let p = ModelParams {
            g_v: 1.0,
            nu_d: 50.0,
            ..ModelParams::default()
        };
        let inf: Vec<f64> = [1, 2, 4]
            .iter()
            .map(|&n| {
                compare_full_vs_effective(&p, n, None, 1e-10)
                    .unwrap()
                    .infidelity
            })
            .collect();
        assert!(inf[0] < inf[1] && inf[1] < inf[2], "{inf:?}");
    }

    #[test]
    fn stroboscopic_scan_follows_inverse_square_law() {
        let inf: Vec<f64> = [50.0, 100.0]
            .iter()
            .map(|&r| {
                let p = ModelParams {
                    g_v: 1.0,
                    nu_d: r,
                    ..ModelParams::default()
                };
                let c = compare_full_vs_effective(&p, 1, None, 1e-10).unwrap();
                let periods = c.horizon * r / (2.0 * PI);
                assert!((periods - periods.round()).abs() < 1e-9);
                c.infidelity
            })
            .collect();
        let ratio = inf[0] / inf[1];
        assert!((ratio - 4.0).abs() < 0.1, "{inf:?}");
    }

    #[test]
    fn raw_horizon_is_kept_on_request() {
        let p = ModelParams {
            g_v: 1.0,
            nu_d: 40.0,
            ..ModelParams::default()
        };
        let opts = ComparisonOptions {
            horizon: Some(1.234),
            stroboscopic: false,
            ..ComparisonOptions::default()
        };
        assert_eq!(compare_with(&p, 1, &opts).unwrap().horizon, 1.234);
    }

    #[test]
    fn report_serializes() {
        let p = ModelParams {
            g_v: 1.0,
            ..ModelParams::default()
        };
        let r = floquet_report(&p, 1, &[25.0, 50.0], &ComparisonOptions::default()).unwrap();
        assert_eq!(r.comparison.len(), 2);
        assert!(r.comparison[1].infidelity < r.comparison[0].infidelity);
        assert!(r.j0_residual < 1e-15);
        let back: FloquetReport =
            serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("nu_d_over_gv,infidelity\n2.5000000000000000e1,"));
        assert!(floquet_report(&p, 1, &[0.0], &ComparisonOptions::default()).is_err());
    }
}
