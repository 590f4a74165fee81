//! Observables computed from states and trajectories: fidelities, site
//! occupation snapshots, participation ratios, corner arrival, the
//! three density-matrix curves of the dissipative transfer run, and
//! plaquette fluxes of the lattice gauge field.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisState, Sigma};
use crate::dynamics::{
    build_collapse_ops, evolve_exact, lindblad_evolve, linspace, DissipationParams,
    EvolutionResult, Trajectory,
};
use crate::error::{Error, Result};
use crate::hamiltonians::{chiral_hamiltonian, ModelParams};
use crate::operator::Operator;
use crate::state::{DensityMatrix, StateVector};
use crate::{enumerate_truncated, C64};

/// `|<a|b>|`, clamped to `[0, 1]`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm().min(1.0))
}

/// `sqrt(<psi|rho|psi>)`, clamped to `[0, 1]`.
pub fn fidelity_mixed(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    crate::operator::check_basis(rho.basis(), psi.basis())?;
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    let value = (v.adjoint() * rho.matrix() * &v)[(0, 0)].re;
    Ok(value.max(0.0).sqrt().min(1.0))
}

/// Reduced density matrix of the atom, indexed `(g, e)`.
pub fn atom_reduced_state(psi: &StateVector) -> Matrix2<C64> {
    let basis = psi.basis();
    let mut rho = Matrix2::zeros();
    for (i, s) in basis.states().iter().enumerate() {
        let a = psi.amplitudes()[i];
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let r = s.sigma.excitation() as usize;
        for sigma in [Sigma::G, Sigma::E] {
            let partner = s.with_sigma(sigma);
            let b = psi.amplitude(&partner);
            rho[(r, sigma.excitation() as usize)] += a * b.conj();
        }
    }
    rho
}

/// `Tr(rho_atom^2)`.
pub fn atom_purity(psi: &StateVector) -> f64 {
    let rho = atom_reduced_state(psi);
    (rho * rho).trace().re
}

/// Best fidelity of a state against the family of targets
/// `(|A> + e^{i phi} |B>) / n(phi)` on the photons, with the atom traced out.
///
/// `x[s] = <A, s|psi>` and `y[s] = <B, s|psi>` for each atom level `s`, and
/// `overlap = <A|B>` (real). Returns the fidelity `sqrt(<T|rho_ph|T>)`
/// maximized over `phi` together with the maximizing `phi` in `(-pi, pi]`.
pub fn two_branch_fidelity(x: &[C64], y: &[C64], overlap: f64) -> (f64, f64) {
    let p: f64 = x.iter().chain(y).map(|z| z.norm_sqr()).sum();
    let c: C64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    if overlap == 0.0 {
        return (((p / 2.0) + c.norm()).max(0.0).sqrt().min(1.0), c.arg());
    }
    let f2 = |phi: f64| {
        let den = 2.0 + 2.0 * overlap * phi.cos();
        if den <= 1e-300 {
            return 0.0;
        }
        (p + 2.0 * (C64::from_polar(1.0, -phi) * c).re) / den
    };
    let grid = 720;
    let (mut best, mut best_val) = (0.0, f64::NEG_INFINITY);
    for k in 0..grid {
        let phi = -PI + 2.0 * PI * (k as f64 + 0.5) / grid as f64;
        let v = f2(phi);
        if v > best_val {
            best = phi;
            best_val = v;
        }
    }
    let step = 2.0 * PI / grid as f64;
    let (mut lo, mut hi) = (best - step, best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f2(m1) < f2(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let phi = 0.5 * (lo + hi);
    let phi = if phi > PI {
        phi - 2.0 * PI
    } else if phi <= -PI {
        phi + 2.0 * PI
    } else {
        phi
    };
    (f2(phi).max(0.0).sqrt().min(1.0), phi)
}

/// Occupation probability of one lattice site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteProbability {
    pub sigma: Sigma,
    pub n: [u32; 3],
    pub p: f64,
}

/// Site probabilities at one instant, in basis order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSnapshot {
    pub t: f64,
    pub sites: Vec<SiteProbability>,
}

impl LatticeSnapshot {
    pub fn from_probabilities(t: f64, basis: &Basis, p: &[f64]) -> Self {
        let sites = basis
            .states()
            .iter()
            .zip(p)
            .map(|(s, &p)| SiteProbability {
                sigma: s.sigma,
                n: s.occ,
                p,
            })
            .collect();
        Self { t, sites }
    }

    pub fn total(&self) -> f64 {
        self.sites.iter().map(|s| s.p).sum()
    }

    pub fn probability(&self, s: &BasisState) -> f64 {
        self.sites
            .iter()
            .find(|x| x.sigma == s.sigma && x.n == s.occ)
            .map_or(0.0, |x| x.p)
    }

    /// Most probable site.
    pub fn peak(&self) -> Option<BasisState> {
        self.sites
            .iter()
            .max_by(|a, b| a.p.total_cmp(&b.p))
            .map(|s| BasisState {
                sigma: s.sigma,
                occ: s.n,
            })
    }
}

pub fn lattice_snapshot(t: f64, psi: &StateVector) -> LatticeSnapshot {
    LatticeSnapshot::from_probabilities(t, psi.basis(), &psi.probabilities())
}

pub fn lattice_snapshot_mixed(t: f64, rho: &DensityMatrix) -> LatticeSnapshot {
    LatticeSnapshot::from_probabilities(t, rho.basis(), &rho.populations())
}

/// One snapshot per time point of a trajectory.
pub fn snapshots(result: &EvolutionResult) -> Vec<LatticeSnapshot> {
    let Some(basis) = result.basis() else {
        return Vec::new();
    };
    (0..result.len())
        .map(|k| {
            LatticeSnapshot::from_probabilities(result.times[k], basis, &result.probabilities(k))
        })
        .collect()
}

/// Inverse participation ratio `sum_i p_i^2` of site probabilities.
pub fn ipr_of(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum()
}

pub fn ipr(psi: &StateVector) -> f64 {
    ipr_of(&psi.probabilities())
}

/// Where and when a transported excitation arrives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerArrival {
    pub time: f64,
    /// Cavity holding every photon at the arrival corner.
    pub cavity: usize,
    pub corner: BasisState,
    pub probability: f64,
}

/// First corner (other than the initially occupied one) reached by the
/// `sigma` branch.
///
/// The corner whose probability first exceeds one half is selected and its
/// arrival time is the grid argmax of its probability over that visit. If no
/// corner exceeds one half, the global grid argmax over corners is used.
pub fn corner_arrival(result: &EvolutionResult, sigma: Sigma) -> Result<CornerArrival> {
    let basis = result
        .basis()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let mut photons = None;
    for s in basis.states().iter().filter(|s| s.sigma == sigma) {
        photons = Some(photons.map_or(s.photons(), |p: u32| p.max(s.photons())));
    }
    let photons = photons.ok_or_else(|| {
        Error::InvalidParameter(format!("no {} sites in {}", sigma.label(), basis.kind()))
    })?;
    if photons == 0 {
        return Err(Error::InvalidParameter(
            "corner arrival needs at least one photon".into(),
        ));
    }
    let corners: Vec<(usize, BasisState)> = (0..3)
        .map(|j| {
            let mut occ = [0; 3];
            occ[j] = photons;
            (j, BasisState { sigma, occ })
        })
        .collect();
    let idx: Vec<usize> = corners
        .iter()
        .map(|(_, s)| basis.require(s))
        .collect::<Result<_>>()?;
    let probs: Vec<Vec<f64>> = (0..result.len())
        .map(|k| {
            let p = result.probabilities(k);
            idx.iter().map(|&i| p[i]).collect()
        })
        .collect();
    if probs.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let origin = (0..3)
        .max_by(|&a, &b| probs[0][a].total_cmp(&probs[0][b]))
        .unwrap();
    let candidates: Vec<usize> = (0..3).filter(|&c| c != origin).collect();
    let first = (0..probs.len()).find_map(|k| {
        candidates
            .iter()
            .copied()
            .find(|&c| probs[k][c] > 0.5)
            .map(|c| (k, c))
    });
    let (k_best, c_best) = match first {
        Some((start, c)) => {
            let end = (start..probs.len())
                .find(|&k| probs[k][c] <= 0.5)
                .unwrap_or(probs.len());
            let k = (start..end)
                .max_by(|&a, &b| probs[a][c].total_cmp(&probs[b][c]).then(b.cmp(&a)))
                .unwrap();
            (k, c)
        }
        None => {
            let mut best = (0, candidates[0]);
            for k in 0..probs.len() {
                for &c in &candidates {
                    if probs[k][c] > probs[best.0][best.1] {
                        best = (k, c);
                    }
                }
            }
            best
        }
    };
    Ok(CornerArrival {
        time: result.times[k_best],
        cavity: corners[c_best].0,
        corner: corners[c_best].1,
        probability: probs[k_best][c_best],
    })
}

/// The three density-matrix elements tracked during the dissipative
/// transfer of `(|g;N,0,0> - |e;N-1,0,0>)/sqrt(2)`: the populations of
/// `|e;0,N-1,0>` and `|g;0,0,N>` and the modulus of their coherence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig3Curves {
    pub times: Vec<f64>,
    pub p_e090: Vec<f64>,
    pub p_g0010: Vec<f64>,
    pub coh: Vec<f64>,
}

pub const FIG3_HEADER: [&str; 4] = ["t", "p_e090", "p_g0010", "coh"];

impl Fig3Curves {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the sample closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<usize> {
        (0..self.times.len()).min_by(|&a, &b| {
            (self.times[a] - t)
                .abs()
                .total_cmp(&(self.times[b] - t).abs())
        })
    }

    /// Largest violation of `coh^2 <= p_e090 p_g0010` over all samples.
    pub fn cauchy_schwarz_violation(&self) -> f64 {
        (0..self.len())
            .map(|k| self.coh[k].powi(2) - self.p_e090[k] * self.p_g0010[k])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|k| vec![self.times[k], self.p_e090[k], self.p_g0010[k], self.coh[k]])
            .collect();
        crate::io::write_csv(w, &FIG3_HEADER, &rows)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (header, rows) = crate::io::read_csv(r)?;
        if header != FIG3_HEADER {
            return Err(Error::InvalidParameter(format!(
                "unexpected curve header {header:?}"
            )));
        }
        let col = |j: usize| rows.iter().map(|r| r[j]).collect();
        Ok(Self {
            times: col(0),
            p_e090: col(1),
            p_g0010: col(2),
            coh: col(3),
        })
    }
}

/// Extracts the curves from a pure or mixed trajectory with `n` excitations
/// (`n = 10` gives the named elements).
pub fn fig3_observables(result: &EvolutionResult, n: u32) -> Result<Fig3Curves> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "the tracked elements need n >= 1".into(),
        ));
    }
    let basis = result
        .basis()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let e = basis.require(&BasisState::new(Sigma::E, 0, n - 1, 0))?;
    let g = basis.require(&BasisState::new(Sigma::G, 0, 0, n))?;
    let mut curves = Fig3Curves {
        times: result.times.clone(),
        p_e090: vec![],
        p_g0010: vec![],
        coh: vec![],
    };
    let mut push = |pe: f64, pg: f64, c: f64| {
        curves.p_e090.push(pe);
        curves.p_g0010.push(pg);
        curves.coh.push(c);
    };
    match &result.states {
        Trajectory::Pure(states) => {
            for psi in states {
                let (ae, ag) = (psi.amplitudes()[e], psi.amplitudes()[g]);
                push(ae.norm_sqr(), ag.norm_sqr(), (ag * ae.conj()).norm());
            }
        }
        Trajectory::Mixed(states) => {
            for rho in states {
                let m = rho.matrix();
                push(m[(e, e)].re, m[(g, g)].re, m[(g, e)].norm());
            }
        }
    }
    Ok(curves)
}

/// Integrator tolerance of the dissipative transfer run; tight enough to keep
/// every eigenvalue above `-1e-7` at `N = 10`.
pub const FIG3_TOL: f64 = 1e-9;

/// Settings of the dissipative transfer run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3Setup {
    pub n: u32,
    /// Transfer time `T`; `kappa` follows from it.
    pub transfer_time: f64,
    pub dissipation: DissipationParams,
    /// Samples on `[0, 2T]`.
    pub samples: usize,
    pub tol: f64,
}

impl Default for Fig3Setup {
    /// `N = 10`, `T = 80 ns`, relaxation 650 ns, dephasing 150 ns, cavity
    /// lifetime 3.47 us.
    fn default() -> Self {
        Self {
            n: 10,
            transfer_time: 80.0,
            dissipation: DissipationParams::transmon_ns(),
            samples: 201,
            tol: FIG3_TOL,
        }
    }
}

/// Output of [`run_fig3`].
#[derive(Clone, Debug)]
pub struct Fig3Run {
    pub curves: Fig3Curves,
    pub result: EvolutionResult,
}

impl Fig3Setup {
    pub fn params(&self) -> ModelParams {
        ModelParams::with_transfer_time(self.transfer_time)
    }

    pub fn basis(&self) -> Arc<Basis> {
        enumerate_truncated(self.n)
    }

    /// `(|g;N,0,0> - |e;N-1,0,0>)/sqrt(2)`.
    pub fn initial_state(&self) -> Result<StateVector> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::superposition(
            &self.basis(),
            &[
                (BasisState::new(Sigma::G, self.n, 0, 0), C64::new(h, 0.0)),
                (
                    BasisState::new(Sigma::E, self.n - 1, 0, 0),
                    C64::new(-h, 0.0),
                ),
            ],
        )
    }

    pub fn times(&self) -> Vec<f64> {
        linspace(2.0 * self.transfer_time, self.samples)
    }
}

/// Evolves the initial superposition under the chiral Hamiltonian on the
/// truncated basis, with the master equation when `dissipative` and any
/// channel is present, exactly otherwise.
pub fn run_fig3(setup: &Fig3Setup, dissipative: bool) -> Result<Fig3Run> {
    if setup.n == 0 || !(setup.transfer_time > 0.0) {
        return Err(Error::InvalidParameter(
            "the transfer run needs n >= 1 and T > 0".into(),
        ));
    }
    let basis = setup.basis();
    let h = chiral_hamiltonian(&setup.params(), &basis)?;
    let psi0 = setup.initial_state()?;
    let times = setup.times();
    let result = if dissipative && !setup.dissipation.is_empty() {
        let collapse = build_collapse_ops(&basis, &setup.dissipation)?;
        lindblad_evolve(&h, &collapse, &psi0.to_density(), &times, setup.tol)?
    } else {
        evolve_exact(&h, &psi0, &times)?
    };
    let curves = fig3_observables(&result, setup.n)?;
    Ok(Fig3Run { curves, result })
}

/// Orientation class of an elementary lattice triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleKind {
    /// Sites `base + e_0, base + e_1, base + e_2`.
    Up,
    /// Sites `base - e_0, base - e_1, base - e_2`.
    Down,
}

/// Elementary plaquette of one atom sublattice, traversed `0 -> 1 -> 2 -> 0`.
///
/// Both kinds list their sites with the same geometric orientation on the
/// triangular lattice, so their fluxes are directly comparable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plaquette {
    pub sigma: Sigma,
    pub kind: TriangleKind,
    pub base: [u32; 3],
    pub sites: [BasisState; 3],
}

/// Every elementary triangle of the `sigma` sublattice holding `photons`
/// photons.
pub fn plaquettes(sigma: Sigma, photons: u32) -> Vec<Plaquette> {
    let mut out = Vec::new();
    let comps = |p: u32| {
        (0..=p)
            .rev()
            .flat_map(move |a| (0..=p - a).rev().map(move |b| [a, b, p - a - b]))
    };
    if photons >= 1 {
        for base in comps(photons - 1) {
            let sites = std::array::from_fn(|j| {
                let mut occ = base;
                occ[j] += 1;
                BasisState { sigma, occ }
            });
            out.push(Plaquette {
                sigma,
                kind: TriangleKind::Up,
                base,
                sites,
            });
        }
    }
    for base in comps(photons + 1).filter(|b| b.iter().all(|&n| n >= 1)) {
        let sites = std::array::from_fn(|j| {
            let mut occ = base;
            occ[j] -= 1;
            BasisState { sigma, occ }
        });
        out.push(Plaquette {
            sigma,
            kind: TriangleKind::Down,
            base,
            sites,
        });
    }
    out
}

/// Phase of `<s1|H|s0> <s2|H|s1> <s0|H|s2>` in `(-pi, pi]`.
pub fn plaquette_flux(h: &Operator, sites: &[BasisState; 3]) -> Result<f64> {
    let basis = h.cols();
    let idx: Vec<usize> = sites
        .iter()
        .map(|s| basis.require(s))
        .collect::<Result<_>>()?;
    let mut product = C64::new(1.0, 0.0);
    for k in 0..3 {
        let element = h.get(idx[(k + 1) % 3], idx[k]);
        if element.norm() == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "no hopping from {} to {}",
                sites[k],
                sites[(k + 1) % 3]
            )));
        }
        product *= element;
    }
    let phase = product.arg();
    Ok(if phase <= -PI {
        phase + 2.0 * PI
    } else {
        phase
    })
}

/// One row of a flux table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxEntry {
    pub plaquette: Plaquette,
    pub flux: f64,
}

/// Fluxes of every plaquette of both sublattices of a shell Hamiltonian.
pub fn flux_table(h: &Operator) -> Result<Vec<FluxEntry>> {
    let basis = h.cols();
    let n = match basis.kind() {
        crate::basis::BasisKind::Shell(n) => n,
        other => {
            return Err(Error::UnsupportedBasis(format!(
                "flux tables need a shell basis, got {other}"
            )))
        }
    };
    let mut out = Vec::new();
    for sigma in [Sigma::G, Sigma::E] {
        let Some(photons) = n.checked_sub(sigma.excitation()) else {
            continue;
        };
        for plaquette in plaquettes(sigma, photons) {
            let flux = plaquette_flux(h, &plaquette.sites)?;
            out.push(FluxEntry { plaquette, flux });
        }
    }
    Ok(out)
}

pub const FLUX_HEADER: [&str; 6] = ["sigma", "kind", "n0", "n1", "n2", "flux"];

/// CSV table `sigma,kind,n0,n1,n2,flux` keyed by the triangle base site.
pub fn write_flux_csv<W: Write>(mut w: W, table: &[FluxEntry]) -> Result<()> {
    writeln!(w, "{}", FLUX_HEADER.join(","))?;
    for e in table {
        let kind = match e.plaquette.kind {
            TriangleKind::Up => "up",
            TriangleKind::Down => "down",
        };
        let [a, b, c] = e.plaquette.base;
        writeln!(
            w,
            "{},{kind},{a},{b},{c},{}",
            e.plaquette.sigma.label(),
            crate::io::format_float(e.flux)
        )?;
    }
    Ok(())
}
