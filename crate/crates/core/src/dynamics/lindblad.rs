//! Lindblad master equation
//! `d rho/dt = -i[H, rho] + sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2)`.
//!
//! The right-hand side is evaluated as `B + B^dag + sum_k L_k (L_k rho)^dag`
//! with `B = -i H_eff rho` and `H_eff = H - (i/2) sum_k L_k^dag L_k`, which is
//! Hermitian by construction. Density matrices are flattened column-major and
//! sparse-times-dense products run in parallel over columns.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ode::{integrate, OdeOptions};
use super::{Diagnostics, EvolutionResult, Trajectory};
use crate::basis::{Basis, BasisKind};
use crate::error::{Error, Result};
use crate::ladder::{annihilation, atom_lower, pauli_z};
use crate::operator::{check_basis, Operator};
use crate::state::DensityMatrix;
use crate::C64;

/// Default integrator tolerance for master-equation runs.
pub const LINDBLAD_TOL: f64 = 1e-7;

/// How the qubit dephasing time is interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DephasingConvention {
    /// The time is the pure-dephasing constant: coherences decay as
    /// `exp(-t / tphi)` without relaxation.
    #[default]
    Pure,
    /// The time is the total `T2`; pure dephasing follows from
    /// `1/tphi = 1/T2 - 1/(2 T1)`.
    TotalT2,
}

/// Relaxation and dephasing times. Absent times contribute no channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationParams {
    pub t1_qubit: Option<f64>,
    pub tphi_qubit: Option<f64>,
    pub t_cavity: Option<f64>,
    #[serde(default)]
    pub dephasing: DephasingConvention,
}

impl DissipationParams {
    pub fn none() -> Self {
        Self::default()
    }

    /// Atom relaxation 650 ns, dephasing 150 ns, cavity relaxation 3.47 us,
    /// with times in ns.
    pub fn transmon_ns() -> Self {
        Self {
            t1_qubit: Some(650.0),
            tphi_qubit: Some(150.0),
            t_cavity: Some(3470.0),
            dephasing: DephasingConvention::Pure,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.t1_qubit.is_none() && self.tphi_qubit.is_none() && self.t_cavity.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t1_qubit", self.t1_qubit),
            ("tphi_qubit", self.tphi_qubit),
            ("t_cavity", self.t_cavity),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pure-dephasing time after applying the convention (`None` when the
    /// channel is absent).
    pub fn pure_dephasing_time(&self) -> Result<Option<f64>> {
        self.validate()?;
        let Some(t) = self.tphi_qubit else {
            return Ok(None);
        };
        match (self.dephasing, self.t1_qubit) {
            (DephasingConvention::Pure, _) | (DephasingConvention::TotalT2, None) => Ok(Some(t)),
            (DephasingConvention::TotalT2, Some(t1)) => {
                let rate = 1.0 / t - 0.5 / t1;
                if rate < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "T2 = {t} exceeds 2 T1 = {}",
                        2.0 * t1
                    )));
                }
                Ok(if rate == 0.0 { None } else { Some(1.0 / rate) })
            }
        }
    }
}

/// `sqrt(1/t1) sigma^-`, `sqrt(1/(2 tphi)) sigma_z`, `sqrt(1/t_cavity) a_j`
/// for j = 0, 1, 2, in that order, omitting absent channels.
pub fn build_collapse_ops(basis: &Arc<Basis>, d: &DissipationParams) -> Result<Vec<Operator>> {
    if !matches!(basis.kind(), BasisKind::Truncated(_)) {
        return Err(Error::UnsupportedBasis(format!(
            "collapse operators need a truncated basis, got {}",
            basis.kind()
        )));
    }
    let mut ops = Vec::new();
    if let Some(t1) = d.t1_qubit {
        d.validate()?;
        ops.push(atom_lower(basis).scale_real((1.0 / t1).sqrt()));
    }
    if let Some(tphi) = d.pure_dephasing_time()? {
        ops.push(pauli_z(basis).scale_real((0.5 / tphi).sqrt()));
    }
    if let Some(tc) = d.t_cavity {
        for j in 0..3 {
            ops.push(annihilation(basis, j)?.scale_real((1.0 / tc).sqrt()));
        }
    }
    Ok(ops)
}

/// Compressed sparse rows over local block indices.
struct LocalCsr {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl LocalCsr {
    fn from_entries(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        for &(r, _, _) in &entries {
            indptr[r + 1] += 1;
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let indices = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Self {
            ncols,
            indptr,
            indices,
            values,
        }
    }

    fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    /// `out (+)= A M` for column-major `M` with `k` columns.
    fn mul_dense(&self, m: &[C64], k: usize, out: &mut [C64], add: bool) {
        let (nr, nc) = (self.nrows(), self.ncols);
        for c in 0..k {
            let src = &m[c * nc..(c + 1) * nc];
            let dst = &mut out[c * nr..(c + 1) * nr];
            for (r, o) in dst.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for q in self.indptr[r]..self.indptr[r + 1] {
                    acc += self.values[q] * src[self.indices[q]];
                }
                if add {
                    *o += acc;
                } else {
                    *o = acc;
                }
            }
        }
    }
}

fn operator_to_local(op: &Operator) -> LocalCsr {
    LocalCsr::from_entries(op.nrows(), op.ncols(), op.triplets().collect())
}

/// `out = M^dag` for a column-major `r x c` matrix.
fn adjoint_into(m: &[C64], r: usize, c: usize, out: &mut [C64]) {
    for j in 0..c {
        for i in 0..r {
            out[i * c + j] = m[j * r + i].conj();
        }
    }
}

/// Writes `-i (B - B^dag)` for the column-major square `B` into `out`.
fn commutator_part(b: &[C64], n: usize, out: &mut [C64]) {
    for c in 0..n {
        for r in 0..n {
            let d = b[c * n + r] - b[r * n + c].conj();
            out[c * n + r] = C64::new(d.im, -d.re);
        }
    }
}

/// Dissipator pieces `L` mapping block `src` to block `dst`.
struct Jump {
    dst: usize,
    src: usize,
    op: LocalCsr,
}

/// Layout of a density matrix that stays block diagonal in the total
/// excitation: every block is stored column-major, back to back.
struct BlockPlan {
    blocks: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    h_eff: Vec<LocalCsr>,
    jumps: Vec<Jump>,
}

impl BlockPlan {
    /// `None` when `h_eff`, a collapse operator or `rho0` mixes blocks in a
    /// way the block layout cannot represent.
    fn new(
        basis: &Basis,
        h_eff: &Operator,
        collapse: &[Operator],
        rho0: &DMatrix<C64>,
    ) -> Option<Self> {
        let blocks = basis.excitation_blocks();
        if blocks.len() < 2 {
            return None;
        }
        let mut owner = vec![(0, 0); basis.dim()];
        for (b, idx) in blocks.iter().enumerate() {
            for (k, &i) in idx.iter().enumerate() {
                owner[i] = (b, k);
            }
        }
        for c in 0..rho0.ncols() {
            for r in 0..rho0.nrows() {
                if owner[r].0 != owner[c].0 && rho0[(r, c)] != C64::new(0.0, 0.0) {
                    return None;
                }
            }
        }
        let mut h_entries: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); blocks.len()];
        for (r, c, v) in h_eff.triplets() {
            if owner[r].0 != owner[c].0 {
                return None;
            }
            h_entries[owner[r].0].push((owner[r].1, owner[c].1, v));
        }
        let h_eff = h_entries
            .into_iter()
            .enumerate()
            .map(|(b, e)| LocalCsr::from_entries(blocks[b].len(), blocks[b].len(), e))
            .collect();
        let mut jumps = Vec::new();
        for l in collapse {
            let mut target: Vec<Option<usize>> = vec![None; blocks.len()];
            let mut entries: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); blocks.len()];
            for (r, c, v) in l.triplets() {
                let (dst, src) = (owner[r].0, owner[c].0);
                match target[src] {
                    Some(t) if t != dst => return None,
                    _ => target[src] = Some(dst),
                }
                entries[src].push((owner[r].1, owner[c].1, v));
            }
            for (src, e) in entries.into_iter().enumerate() {
                if let Some(dst) = target[src] {
                    let op = LocalCsr::from_entries(blocks[dst].len(), blocks[src].len(), e);
                    jumps.push(Jump { dst, src, op });
                }
            }
        }
        let mut offsets = vec![0];
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.len() * b.len());
        }
        Some(Self {
            blocks,
            offsets,
            h_eff,
            jumps,
        })
    }

    fn pack(&self, m: &DMatrix<C64>) -> Vec<C64> {
        let mut out = Vec::with_capacity(*self.offsets.last().unwrap());
        for idx in &self.blocks {
            for &c in idx {
                for &r in idx {
                    out.push(m[(r, c)]);
                }
            }
        }
        out
    }

    fn unpack(&self, y: &[C64], n: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(n, n);
        for (b, idx) in self.blocks.iter().enumerate() {
            let d = idx.len();
            let data = &y[self.offsets[b]..self.offsets[b + 1]];
            for (ci, &c) in idx.iter().enumerate() {
                for (ri, &r) in idx.iter().enumerate() {
                    m[(r, c)] = data[ci * d + ri];
                }
            }
        }
        m
    }

    fn rhs(&self, y: &[C64], out: &mut [C64]) {
        let zero = C64::new(0.0, 0.0);
        let blocks: Vec<(usize, &mut [C64])> = {
            let mut rest = out;
            let mut v = Vec::with_capacity(self.blocks.len());
            for b in 0..self.blocks.len() {
                let (head, tail) = rest.split_at_mut(self.offsets[b + 1] - self.offsets[b]);
                v.push((b, head));
                rest = tail;
            }
            v
        };
        blocks.into_par_iter().for_each(|(b, dst)| {
            let d = self.blocks[b].len();
            let rho = &y[self.offsets[b]..self.offsets[b + 1]];
            let mut tmp = vec![zero; d * d];
            self.h_eff[b].mul_dense(rho, d, &mut tmp, false);
            commutator_part(&tmp, d, dst);
            for jump in self.jumps.iter().filter(|j| j.dst == b) {
                let s = self.blocks[jump.src].len();
                let src = &y[self.offsets[jump.src]..self.offsets[jump.src + 1]];
                // L rho_src is d x s; its adjoint is s x d
                let mut x = vec![zero; d * s];
                jump.op.mul_dense(src, s, &mut x, false);
                let mut xa = vec![zero; s * d];
                adjoint_into(&x, d, s, &mut xa);
                jump.op.mul_dense(&xa, d, dst, true);
            }
        });
    }
}

/// Dense right-hand side over the full column-major matrix.
struct DensePlan {
    h_eff: LocalCsr,
    collapse: Vec<LocalCsr>,
    n: usize,
}

impl DensePlan {
    fn rhs(&self, y: &[C64], out: &mut [C64]) {
        let n = self.n;
        let zero = C64::new(0.0, 0.0);
        let mut tmp = vec![zero; n * n];
        let mut tmp2 = vec![zero; n * n];
        self.h_eff.mul_dense(y, n, &mut tmp, false);
        commutator_part(&tmp, n, out);
        for l in &self.collapse {
            l.mul_dense(y, n, &mut tmp, false);
            adjoint_into(&tmp, n, n, &mut tmp2);
            l.mul_dense(&tmp2, n, out, true);
        }
    }
}

fn symmetrize(rho: &mut DMatrix<C64>) -> f64 {
    let n = rho.nrows();
    let mut residual = 0.0f64;
    for c in 0..n {
        for r in 0..=c {
            let (a, b) = (rho[(r, c)], rho[(c, r)].conj());
            residual = residual.max((a - b).norm());
            let avg = 0.5 * (a + b);
            rho[(r, c)] = avg;
            rho[(c, r)] = avg.conj();
        }
    }
    residual
}

/// Integrates the master equation from `rho0` at `times[0]` through every
/// entry of `times`.
///
/// When the Hamiltonian conserves the total excitation, every collapse
/// operator shifts it by a fixed amount and `rho0` has no coherences between
/// excitation shells, only the diagonal shell blocks are propagated.
/// Each output state is symmetrized; the largest pre-symmetrization residual
/// is reported. Trace drift beyond `10 tol` or an eigenvalue below
/// `-100 tol` flags the result.
pub fn lindblad_evolve(
    h: &Operator,
    collapse: &[Operator],
    rho0: &DensityMatrix,
    times: &[f64],
    tol: f64,
) -> Result<EvolutionResult> {
    evolve_with(h, collapse, rho0, times, tol, true)
}

fn evolve_with(
    h: &Operator,
    collapse: &[Operator],
    rho0: &DensityMatrix,
    times: &[f64],
    tol: f64,
    allow_blocks: bool,
) -> Result<EvolutionResult> {
    h.require_hermitian()?;
    let basis = Arc::clone(rho0.basis());
    check_basis(h.cols(), &basis)?;
    let mut h_eff = h.clone();
    for l in collapse {
        l.require_square()?;
        check_basis(l.cols(), &basis)?;
        let ldl = l.adjoint().matmul(l)?;
        h_eff = h_eff.sub(&ldl.scale(C64::new(0.0, 0.5)))?;
    }
    let n = basis.dim();
    let plan = if allow_blocks {
        BlockPlan::new(&basis, &h_eff, collapse, rho0.matrix())
    } else {
        None
    };

    let mut states = Vec::with_capacity(times.len());
    let mut diag = Diagnostics::default();
    let mut emit = |m: DMatrix<C64>| {
        let mut m = m;
        diag.hermiticity_residual = diag.hermiticity_residual.max(symmetrize(&mut m));
        states.push(DensityMatrix::from_matrix(Arc::clone(&basis), m));
    };
    let stats = match &plan {
        Some(plan) => integrate(
            |_, y, out| plan.rhs(y, out),
            plan.pack(rho0.matrix()),
            times,
            OdeOptions::new(tol),
            |_, y| emit(plan.unpack(y, n)),
        )?,
        None => {
            let dense = DensePlan {
                h_eff: operator_to_local(&h_eff),
                collapse: collapse.iter().map(operator_to_local).collect(),
                n,
            };
            integrate(
                |_, y, out| dense.rhs(y, out),
                rho0.matrix().as_slice().to_vec(),
                times,
                OdeOptions::new(tol),
                |_, y| emit(DMatrix::from_column_slice(n, n, y)),
            )?
        }
    };
    let trace0 = rho0.trace();
    let mut min_eig = f64::INFINITY;
    for rho in &states {
        diag.trace_drift = diag.trace_drift.max((rho.trace() - trace0).abs());
        min_eig = min_eig.min(rho.min_eigenvalue());
    }
    diag.min_eigenvalue = if states.is_empty() {
        None
    } else {
        Some(min_eig)
    };
    diag.steps_accepted = stats.accepted;
    diag.steps_rejected = stats.rejected;
    if diag.trace_drift > 10.0 * tol {
        diag.flag(format!(
            "trace drift {:.3e} exceeds {:.1e}",
            diag.trace_drift,
            10.0 * tol
        ));
    }
    if min_eig < -100.0 * tol {
        diag.flag(format!(
            "eigenvalue {min_eig:.3e} below {:.1e}",
            -100.0 * tol
        ));
    }
    if diag.hermiticity_residual > 1e-10 {
        diag.flag(format!(
            "hermiticity residual {:.3e} before symmetrization",
            diag.hermiticity_residual
        ));
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        states: Trajectory::Mixed(states),
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_truncated, BasisState, Sigma};
    use crate::hamiltonians::{chiral_hamiltonian, ModelParams};
    use crate::state::StateVector;

    #[test]
    fn block_and_dense_paths_agree() {
        let basis = enumerate_truncated(3);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(0.9), &basis).unwrap();
        let d = DissipationParams {
            t1_qubit: Some(4.0),
            tphi_qubit: Some(3.0),
            t_cavity: Some(5.0),
            ..DissipationParams::none()
        };
        let ops = build_collapse_ops(&basis, &d).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::superposition(
            &basis,
            &[
                (BasisState::new(Sigma::G, 3, 0, 0), C64::new(s, 0.0)),
                (BasisState::new(Sigma::E, 2, 0, 0), C64::new(-s, 0.0)),
            ],
        )
        .unwrap();
        let rho0 = psi.to_density();
        let times = [0.0, 0.5, 1.5, 3.0];
        assert!(BlockPlan::new(&basis, &h, &ops, rho0.matrix()).is_some());
        let blocked = evolve_with(&h, &ops, &rho0, &times, 1e-10, true).unwrap();
        let dense = evolve_with(&h, &ops, &rho0, &times, 1e-10, false).unwrap();
        for (a, b) in blocked
            .mixed_states()
            .unwrap()
            .iter()
            .zip(dense.mixed_states().unwrap())
        {
            assert!((a.matrix() - b.matrix()).camax() < 1e-12);
        }
    }

    #[test]
    fn shell_coherences_use_the_dense_path() {
        let basis = enumerate_truncated(1);
        let h = chiral_hamiltonian(&ModelParams::default(), &basis).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::superposition(
            &basis,
            &[
                (BasisState::new(Sigma::G, 0, 0, 0), C64::new(s, 0.0)),
                (BasisState::new(Sigma::G, 1, 0, 0), C64::new(s, 0.0)),
            ],
        )
        .unwrap();
        let ops = build_collapse_ops(
            &basis,
            &DissipationParams {
                t_cavity: Some(2.0),
                ..DissipationParams::none()
            },
        )
        .unwrap();
        assert!(BlockPlan::new(&basis, &h, &ops, psi.to_density().matrix()).is_none());
        let res = lindblad_evolve(&h, &ops, &psi.to_density(), &[0.0, 1.0], 1e-9).unwrap();
        // the coherence between the vacuum and one photon decays at half the cavity rate
        let rho = &res.mixed_states().unwrap()[1];
        let coh: f64 = (1..4)
            .map(|i| rho.matrix()[(0, i)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!((coh - 0.5 * (-0.25f64).exp()).abs() < 1e-7, "{coh}");
    }
}
