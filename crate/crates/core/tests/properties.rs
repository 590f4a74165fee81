//! Property tests for the lattice, its Hamiltonians and the evolution kernels.

use std::f64::consts::PI;
use std::sync::Arc;

use chiral_fock::analysis::{
    corner_arrival, flux_table, ipr_of, lattice_snapshot, snapshots, Fig3Curves,
};
use chiral_fock::bessel::bessel_j;
use chiral_fock::dynamics::linspace;
use chiral_fock::hamiltonians::chiral_hamiltonian;
use chiral_fock::io::{format_float, read_csv, write_csv};
use chiral_fock::ladder::{pauli_z, total_excitation};
use chiral_fock::protocols::ideal_rabi;
use chiral_fock::state::coherent_amplitude;
use chiral_fock::{
    build_collapse_ops, enumerate_shell, enumerate_truncated, evolve_exact, fock_state,
    heisenberg_coefficients, lindblad_evolve, propagator_exact, Basis, BasisState,
    DissipationParams, ModelParams, Operator, Sigma, StateVector, C64,
};
use proptest::prelude::*;

fn sigma() -> impl Strategy<Value = Sigma> {
    prop_oneof![Just(Sigma::G), Just(Sigma::E)]
}

fn kappa() -> impl Strategy<Value = f64> {
    prop_oneof![0.05..3.0f64, -3.0..-0.05f64]
}

fn random_state(basis: &Arc<Basis>, seed: &[(f64, f64)]) -> StateVector {
    let amps = (0..basis.dim())
        .map(|i| {
            let (re, im) = seed[i % seed.len()];
            C64::new(re + 0.1 * i as f64, im - 0.05 * i as f64)
        })
        .collect();
    StateVector::normalized(Arc::clone(basis), amps).unwrap()
}

fn unitarity_defect(u: &Operator) -> f64 {
    let d = u.to_dense();
    let p = d.adjoint() * &d;
    let n = p.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let id = if i == j { 1.0 } else { 0.0 };
            (p[(i, j)] - C64::new(id, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

fn max_diff(a: &Operator, b: &Operator) -> f64 {
    (a.to_dense() - b.to_dense())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn bessel_series(n: u32, x: f64) -> f64 {
    let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= -(x / 2.0).powi(2) / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shell_dimension_is_square(n in 0u32..25) {
        let b = enumerate_shell(n);
        prop_assert_eq!(b.dim(), ((n + 1) * (n + 1)) as usize);
        for (i, s) in b.states().iter().enumerate() {
            prop_assert_eq!(s.excitation(), n);
            prop_assert_eq!(b.index_of(s), Some(i));
        }
    }

    #[test]
    fn truncated_dimension_sums_shells(n in 0u32..15) {
        let b = enumerate_truncated(n);
        let expected: u32 = (0..=n).map(|k| (k + 1) * (k + 1)).sum();
        prop_assert_eq!(b.dim(), expected as usize);
        let blocks = b.excitation_blocks();
        prop_assert_eq!(blocks.len(), n as usize + 1);
        prop_assert_eq!(blocks.iter().map(Vec::len).sum::<usize>(), b.dim());
    }

    #[test]
    fn chiral_hamiltonian_is_hermitian_and_conserving(n in 1u32..8, k in kappa()) {
        let b = enumerate_truncated(n);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(k), &b).unwrap();
        prop_assert!(h.hermiticity_residual() < 1e-12);
        let ex = h.commutator(&total_excitation(&b)).unwrap();
        let sz = h.commutator(&pauli_z(&b)).unwrap();
        prop_assert!(ex.max_abs() < 1e-12);
        prop_assert!(sz.max_abs() < 1e-12);
    }

    #[test]
    fn chiral_spectrum_is_a_ladder(n in 1u32..9, k in kappa()) {
        // normal-mode frequencies are 0 and +-sqrt(3) kappa, so every level
        // is an integer multiple of sqrt(3) kappa within [-N, N]
        let b = enumerate_shell(n);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(k), &b).unwrap();
        let eig = h.to_dense().symmetric_eigenvalues();
        let step = 3f64.sqrt() * k.abs();
        for e in eig.iter() {
            let m = e / step;
            prop_assert!((m - m.round()).abs() < 1e-9, "{e} / {step}");
            prop_assert!(m.round().abs() <= n as f64);
        }
    }

    #[test]
    fn propagator_is_unitary_with_group_law(
        n in 1u32..6, k in kappa(), t1 in -5.0..5.0f64, t2 in -5.0..5.0f64,
    ) {
        let b = enumerate_shell(n);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(k), &b).unwrap();
        let u1 = propagator_exact(&h, t1).unwrap();
        let u2 = propagator_exact(&h, t2).unwrap();
        let u12 = propagator_exact(&h, t1 + t2).unwrap();
        prop_assert!(unitarity_defect(&u1) < 1e-10);
        prop_assert!(max_diff(&u1.matmul(&u2).unwrap(), &u12) < 1e-10);
    }

    #[test]
    fn triple_transfer_time_is_a_revival(n in 1u32..8, k in kappa(), s in sigma()) {
        let params = ModelParams::with_kappa(k);
        let t = params.transfer_time().unwrap();
        let b = enumerate_shell(n);
        let h = chiral_hamiltonian(&params, &b).unwrap();
        let photons = n - s.excitation();
        let psi = fock_state(&b, s, photons, 0, 0).unwrap();
        let res = evolve_exact(&h, &psi, &[0.0, 3.0 * t]).unwrap();
        let back = &res.pure_states().unwrap()[1];
        prop_assert!((back.inner(&psi).unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_evolution_conserves_norm(
        n in 1u32..7,
        k in kappa(),
        seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..6),
        t_end in 0.1..20.0f64,
    ) {
        let b = enumerate_shell(n);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(k), &b).unwrap();
        let psi = random_state(&b, &seed);
        let res = evolve_exact(&h, &psi, &linspace(t_end, 7)).unwrap();
        prop_assert!(res.diagnostics.norm_drift < 1e-11);
        for snap in snapshots(&res) {
            prop_assert!((snap.total() - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn one_photon_amplitudes_match_heisenberg_coefficients(
        k in kappa(), s in sigma(), t in -10.0..10.0f64,
    ) {
        let params = ModelParams::with_kappa(k);
        let n = 1 + s.excitation();
        let b = enumerate_shell(n);
        let h = chiral_hamiltonian(&params, &b).unwrap();
        let psi = fock_state(&b, s, 1, 0, 0).unwrap();
        let res = evolve_exact(&h, &psi, &[0.0, t]).unwrap();
        let out = &res.pure_states().unwrap()[1];
        let c = heisenberg_coefficients(&params, s, -t);
        for (j, cj) in c.iter().enumerate() {
            let mut occ = [0u32; 3];
            occ[j] = 1;
            let site = BasisState::new(s, occ[0], occ[1], occ[2]);
            prop_assert!((out.amplitude(&site) - C64::new(*cj, 0.0)).norm() < 1e-10);
        }
        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((c.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversing_kappa_swaps_arrival_corner(n in 2u32..8, k in 0.2..2.0f64, s in sigma()) {
        let arrive = |kappa: f64| {
            let params = ModelParams::with_kappa(kappa);
            let t = params.transfer_time().unwrap();
            let b = enumerate_shell(n);
            let h = chiral_hamiltonian(&params, &b).unwrap();
            let psi = fock_state(&b, s, n - s.excitation(), 0, 0).unwrap();
            let res = evolve_exact(&h, &psi, &linspace(1.5 * t, 301)).unwrap();
            (corner_arrival(&res, s).unwrap(), t)
        };
        let (fwd, t) = arrive(k);
        let (rev, _) = arrive(-k);
        prop_assert_eq!(fwd.cavity + rev.cavity, 3);
        prop_assert!((fwd.time - t).abs() < 0.01 * t);
        prop_assert!((rev.time - t).abs() < 0.01 * t);
        prop_assert!(fwd.probability > 0.999);
    }

    #[test]
    fn plaquette_flux_is_a_quarter_turn(n in 2u32..7, k in kappa()) {
        let b = enumerate_shell(n);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(k), &b).unwrap();
        let table = flux_table(&h).unwrap();
        prop_assert!(!table.is_empty());
        for entry in table {
            prop_assert!((entry.flux.abs() - PI / 2.0).abs() < 1e-9, "{}", entry.flux);
        }
    }

    #[test]
    fn rabi_rotations_compose(
        n in 1u32..6, j in 0usize..3, a in -7.0..7.0f64, c in -7.0..7.0f64,
    ) {
        let b = enumerate_truncated(n);
        let ra = ideal_rabi(&b, j, a).unwrap();
        let rc = ideal_rabi(&b, j, c).unwrap();
        let rac = ideal_rabi(&b, j, a + c).unwrap();
        prop_assert!(unitarity_defect(&ra) < 1e-12);
        prop_assert!(max_diff(&ra.matmul(&rc).unwrap(), &rac) < 1e-12);
        prop_assert!(max_diff(&ideal_rabi(&b, j, 0.0).unwrap(), &Operator::identity(&b)) < 1e-15);
    }

    #[test]
    fn coherent_weights_are_poissonian(alpha in 0.0..4.0f64, n in 0u32..40) {
        let c = coherent_amplitude(C64::new(alpha, 0.0), n);
        let mean = alpha * alpha;
        let log_p = -mean + f64::from(n) * mean.max(1e-300).ln()
            - (1..=n).map(|k| f64::from(k).ln()).sum::<f64>();
        let p = if n == 0 { (-mean).exp() } else { log_p.exp() };
        prop_assert!((c.norm_sqr() - p).abs() < 1e-12 + 1e-10 * p);
    }

    #[test]
    fn bessel_matches_power_series(n in 0u32..8, x in -10.0..10.0f64) {
        prop_assert!((bessel_j(n, x) - bessel_series(n, x)).abs() < 1e-10);
    }

    #[test]
    fn ipr_lies_between_spread_and_localized(
        w in prop::collection::vec(0.0..1.0f64, 1..40),
    ) {
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-6);
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let v = ipr_of(&p);
        prop_assert!(v <= 1.0 + 1e-12);
        prop_assert!(v >= 1.0 / p.len() as f64 - 1e-12);
    }

    #[test]
    fn float_cells_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let s = format_float(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        let mut buf = Vec::new();
        write_csv(&mut buf, &["x", "y"], &[vec![x, -x]]).unwrap();
        let (header, rows) = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(header, vec!["x".to_string(), "y".to_string()]);
        prop_assert_eq!(rows, vec![vec![x, -x]]);
    }

    #[test]
    fn state_json_round_trips(
        n in 1u32..5,
        seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..6),
    ) {
        let b = enumerate_shell(n);
        let psi = random_state(&b, &seed);
        let text = serde_json::to_string(&psi).unwrap();
        let back: StateVector = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.amplitudes(), psi.amplitudes());
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn snapshot_matches_state_probabilities(
        n in 1u32..6,
        seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..6),
    ) {
        let b = enumerate_shell(n);
        let psi = random_state(&b, &seed);
        let snap = lattice_snapshot(0.0, &psi);
        prop_assert!((snap.total() - 1.0).abs() < 1e-12);
        for s in b.states() {
            prop_assert!((snap.probability(s) - psi.probability(s)).abs() < 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn lindblad_keeps_a_valid_density_matrix(
        k in kappa(),
        t1 in 2.0..50.0f64,
        tphi in 2.0..50.0f64,
        tc in 2.0..50.0f64,
        t_end in 0.5..4.0f64,
    ) {
        let b = enumerate_truncated(2);
        let h = chiral_hamiltonian(&ModelParams::with_kappa(k), &b).unwrap();
        let d = DissipationParams {
            t1_qubit: Some(t1),
            tphi_qubit: Some(tphi),
            t_cavity: Some(tc),
            ..DissipationParams::transmon_ns()
        };
        let ops = build_collapse_ops(&b, &d).unwrap();
        let psi = StateVector::superposition(
            &b,
            &[
                (BasisState::new(Sigma::G, 2, 0, 0), C64::new(0.6, 0.0)),
                (BasisState::new(Sigma::E, 1, 0, 0), C64::new(0.0, 0.8)),
            ],
        )
        .unwrap();
        let res = lindblad_evolve(&h, &ops, &psi.to_density(), &linspace(t_end, 5), 1e-10).unwrap();
        prop_assert!(!res.diagnostics.flagged, "{:?}", res.diagnostics);
        let rhos = res.mixed_states().unwrap();
        let mut last_exc = f64::INFINITY;
        for rho in rhos {
            prop_assert!((rho.trace() - 1.0).abs() < 1e-9);
            prop_assert!(rho.hermiticity_residual() < 1e-10);
            prop_assert!(rho.min_eigenvalue() > -1e-8);
            prop_assert!(rho.purity() <= 1.0 + 1e-9);
            let exc = rho.expectation(&total_excitation(&b)).unwrap().re;
            prop_assert!(exc <= last_exc + 1e-9);
            last_exc = exc;
        }
    }

    #[test]
    fn curve_files_round_trip(
        rows in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64), 1..20),
    ) {
        let curves = Fig3Curves {
            times: (0..rows.len()).map(|i| i as f64 * 0.5).collect(),
            p_e090: rows.iter().map(|r| r.0).collect(),
            p_g0010: rows.iter().map(|r| r.1).collect(),
            coh: rows.iter().map(|r| r.2).collect(),
        };
        let mut buf = Vec::new();
        curves.write_csv(&mut buf).unwrap();
        let back = Fig3Curves::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, curves);
    }
}
