//! Subcommand drivers: each resolves the configuration, runs the kernel and
//! writes its artifacts into the output directory.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::PathBuf;
use std::sync::Arc;

use chiral_fock::acceptance::{run_criterion, CriterionOutcome, CRITERIA};
use chiral_fock::analysis::{
    corner_arrival, flux_table, ipr_of, run_fig3, snapshots, write_flux_csv, CornerArrival,
    Fig3Curves, Fig3Setup, FluxEntry, FIG3_TOL,
};
use chiral_fock::dynamics::{linspace, SCHRODINGER_TOL};
use chiral_fock::floquet::{
    effective_kappa, floquet_report, ComparisonOptions, DriveScheme, FloquetReport,
};
use chiral_fock::hamiltonians::{
    chiral_hamiltonian, homogeneous_lattice_hamiltonian, two_cavity_hamiltonian,
    CouplingModulatedHamiltonian, ModulatedHamiltonian,
};
use chiral_fock::io::{create_file, write_csv, write_json, write_jsonl};
use chiral_fock::ladder::{number, pauli_z};
use chiral_fock::protocols::{
    entangled_coherent_protocol, ghz_chain, noon_protocol, rotation_time_oracle,
    two_cavity_rotation, ProtocolResult,
};
use chiral_fock::{
    enumerate_shell, enumerate_two_mode, evolve_exact, evolve_timedep, Basis, BasisState,
    Diagnostics, EvolutionResult, ModelParams, Sigma, StateVector, C64,
};
use serde::{Deserialize, Serialize};

use crate::config::{
    CliError, CliResult, DissipationSection, Format, HamiltonianKind, InitialState, ProtocolKind,
    RunConfig, Time, TimeUnit,
};

fn transfer_time_of(kappa: f64) -> CliResult<f64> {
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(CliError::Usage(
            "the effective coupling vanishes; give an absolute horizon".into(),
        ));
    }
    Ok(2.0 * PI / (3.0 * 3f64.sqrt() * kappa.abs()))
}

struct Outputs<'a> {
    cfg: &'a RunConfig,
    written: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(cfg: &'a RunConfig) -> CliResult<Self> {
        std::fs::create_dir_all(&cfg.output.dir).map_err(|e| {
            CliError::Usage(format!(
                "cannot create output directory {}: {e}",
                cfg.output.dir.display()
            ))
        })?;
        Ok(Self {
            cfg,
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        format: Format,
        name: &str,
        f: impl FnOnce(&mut dyn std::io::Write) -> chiral_fock::Result<()>,
    ) -> CliResult<()> {
        if !self.cfg.output.wants(format) {
            return Ok(());
        }
        let path = self.cfg.output.dir.join(name);
        let mut w = create_file(&path)?;
        f(&mut w)?;
        std::io::Write::flush(&mut w)?;
        self.written.push(path);
        Ok(())
    }

    fn report(&self) {
        for p in &self.written {
            println!("wrote {}", p.display());
        }
    }
}

/// Flagged diagnostics are a warning, or a numerical failure under
/// `output.strict`.
fn check_diagnostics(cfg: &RunConfig, d: &Diagnostics) -> CliResult<()> {
    if !d.flagged {
        return Ok(());
    }
    let msg = format!("numerical diagnostics flagged: {}", d.notes.join("; "));
    if cfg.output.strict {
        return Err(CliError::Numerical(msg));
    }
    eprintln!("warning: {msg}");
    Ok(())
}

fn state(basis: &Arc<Basis>, terms: &[(BasisState, f64)]) -> CliResult<StateVector> {
    let terms: Vec<(BasisState, C64)> = terms.iter().map(|&(s, a)| (s, C64::new(a, 0.0))).collect();
    Ok(StateVector::superposition(basis, &terms)?)
}

/// Summary of an `evolve` run, written as `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub hamiltonian: HamiltonianKind,
    pub two_cavity: bool,
    pub n: u32,
    pub sigma: Sigma,
    pub initial: InitialState,
    pub time_unit: TimeUnit,
    pub params: ModelParams,
    /// Coupling that sets `T`: `kappa`, or the drive's effective coupling.
    pub kappa_eff: f64,
    /// Absent when the effective coupling vanishes.
    pub transfer_time: Option<f64>,
    pub horizon: f64,
    pub samples: usize,
    pub final_peak: Option<BasisState>,
    pub final_peak_probability: f64,
    pub final_ipr: f64,
    pub arrival: Option<CornerArrival>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<StateVector>,
}

pub fn evolve(cfg: &RunConfig) -> CliResult<EvolveSummary> {
    let m = &cfg.model;
    let ev = &cfg.evolution;
    let n = m.n_or(10);
    let params = m.params()?;
    if ev.samples < 2 {
        return Err(CliError::Usage(
            "evolution.samples must be at least 2".into(),
        ));
    }
    let (basis, psi0, kappa_eff, transfer) = if m.two_cavity {
        if ev.hamiltonian != HamiltonianKind::Chiral {
            return Err(CliError::Usage(
                "the two-cavity model only has the chiral Hamiltonian".into(),
            ));
        }
        let basis = enumerate_two_mode(n);
        let psi0 = match ev.initial {
            InitialState::Corner => state(&basis, &[(BasisState::new(m.sigma, 0, n, 0), 1.0)])?,
            InitialState::Superposition => state(
                &basis,
                &[
                    (BasisState::new(Sigma::E, 0, n, 0), FRAC_1_SQRT_2),
                    (BasisState::new(Sigma::G, 0, n, 0), FRAC_1_SQRT_2),
                ],
            )?,
        };
        (
            basis,
            psi0,
            params.kappa,
            Some(rotation_time_oracle(&params)?),
        )
    } else {
        let basis = enumerate_shell(n);
        let psi0 = match ev.initial {
            InitialState::Corner => {
                let photons = n
                    .checked_sub(m.sigma.excitation())
                    .ok_or_else(|| CliError::Usage("an excited-atom corner needs N >= 1".into()))?;
                state(&basis, &[(BasisState::new(m.sigma, photons, 0, 0), 1.0)])?
            }
            InitialState::Superposition => {
                if n == 0 {
                    return Err(CliError::Usage("the superposition needs N >= 1".into()));
                }
                state(
                    &basis,
                    &[
                        (BasisState::new(Sigma::G, n, 0, 0), FRAC_1_SQRT_2),
                        (BasisState::new(Sigma::E, n - 1, 0, 0), -FRAC_1_SQRT_2),
                    ],
                )?
            }
        };
        let kappa_eff = match ev.hamiltonian {
            HamiltonianKind::Chiral | HamiltonianKind::Homogeneous => params.kappa,
            HamiltonianKind::Modulated => effective_kappa(&params, DriveScheme::FrequencyModulated),
            HamiltonianKind::CouplingModulated => {
                effective_kappa(&params, DriveScheme::CouplingModulated)
            }
        };
        let transfer = match ev.horizon.parse(m.time_unit)? {
            Time::Absolute(_) => transfer_time_of(kappa_eff).ok(),
            _ => Some(transfer_time_of(kappa_eff)?),
        };
        (basis, psi0, kappa_eff, transfer)
    };
    let horizon = ev
        .horizon
        .parse(m.time_unit)?
        .resolve(kappa_eff, transfer.unwrap_or(f64::NAN));
    if !(horizon >= 0.0) {
        return Err(CliError::Usage(format!(
            "horizon {horizon} must be nonnegative"
        )));
    }
    let times = linspace(horizon, ev.samples);
    let tol = ev.tol.unwrap_or(SCHRODINGER_TOL);
    let result = if m.two_cavity {
        evolve_exact(&two_cavity_hamiltonian(&params, &basis)?, &psi0, &times)?
    } else {
        match ev.hamiltonian {
            HamiltonianKind::Chiral => {
                evolve_exact(&chiral_hamiltonian(&params, &basis)?, &psi0, &times)?
            }
            HamiltonianKind::Homogeneous => evolve_exact(
                &homogeneous_lattice_hamiltonian(&basis, params.kappa)?,
                &psi0,
                &times,
            )?,
            HamiltonianKind::Modulated => evolve_timedep(
                &ModulatedHamiltonian::new(&params, &basis)?,
                &psi0,
                &times,
                tol,
            )?,
            HamiltonianKind::CouplingModulated => evolve_timedep(
                &CouplingModulatedHamiltonian::new(&params, &basis)?,
                &psi0,
                &times,
                tol,
            )?,
        }
    };

    let frames = snapshots(&result);
    let last = frames.last().expect("at least two samples");
    let final_peak = last.peak();
    let final_peak_probability = final_peak.map_or(0.0, |s| last.probability(&s));
    let final_ipr = ipr_of(&result.probabilities(result.len() - 1));
    let arrival = match (m.two_cavity, ev.initial) {
        (false, InitialState::Corner) => corner_arrival(&result, m.sigma).ok(),
        _ => None,
    };
    let summary = EvolveSummary {
        hamiltonian: ev.hamiltonian,
        two_cavity: m.two_cavity,
        n,
        sigma: m.sigma,
        initial: ev.initial,
        time_unit: m.time_unit,
        params,
        kappa_eff,
        transfer_time: transfer,
        horizon,
        samples: ev.samples,
        final_peak,
        final_peak_probability,
        final_ipr,
        arrival,
        diagnostics: result.diagnostics.clone(),
        final_state: cfg
            .output
            .states
            .then(|| result.pure_states().and_then(|s| s.last().cloned()))
            .flatten(),
    };

    let mut out = Outputs::new(cfg)?;
    out.write(Format::Jsonl, "snapshots.jsonl", |w| {
        write_jsonl(w, &frames)
    })?;
    out.write(Format::Csv, "observables.csv", |w| {
        write_observables(w, &result)
    })?;
    out.write(Format::Json, "result.json", |w| write_json(w, &summary))?;

    println!(
        "evolve: {:?} H, N = {n}, dim {}, T = {}, horizon {} {}",
        ev.hamiltonian,
        basis.dim(),
        transfer.map_or("undefined".into(), |t| t.to_string()),
        horizon,
        m.time_unit
    );
    if let Some(peak) = final_peak {
        println!("final peak {peak} with probability {final_peak_probability:.12}");
    }
    println!("final ipr {final_ipr:.12}");
    if let Some(a) = arrival {
        println!(
            "arrival at {} (cavity {}) at t = {} with probability {:.12}",
            a.corner, a.cavity, a.time, a.probability
        );
    }
    out.report();
    check_diagnostics(cfg, &result.diagnostics)?;
    Ok(summary)
}

/// `t, <n_j>, <sigma_z>, ipr, norm` per output time.
fn write_observables(
    w: &mut dyn std::io::Write,
    result: &EvolutionResult,
) -> chiral_fock::Result<()> {
    let basis = result.basis().expect("nonempty trajectory");
    let modes = if matches!(basis.kind(), chiral_fock::BasisKind::TwoMode(_)) {
        2
    } else {
        3
    };
    let mut ops = Vec::new();
    let mut header = vec!["t".to_string()];
    for j in 0..modes {
        ops.push(number(basis, j)?);
        header.push(format!("n{j}"));
    }
    ops.push(pauli_z(basis));
    header.extend(["sigma_z", "ipr", "norm"].map(String::from));
    let mut rows = Vec::with_capacity(result.len());
    for (k, &t) in result.times.iter().enumerate() {
        let mut row = vec![t];
        for op in &ops {
            row.push(result.expectation(k, op)?.re);
        }
        let p = result.probabilities(k);
        row.push(ipr_of(&p));
        row.push(p.iter().sum::<f64>());
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(w, &header, &rows)
}

pub fn floquet(cfg: &RunConfig) -> CliResult<FloquetReport> {
    let params = cfg.model.params()?;
    let n = cfg.model.n_or(1);
    let fl = &cfg.floquet;
    let opts = ComparisonOptions {
        scheme: fl.scheme,
        horizon: None,
        tol: fl.tol,
        reverse_chirality: fl.reverse_chirality,
        sigma: cfg.model.sigma,
        stroboscopic: fl.stroboscopic,
    };
    let report = floquet_report(&params, n, &fl.ratios, &opts)?;
    let mut out = Outputs::new(cfg)?;
    out.write(Format::Json, "floquet.json", |w| write_json(w, &report))?;
    out.write(Format::Csv, "floquet.csv", |w| report.write_csv(w))?;
    print_floquet(&report, &params, n);
    out.report();
    Ok(report)
}

fn print_floquet(report: &FloquetReport, params: &ModelParams, n: u32) {
    println!("beta = {:.9} at f = {}", report.beta, report.f);
    println!(
        "kappa_eff = {:.9e} at g_v = {}, nu_d = {}; |J_0(f)| = {:.3e}",
        report.kappa_eff, params.g_v, params.nu_d, report.j0_residual
    );
    for p in &report.comparison {
        println!(
            "N = {n}, nu_d/g_v = {}: infidelity {:.6e}",
            p.nu_d_over_gv, p.infidelity
        );
    }
}

/// Values of the transfer run at `t = T`, written as `lindblad.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladSummary {
    pub setup: Fig3Setup,
    pub time_unit: TimeUnit,
    /// `(p_e090, p_g0010, coh)` at the sample nearest `T`.
    pub ideal_at_transfer: [f64; 3],
    pub dissipative_at_transfer: [f64; 3],
    pub cauchy_schwarz_violation: f64,
    pub diagnostics: Diagnostics,
}

fn at_transfer(c: &Fig3Curves, t: f64) -> [f64; 3] {
    let k = c.nearest(t).expect("nonempty curves");
    [c.p_e090[k], c.p_g0010[k], c.coh[k]]
}

pub fn lindblad(cfg: &RunConfig) -> CliResult<LindbladSummary> {
    let unit = cfg.model.time_unit;
    let params = cfg.model.params()?;
    let dissipation = cfg
        .dissipation
        .clone()
        .unwrap_or_else(DissipationSection::transmon)
        .params(unit)?;
    let setup = Fig3Setup {
        n: cfg.model.n_or(10),
        transfer_time: params.transfer_time()?,
        dissipation,
        samples: cfg.evolution.samples,
        tol: cfg.evolution.tol.unwrap_or(FIG3_TOL),
    };
    if setup.samples < 2 {
        return Err(CliError::Usage(
            "evolution.samples must be at least 2".into(),
        ));
    }
    let ideal = run_fig3(&setup, false)?;
    let noisy = run_fig3(&setup, true)?;
    let summary = LindbladSummary {
        setup,
        time_unit: unit,
        ideal_at_transfer: at_transfer(&ideal.curves, setup.transfer_time),
        dissipative_at_transfer: at_transfer(&noisy.curves, setup.transfer_time),
        cauchy_schwarz_violation: noisy.curves.cauchy_schwarz_violation(),
        diagnostics: noisy.result.diagnostics.clone(),
    };
    let mut out = Outputs::new(cfg)?;
    out.write(Format::Csv, "fig3_ideal.csv", |w| ideal.curves.write_csv(w))?;
    out.write(Format::Csv, "fig3_dissipative.csv", |w| {
        noisy.curves.write_csv(w)
    })?;
    out.write(Format::Json, "lindblad.json", |w| write_json(w, &summary))?;
    out.write(Format::Jsonl, "snapshots_dissipative.jsonl", |w| {
        write_jsonl(w, &snapshots(&noisy.result))
    })?;
    let d = &summary.diagnostics;
    println!(
        "lindblad: N = {}, dim {}, T = {} {unit}, {} samples on [0, 2T]",
        setup.n,
        setup.basis().dim(),
        setup.transfer_time,
        setup.samples
    );
    let [a, b, c] = summary.ideal_at_transfer;
    println!("ideal at T: p_e090 {a:.9}, p_g0010 {b:.9}, coh {c:.9}");
    let [a, b, c] = summary.dissipative_at_transfer;
    println!("dissipative at T: p_e090 {a:.9}, p_g0010 {b:.9}, coh {c:.9}");
    println!(
        "trace drift {:.2e}, min eigenvalue {:.2e}, steps {}",
        d.trace_drift,
        d.min_eigenvalue.unwrap_or(f64::NAN),
        d.steps_accepted
    );
    out.report();
    check_diagnostics(cfg, d)?;
    Ok(summary)
}

pub fn protocol(cfg: &RunConfig, kind: Option<ProtocolKind>) -> CliResult<ProtocolResult> {
    let kind = kind
        .or(cfg.protocol.kind)
        .ok_or_else(|| CliError::Usage("name a protocol: noon, ecs, ghz or two_cavity".into()))?;
    let params = cfg.model.params()?;
    let p = &cfg.protocol;
    let result = match kind {
        ProtocolKind::Noon => noon_protocol(cfg.model.n_or(1), &params, p.pulses)?,
        ProtocolKind::Ecs => entangled_coherent_protocol(p.alpha, &params, p.truncation, p.pulses)?,
        ProtocolKind::Ghz => ghz_chain(p.links, cfg.model.n_or(1), &params, p.budget)?,
        ProtocolKind::TwoCavity => {
            let t = match &p.time {
                Some(spec) => Some(
                    spec.parse(cfg.model.time_unit)?
                        .resolve(params.kappa, rotation_time_oracle(&params)?),
                ),
                None => None,
            };
            two_cavity_rotation(cfg.model.n_or(1), &params, t)?
        }
    };
    let result = if cfg.output.states {
        result
    } else {
        result.without_states()
    };
    let mut out = Outputs::new(cfg)?;
    out.write(Format::Json, "protocol.json", |w| write_json(w, &result))?;
    print_protocol(&result);
    out.report();
    Ok(result)
}

fn print_protocol(r: &ProtocolResult) {
    println!("protocol {}", r.protocol);
    println!("target_fidelity {:.15}", r.target_fidelity);
    println!("relative_phase {:.12}", r.relative_phase);
    if let Some(p) = r.atom_purity {
        println!("atom_purity {p:.15}");
    }
    for (k, f) in r.branch_fidelities.iter().enumerate() {
        println!("branch_fidelity[{k}] {f:.15}");
    }
    for (name, v) in &r.metrics {
        println!("{name} {v}");
    }
}

pub fn flux(cfg: &RunConfig) -> CliResult<Vec<FluxEntry>> {
    let params = cfg.model.params()?;
    let n = cfg.model.n_or(3);
    let basis = enumerate_shell(n);
    let h = match cfg.evolution.hamiltonian {
        HamiltonianKind::Chiral => chiral_hamiltonian(&params, &basis)?,
        HamiltonianKind::Homogeneous => homogeneous_lattice_hamiltonian(&basis, params.kappa)?,
        other => {
            return Err(CliError::Usage(format!(
                "flux tables need a static Hamiltonian, not {other:?}"
            )))
        }
    };
    let table: Vec<FluxEntry> = flux_table(&h)?;
    let mut out = Outputs::new(cfg)?;
    out.write(Format::Csv, "flux.csv", |w| write_flux_csv(w, &table))?;
    out.write(Format::Json, "flux.json", |w| write_json(w, &table))?;
    println!("flux: N = {n}, {} plaquettes", table.len());
    for e in &table {
        let s = e.plaquette.base;
        println!(
            "{} {:?} ({},{},{}) {:+.15}",
            e.plaquette.sigma.label(),
            e.plaquette.kind,
            s[0],
            s[1],
            s[2],
            e.flux
        );
    }
    out.report();
    Ok(table)
}

pub fn selftest(only: &[String]) -> CliResult<()> {
    let ids: Vec<&str> = if only.is_empty() {
        CRITERIA.to_vec()
    } else {
        for id in only {
            if !CRITERIA.contains(&id.as_str()) {
                return Err(CliError::Usage(format!(
                    "unknown criterion {id:?}; known: {}",
                    CRITERIA.join(", ")
                )));
            }
        }
        only.iter().map(String::as_str).collect()
    };
    let outcomes: Vec<CriterionOutcome> = ids
        .iter()
        .map(|id| {
            let o = run_criterion(id);
            println!("{o}");
            o
        })
        .collect();
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "selftest: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} acceptance criteria failed"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chiral_fock::io::read_json;
    use serde::de::DeserializeOwned;

    fn config(dir: &std::path::Path, overrides: &[&str]) -> RunConfig {
        let mut o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        o.push(format!("output.dir={:?}", dir.to_string_lossy()));
        RunConfig::load(None, &o).unwrap()
    }

    fn reread<T: DeserializeOwned>(path: PathBuf) -> T {
        read_json(std::fs::File::open(path).unwrap()).unwrap()
    }

    #[test]
    fn evolve_summary_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            dir.path(),
            &["model.n=4", "model.sigma=\"e\"", "output.states=true"],
        );
        let summary = evolve(&cfg).unwrap();
        assert_eq!(summary.final_peak, Some(BasisState::new(Sigma::E, 0, 3, 0)));
        assert!(summary.final_state.is_some());
        assert_eq!(
            reread::<EvolveSummary>(dir.path().join("result.json")),
            summary
        );
    }

    #[test]
    fn absolute_horizon_on_an_undriven_lattice() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            dir.path(),
            &[
                "model.n=2",
                "model.g_v=0",
                "evolution.hamiltonian=\"modulated\"",
                "evolution.horizon=\"3 ns\"",
            ],
        );
        let summary = evolve(&cfg).unwrap();
        assert_eq!(summary.transfer_time, None);
        assert_eq!(summary.final_ipr, 1.0);
        assert_eq!(
            reread::<EvolveSummary>(dir.path().join("result.json")),
            summary
        );
        let relative = config(
            dir.path(),
            &["model.g_v=0", "evolution.hamiltonian=\"modulated\""],
        );
        assert_eq!(evolve(&relative).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn lindblad_summary_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), &["model.n=2", "evolution.samples=11"]);
        let summary = lindblad(&cfg).unwrap();
        assert!(summary.dissipative_at_transfer.iter().all(|&v| v < 0.5));
        assert_eq!(
            reread::<LindbladSummary>(dir.path().join("lindblad.json")),
            summary
        );
    }

    #[test]
    fn protocol_and_flux_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), &["output.states=true"]);
        let r = protocol(&cfg, Some(ProtocolKind::TwoCavity)).unwrap();
        assert!(r.stage_vector("psi_t").is_some());
        assert_eq!(
            reread::<ProtocolResult>(dir.path().join("protocol.json")),
            r
        );
        let table = flux(&config(dir.path(), &["model.n=2"])).unwrap();
        assert_eq!(
            reread::<Vec<FluxEntry>>(dir.path().join("flux.json")),
            table
        );
    }

    #[test]
    fn floquet_report_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let report = floquet(&config(dir.path(), &["floquet.ratios=[]"])).unwrap();
        assert!((report.beta - 0.307).abs() < 1e-3);
        assert_eq!(
            reread::<FloquetReport>(dir.path().join("floquet.json")),
            report
        );
    }
}
