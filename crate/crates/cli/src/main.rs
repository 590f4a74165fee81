//! `chiral-fock`: runs the chiral Fock-state-lattice experiments from a TOML
//! configuration and writes their artifacts.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, CliResult, ProtocolKind, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "chiral-fock",
    version,
    about = "Chiral Fock-state-lattice simulations"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration field, e.g. `--set model.kappa=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Treat flagged numerical diagnostics as failures (output.strict).
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory (output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Excitation number (model.n).
    #[arg(long = "N", global = true)]
    n: Option<u32>,
    /// Atom level g or e (model.sigma).
    #[arg(long, global = true)]
    sigma: Option<String>,
    /// Evolution horizon such as `1T`, `80 ns` or `2/kappa` (evolution.horizon).
    #[arg(long, global = true)]
    horizon: Option<String>,
    /// Modulation index (model.f).
    #[arg(long, global = true)]
    f: Option<f64>,
    /// Pulse mode ideal or physical (protocol.pulses).
    #[arg(long, global = true)]
    pulses: Option<String>,
    /// Coherent amplitude (protocol.alpha).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// GHZ chain links (protocol.links).
    #[arg(long = "M", global = true)]
    m: Option<u32>,
    /// Initial state corner or superposition (evolution.initial).
    #[arg(long, global = true)]
    initial: Option<String>,
    /// Output samples (evolution.samples).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// chiral, homogeneous, modulated or coupling_modulated (evolution.hamiltonian).
    #[arg(long, global = true)]
    hamiltonian: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-system evolution: lattice snapshots and observables.
    Evolve,
    /// Effective coupling report and full-versus-effective convergence scan.
    Floquet,
    /// Transfer of the atom-photon superposition with and without dissipation.
    Lindblad,
    /// State-preparation protocol: noon, ecs, ghz or two_cavity.
    Protocol { kind: Option<String> },
    /// Plaquette fluxes of the lattice Hamiltonian.
    Flux,
    /// Runs the acceptance checks; exit status 0 iff all pass.
    Selftest {
        /// Comma-separated subset of criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl Common {
    /// Shortcut flags as overrides, applied after `--set`.
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                o.push(format!("{key}={v}"));
            }
        };
        push("output.strict", self.strict.then(|| "true".to_string()));
        push(
            "output.dir",
            self.out.as_ref().map(|p| quoted(&p.to_string_lossy())),
        );
        push("model.n", self.n.map(|v| v.to_string()));
        push("model.sigma", self.sigma.as_deref().map(quoted));
        push("evolution.horizon", self.horizon.as_deref().map(quoted));
        push("model.f", self.f.map(|v| format!("{v:?}")));
        push("protocol.pulses", self.pulses.as_deref().map(quoted));
        push("protocol.alpha", self.alpha.map(|v| format!("{v:?}")));
        push("protocol.links", self.m.map(|v| v.to_string()));
        push("evolution.initial", self.initial.as_deref().map(quoted));
        push("evolution.samples", self.samples.map(|v| v.to_string()));
        push(
            "evolution.hamiltonian",
            self.hamiltonian.as_deref().map(quoted),
        );
        o
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Command::Selftest { only } = &cli.command {
        return commands::selftest(only);
    }
    let cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.overrides())?;
    match cli.command {
        Command::Evolve => commands::evolve(&cfg).map(drop),
        Command::Floquet => commands::floquet(&cfg).map(drop),
        Command::Lindblad => commands::lindblad(&cfg).map(drop),
        Command::Protocol { kind } => {
            let kind = kind
                .as_deref()
                .map(str::parse::<ProtocolKind>)
                .transpose()?;
            commands::protocol(&cfg, kind).map(drop)
        }
        Command::Flux => commands::flux(&cfg).map(drop),
        Command::Selftest { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CliError::exit_code(&e))
        }
    }
}
