//! Run configuration: a TOML file with one table per concern, shadowed by
//! flat `section.key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use chiral_fock::floquet::DriveScheme;
use chiral_fock::hamiltonians::{kappa_for_transfer_time, J0_FIRST_ZERO};
use chiral_fock::protocols::{PulseMode, GHZ_DIMENSION_BUDGET};
use chiral_fock::{DephasingConvention, DissipationParams, ModelParams, Sigma};
use serde::{Deserialize, Serialize};

/// Failure of a CLI run, mapped onto the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] chiral_fock::Error),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    /// 1 for usage, configuration, parameter and I/O errors; 2 for
    /// numerical failures and exceeded budgets.
    pub fn exit_code(&self) -> u8 {
        use chiral_fock::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Core(e) => match e {
                E::StepUnderflow { .. }
                | E::DimensionBudget { .. }
                | E::TruncationLoss { .. }
                | E::NotNormalized(_)
                | E::ZeroNorm
                | E::NotHermitian(_) => 2,
                _ => 1,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Unit of every plain time and of every rate (rad per unit) in a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    Ns,
    Us,
}

impl TimeUnit {
    fn nanoseconds(self) -> f64 {
        match self {
            TimeUnit::Ns => 1.0,
            TimeUnit::Us => 1000.0,
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeUnit::Ns => "ns",
            TimeUnit::Us => "us",
        })
    }
}

/// A time as written in the configuration: a bare number in the run's unit,
/// or a string `"80 ns"`, `"3.47 us"`, `"2/kappa"` or `"1.5T"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Plain(f64),
    Text(String),
}

impl From<&str> for TimeSpec {
    fn from(s: &str) -> Self {
        TimeSpec::Text(s.to_string())
    }
}

/// A parsed time, before the model fixes `kappa` and `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Time {
    /// In the run's unit.
    Absolute(f64),
    /// Multiple of `1 / |kappa|`.
    PerKappa(f64),
    /// Multiple of the transfer time `T`.
    Transfer(f64),
}

fn parse_number(s: &str, what: &str) -> CliResult<f64> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(1.0);
    }
    s.parse::<f64>()
        .map_err(|_| CliError::Usage(format!("cannot read {what:?} as a time")))
}

impl TimeSpec {
    pub fn parse(&self, unit: TimeUnit) -> CliResult<Time> {
        let text = match self {
            TimeSpec::Plain(x) => return Ok(Time::Absolute(*x)),
            TimeSpec::Text(s) => s.trim(),
        };
        let time = if let Some(x) = text.strip_suffix("/kappa") {
            Time::PerKappa(parse_number(x, text)?)
        } else if let Some(x) = text.strip_suffix('T') {
            Time::Transfer(parse_number(x, text)?)
        } else if let Some(x) = text.strip_suffix("ns") {
            Time::Absolute(parse_number(x, text)? / unit.nanoseconds())
        } else if let Some(x) = text
            .strip_suffix("us")
            .or_else(|| text.strip_suffix("µs"))
            .or_else(|| text.strip_suffix("μs"))
        {
            Time::Absolute(parse_number(x, text)? * 1000.0 / unit.nanoseconds())
        } else {
            Time::Absolute(
                text.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("cannot read {text:?} as a time")))?,
            )
        };
        match time {
            Time::Absolute(x) | Time::PerKappa(x) | Time::Transfer(x) if !x.is_finite() => {
                Err(CliError::Usage(format!("time {text:?} is not finite")))
            }
            t => Ok(t),
        }
    }

    /// A time that does not depend on the model.
    pub fn absolute(&self, unit: TimeUnit, what: &str) -> CliResult<f64> {
        match self.parse(unit)? {
            Time::Absolute(x) => Ok(x),
            _ => Err(CliError::Usage(format!(
                "{what} must be given in ns, us or plain units"
            ))),
        }
    }
}

impl Time {
    pub fn resolve(self, kappa: f64, transfer_time: f64) -> f64 {
        match self {
            Time::Absolute(x) => x,
            Time::PerKappa(x) => x / kappa.abs(),
            Time::Transfer(x) => x * transfer_time,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Excitation number (photons for `sigma = g`); the default depends on
    /// the subcommand.
    pub n: Option<u32>,
    pub sigma: Sigma,
    /// Chiral coupling in rad per time unit; exclusive with `transfer_time`.
    pub kappa: Option<f64>,
    pub transfer_time: Option<TimeSpec>,
    pub g_v: f64,
    pub nu_d: f64,
    pub f: f64,
    pub delta: f64,
    pub time_unit: TimeUnit,
    /// Run `evolve` on the two-cavity model.
    pub two_cavity: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n: None,
            sigma: Sigma::G,
            kappa: None,
            transfer_time: None,
            g_v: 1.0,
            nu_d: 100.0,
            f: J0_FIRST_ZERO,
            delta: 0.0,
            time_unit: TimeUnit::Ns,
            two_cavity: false,
        }
    }
}

impl ModelSection {
    pub fn n_or(&self, default: u32) -> u32 {
        self.n.unwrap_or(default)
    }

    /// Model constants; without `kappa` or `transfer_time` the transfer
    /// time is 80 ns.
    pub fn params(&self) -> CliResult<ModelParams> {
        let kappa = match (&self.kappa, &self.transfer_time) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "give either model.kappa or model.transfer_time, not both".into(),
                ))
            }
            (Some(k), None) => *k,
            (None, spec) => {
                let spec = spec.clone().unwrap_or_else(|| "80 ns".into());
                let t = spec.absolute(self.time_unit, "model.transfer_time")?;
                if !(t > 0.0) {
                    return Err(CliError::Usage(
                        "model.transfer_time must be positive".into(),
                    ));
                }
                kappa_for_transfer_time(t)
            }
        };
        let params = ModelParams {
            kappa,
            g_v: self.g_v,
            nu_d: self.nu_d,
            f: self.f,
            delta: self.delta,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    #[default]
    Chiral,
    Homogeneous,
    Modulated,
    CouplingModulated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Every photon in cavity 0 with the atom in `model.sigma`.
    #[default]
    Corner,
    /// `(|g;N,0,0> - |e;N-1,0,0>)/sqrt(2)`, or `(|e> + |g>)|0,N>/sqrt(2)`
    /// for two cavities.
    Superposition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub hamiltonian: HamiltonianKind,
    pub initial: InitialState,
    pub horizon: TimeSpec,
    pub samples: usize,
    /// Integrator tolerance; the default depends on the subcommand.
    pub tol: Option<f64>,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianKind::Chiral,
            initial: InitialState::Corner,
            horizon: "1T".into(),
            samples: 201,
            tol: None,
        }
    }
}

/// Relaxation and dephasing times; absent entries contribute no channel.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DissipationSection {
    pub t1_qubit: Option<TimeSpec>,
    pub tphi_qubit: Option<TimeSpec>,
    pub t_cavity: Option<TimeSpec>,
    pub dephasing: DephasingConvention,
}

impl DissipationSection {
    /// 650 ns relaxation, 150 ns dephasing, 3.47 us cavity lifetime.
    pub fn transmon() -> Self {
        Self {
            t1_qubit: Some("650 ns".into()),
            tphi_qubit: Some("150 ns".into()),
            t_cavity: Some("3.47 us".into()),
            dephasing: DephasingConvention::Pure,
        }
    }

    pub fn params(&self, unit: TimeUnit) -> CliResult<DissipationParams> {
        let get = |spec: &Option<TimeSpec>, what: &str| {
            spec.as_ref().map(|s| s.absolute(unit, what)).transpose()
        };
        let d = DissipationParams {
            t1_qubit: get(&self.t1_qubit, "dissipation.t1_qubit")?,
            tphi_qubit: get(&self.tphi_qubit, "dissipation.tphi_qubit")?,
            t_cavity: get(&self.t_cavity, "dissipation.t_cavity")?,
            dephasing: self.dephasing,
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Noon,
    Ecs,
    Ghz,
    TwoCavity,
}

impl std::str::FromStr for ProtocolKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "noon" => Ok(ProtocolKind::Noon),
            "ecs" => Ok(ProtocolKind::Ecs),
            "ghz" => Ok(ProtocolKind::Ghz),
            "two_cavity" | "two-cavity" => Ok(ProtocolKind::TwoCavity),
            other => Err(CliError::Usage(format!(
                "unknown protocol {other:?} (expected noon, ecs, ghz or two_cavity)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub kind: Option<ProtocolKind>,
    pub pulses: PulseMode,
    /// Coherent amplitude of the entangled coherent state.
    pub alpha: f64,
    /// Number of links `M` of the GHZ chain.
    pub links: u32,
    /// Photon cutoff of the entangled coherent state; automatic when absent.
    pub truncation: Option<u32>,
    /// Two-cavity rotation time; the oracle rotation time when absent.
    pub time: Option<TimeSpec>,
    /// Largest GHZ chain dimension.
    pub budget: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            kind: None,
            pulses: PulseMode::Ideal,
            alpha: 2.0,
            links: 2,
            truncation: None,
            time: None,
            budget: GHZ_DIMENSION_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetSection {
    /// Values of `nu_d / g_v` compared at fixed `g_v`.
    pub ratios: Vec<f64>,
    pub scheme: DriveScheme,
    pub stroboscopic: bool,
    pub reverse_chirality: bool,
    pub tol: f64,
}

impl Default for FloquetSection {
    fn default() -> Self {
        Self {
            ratios: vec![25.0, 50.0, 100.0, 200.0],
            scheme: DriveScheme::FrequencyModulated,
            stroboscopic: true,
            reverse_chirality: false,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Jsonl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    /// Include full state vectors in JSON results.
    pub states: bool,
    /// Exit with status 2 when a run's numerical diagnostics are flagged.
    pub strict: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json, Format::Jsonl],
            states: false,
            strict: false,
        }
    }
}

impl OutputSection {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub evolution: EvolutionSection,
    /// Dissipation of `lindblad` runs; the transmon times when absent.
    pub dissipation: Option<DissipationSection>,
    pub protocol: ProtocolSection,
    pub floquet: FloquetSection,
    pub output: OutputSection,
}

/// Reads a `key=value` override value as TOML, falling back to a string.
fn override_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets the dotted `key` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("malformed override key {key:?}")));
    }
    let (last, parents) = path.split_last().expect("split yields one part");
    let mut cur = table;
    for part in parents {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("{part:?} in {key:?} is not a table")))?;
    }
    cur.insert(last.to_string(), override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> CliResult<Self> {
        RunConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
    }

    /// Loads `path` (when given) and applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("invalid TOML in {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }
}
