//! Enumeration of the Fock-state lattice.
//!
//! A lattice site is one atom level together with the photon numbers of the
//! cavities. Sites with the same total excitation
//! `n0 + n1 + n2 + (1 if e)` form a triangular shell of `(N + 1)^2` sites;
//! the Hamiltonians of the chiral model never couple different shells.
//!
//! Ordering inside a shell is fixed: all `g` sites first, then all `e` sites,
//! each group ordered by `n0` descending and then `n1` descending. Truncated
//! bases list shells in ascending excitation, each in shell order. Output
//! files expose these indices, so the order is part of the file format.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Level of the two-level atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sigma {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "e")]
    E,
}

impl Sigma {
    /// Eigenvalue of `sigma_z = |e><e| - |g><g|`.
    pub fn z(self) -> f64 {
        match self {
            Sigma::G => -1.0,
            Sigma::E => 1.0,
        }
    }

    pub fn excitation(self) -> u32 {
        match self {
            Sigma::G => 0,
            Sigma::E => 1,
        }
    }

    pub fn flip(self) -> Sigma {
        match self {
            Sigma::G => Sigma::E,
            Sigma::E => Sigma::G,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sigma::G => "g",
            Sigma::E => "e",
        }
    }
}

impl std::str::FromStr for Sigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" | "G" => Ok(Sigma::G),
            "e" | "E" => Ok(Sigma::E),
            other => Err(Error::InvalidParameter(format!(
                "atom level must be g or e, got {other:?}"
            ))),
        }
    }
}

/// One lattice site: atom level plus the photon numbers of the three cavities.
///
/// Two-mode bases reuse this type with `occ[2] == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub sigma: Sigma,
    pub occ: [u32; 3],
}

impl BasisState {
    pub const fn new(sigma: Sigma, n0: u32, n1: u32, n2: u32) -> Self {
        Self {
            sigma,
            occ: [n0, n1, n2],
        }
    }

    pub fn photons(&self) -> u32 {
        self.occ.iter().sum()
    }

    pub fn excitation(&self) -> u32 {
        self.photons() + self.sigma.excitation()
    }

    /// Moves one photon from mode `from` to mode `to`, if there is one to move.
    pub fn hop(&self, from: usize, to: usize) -> Option<BasisState> {
        if self.occ[from] == 0 {
            return None;
        }
        let mut occ = self.occ;
        occ[from] -= 1;
        occ[to] += 1;
        Some(BasisState {
            sigma: self.sigma,
            occ,
        })
    }

    pub fn with_sigma(&self, sigma: Sigma) -> BasisState {
        BasisState {
            sigma,
            occ: self.occ,
        }
    }

    /// True if every photon sits in mode `j` (an empty lattice counts for every mode).
    pub fn is_corner(&self, j: usize) -> bool {
        (0..3).all(|k| k == j || self.occ[k] == 0)
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({};{},{},{})",
            self.sigma.label(),
            self.occ[0],
            self.occ[1],
            self.occ[2]
        )
    }
}

#[derive(Serialize, Deserialize)]
struct BasisStateRepr {
    sigma: Sigma,
    n: [u32; 3],
}

impl Serialize for BasisState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BasisStateRepr {
            sigma: self.sigma,
            n: self.occ,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasisState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BasisStateRepr::deserialize(d)?;
        Ok(BasisState {
            sigma: r.sigma,
            occ: r.n,
        })
    }
}

/// Which sites a basis contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Every site with total excitation exactly `N` (three cavities).
    Shell(u32),
    /// Every site with total excitation at most `N_max` (three cavities).
    Truncated(u32),
    /// Two cavities holding exactly `N` photons, either atom level.
    TwoMode(u32),
    /// No sites at all; the target of lowering operators on the vacuum shell.
    Empty,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Shell(n) => write!(f, "shell({n})"),
            BasisKind::Truncated(n) => write!(f, "truncated({n})"),
            BasisKind::TwoMode(n) => write!(f, "two_mode({n})"),
            BasisKind::Empty => write!(f, "empty"),
        }
    }
}

/// Ordered site enumeration with its inverse index.
#[derive(Debug, Clone)]
pub struct Basis {
    kind: BasisKind,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

/// Photon triples `(n0, n1, n2)` summing to `photons`, `n0` then `n1` descending.
fn compositions(photons: u32) -> impl Iterator<Item = [u32; 3]> {
    (0..=photons).rev().flat_map(move |n0| {
        (0..=photons - n0)
            .rev()
            .map(move |n1| [n0, n1, photons - n0 - n1])
    })
}

fn shell_states(n: u32) -> Vec<BasisState> {
    let mut states: Vec<BasisState> = compositions(n)
        .map(|occ| BasisState {
            sigma: Sigma::G,
            occ,
        })
        .collect();
    if n > 0 {
        states.extend(compositions(n - 1).map(|occ| BasisState {
            sigma: Sigma::E,
            occ,
        }));
    }
    states
}

impl Basis {
    fn from_states(kind: BasisKind, states: Vec<BasisState>) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self {
            kind,
            states,
            index,
        }
    }

    /// All sites with total excitation `n`; `(n + 1)^2` of them.
    pub fn shell(n: u32) -> Self {
        Self::from_states(BasisKind::Shell(n), shell_states(n))
    }

    /// All sites with total excitation `<= n_max`, shells in ascending order.
    pub fn truncated(n_max: u32) -> Self {
        let states = (0..=n_max).flat_map(shell_states).collect();
        Self::from_states(BasisKind::Truncated(n_max), states)
    }

    /// Two cavities with `photons` photons in total, for either atom level.
    pub fn two_mode(photons: u32) -> Self {
        let mut states = Vec::with_capacity(2 * (photons as usize + 1));
        for sigma in [Sigma::G, Sigma::E] {
            for n0 in (0..=photons).rev() {
                states.push(BasisState::new(sigma, n0, photons - n0, 0));
            }
        }
        Self::from_states(BasisKind::TwoMode(photons), states)
    }

    pub fn empty() -> Self {
        Self::from_states(BasisKind::Empty, Vec::new())
    }

    pub fn from_kind(kind: BasisKind) -> Self {
        match kind {
            BasisKind::Shell(n) => Self::shell(n),
            BasisKind::Truncated(n) => Self::truncated(n),
            BasisKind::TwoMode(n) => Self::two_mode(n),
            BasisKind::Empty => Self::empty(),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> BasisState {
        self.states[i]
    }

    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn require(&self, s: &BasisState) -> Result<usize> {
        self.index_of(s)
            .ok_or_else(|| Error::MissingState(format!("{s} in {}", self.kind)))
    }

    /// Number of cavity modes the basis describes.
    pub fn modes(&self) -> usize {
        match self.kind {
            BasisKind::TwoMode(_) => 2,
            _ => 3,
        }
    }

    /// Largest excitation present (0 for the empty basis).
    pub fn max_excitation(&self) -> u32 {
        self.states
            .iter()
            .map(BasisState::excitation)
            .max()
            .unwrap_or(0)
    }

    /// Positions of the sites grouped by total excitation, ascending.
    pub fn excitation_blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut by_exc: HashMap<u32, usize> = HashMap::new();
        for (i, s) in self.states.iter().enumerate() {
            let slot = *by_exc.entry(s.excitation()).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[slot].push(i);
        }
        blocks.sort_by_key(|b| self.states[b[0]].excitation());
        blocks
    }

    pub(crate) fn mismatch(&self, other: &Basis) -> Error {
        Error::BasisMismatch {
            expected: self.kind.to_string(),
            found: other.kind.to_string(),
        }
    }
}

/// Basis reached by an operator that changes the total excitation by
/// `d_excitation` and the photon number by `d_photons`. Shells follow the
/// excitation, two-mode bases the photon number; truncated bases map onto
/// themselves.
pub fn shifted(basis: &Arc<Basis>, d_excitation: i32, d_photons: i32) -> Arc<Basis> {
    let step = |n: u32, d: i32| -> Option<u32> { u32::try_from(n as i64 + d as i64).ok() };
    match basis.kind() {
        BasisKind::Truncated(_) | BasisKind::Empty => Arc::clone(basis),
        BasisKind::Shell(_) if d_excitation == 0 => Arc::clone(basis),
        BasisKind::TwoMode(_) if d_photons == 0 => Arc::clone(basis),
        BasisKind::Shell(n) => Arc::new(
            step(n, d_excitation)
                .map(Basis::shell)
                .unwrap_or_else(Basis::empty),
        ),
        BasisKind::TwoMode(n) => Arc::new(
            step(n, d_photons)
                .map(Basis::two_mode)
                .unwrap_or_else(Basis::empty),
        ),
    }
}

pub fn enumerate_shell(n: u32) -> Arc<Basis> {
    Arc::new(Basis::shell(n))
}

pub fn enumerate_truncated(n_max: u32) -> Arc<Basis> {
    Arc::new(Basis::truncated(n_max))
}

pub fn enumerate_two_mode(photons: u32) -> Arc<Basis> {
    Arc::new(Basis::two_mode(photons))
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    kind: BasisKind,
    states: Vec<BasisState>,
}

impl Serialize for Basis {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BasisRepr {
            kind: self.kind,
            states: self.states.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Basis {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = BasisRepr::deserialize(d)?;
        let basis = Basis::from_kind(repr.kind);
        if basis.states != repr.states {
            return Err(D::Error::custom(format!(
                "site list does not match {}",
                repr.kind
            )));
        }
        Ok(basis)
    }
}
