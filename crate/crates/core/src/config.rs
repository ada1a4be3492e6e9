//! TOML experiment configuration.
//!
//! Every key is optional; an empty document gives `N = 4`, `beta = 10`,
//! `omega = 1e-6`, `t_int = 500 pi`, `h = 0.1` with `J = -1`. Unknown keys are
//! errors.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ModelSpec;
use crate::protocol::{GammaMethod, Grid, ProtocolConfig};
use crate::spinops::{Axis, SpinValue};

/// Largest Hilbert-space dimension a config may request.
pub const MAX_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Table1,
    Table2,
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Sweep,
    Validate,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Table1,
        Experiment::Table2,
        Experiment::Fig1,
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::Fig4,
        Experiment::Fig5,
        Experiment::Sweep,
        Experiment::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Table2 => "table2",
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Sweep => "sweep",
            Experiment::Validate => "validate",
        }
    }

    /// Spins run when the config does not list any.
    pub fn default_spins(self) -> Vec<SpinValue> {
        let upto = match self {
            Experiment::Table1 | Experiment::Fig3 | Experiment::Sweep => 6,
            Experiment::Fig2 => return vec![SpinValue::from_two_s(3).unwrap()],
            _ => 5,
        };
        (1..=upto).map(|t| SpinValue::from_two_s(t).unwrap()).collect()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Threads {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for Threads {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threads::Auto => ser.serialize_str("auto"),
            Threads::Fixed(n) => ser.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(i64),
            Word(String),
        }
        match Raw::deserialize(de)? {
            Raw::Count(n) if n >= 1 => Ok(Threads::Fixed(n as usize)),
            Raw::Count(n) => Err(serde::de::Error::custom(format!("threads must be >= 1, got {n}"))),
            Raw::Word(w) if w == "auto" => Ok(Threads::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("threads must be a count or \"auto\", got {w:?}"))),
        }
    }
}

/// One spin or a list of spins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spins {
    One(SpinValue),
    Many(Vec<SpinValue>),
}

impl Spins {
    pub fn to_vec(&self) -> Vec<SpinValue> {
        match self {
            Spins::One(s) => vec![*s],
            Spins::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Field,
    Coupling,
    Beta,
    Omega,
    TInt,
    Alpha,
    NSites,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { parameter: SweepParameter::Field, values: vec![0.05, 0.1, 0.2] }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_n_sites() -> usize {
    4
}
fn default_coupling() -> f64 {
    -1.0
}
fn default_field() -> f64 {
    0.1
}
fn default_beta() -> f64 {
    10.0
}
fn default_omega() -> f64 {
    1e-6
}
fn default_t_int() -> f64 {
    500.0 * PI
}
fn default_fd_step() -> f64 {
    1e-9
}
fn default_samples() -> usize {
    10_000
}
fn default_basis_t_star() -> f64 {
    50.76
}
fn default_t_star() -> Grid {
    Grid { min: 0.0, max: 120.0, step: 0.01 }
}
fn default_alpha_grid() -> Grid {
    Grid { min: 0.5, max: 5.0, step: 0.01 }
}
fn default_basis_grid() -> Grid {
    Grid { min: -0.7, max: 0.7, step: 0.05 }
}
fn default_middle() -> Axis {
    Axis::X
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must agree with the experiment named on the command line when both are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub threads: Threads,

    #[serde(default = "default_n_sites")]
    pub n_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Spins>,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default = "default_field")]
    pub field: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_t_int")]
    pub t_int: f64,
    /// Selects the next-nearest-neighbour model with this fall-off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_middle")]
    pub nnn_middle: Axis,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eff: Option<usize>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub finite_difference: bool,
    #[serde(default)]
    pub gamma_method: GammaMethod,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_basis_t_star")]
    pub basis_t_star: f64,

    #[serde(default = "default_t_star")]
    pub t_star: Grid,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Grid,
    #[serde(default = "default_basis_grid")]
    pub basis_grid: Grid,

    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

/// 1-based line of the first assignment to `key`, if any.
fn locate_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|line| {
        let line = line.trim_start();
        line.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn at_key(text: &str, key: &str, msg: String) -> Error {
    match locate_key(text, key) {
        Some(line) => Error::Config(format!("line {line}: {msg}")),
        None => Error::Config(msg),
    }
}

/// Parses and validates a TOML document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate().map_err(|(key, msg)| at_key(text, key, msg))?;
    Ok(cfg)
}

impl ExperimentConfig {
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.n_sites < 2 {
            return Err(("n_sites", format!("n_sites must be >= 2, got {}", self.n_sites)));
        }
        for s in self.s.iter().flat_map(Spins::to_vec) {
            let dim = (s.dim() as u128).checked_pow(self.n_sites as u32);
            if dim.is_none_or(|d| d > MAX_DIM as u128) {
                return Err(("s", format!("spin {s} on {} sites exceeds the dimension limit {MAX_DIM}", self.n_sites)));
            }
        }
        if matches!(&self.s, Some(Spins::Many(v)) if v.is_empty()) {
            return Err(("s", "spin list is empty".into()));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(("beta", format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !(self.t_int > 0.0) || !self.t_int.is_finite() {
            return Err(("t_int", format!("t_int must be > 0, got {}", self.t_int)));
        }
        for (key, v) in [("coupling", self.coupling), ("field", self.field), ("omega", self.omega)] {
            if !v.is_finite() {
                return Err((key, format!("{key} must be finite")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return Err(("alpha", format!("alpha must be > 0, got {a}")));
            }
        }
        if self.nnn_middle == Axis::Squared {
            return Err(("nnn_middle", "nnn_middle must be x, y or z".into()));
        }
        if let Some(n) = self.n_eff {
            if n == 0 || n > self.n_sites {
                return Err(("n_eff", format!("n_eff must be in 1..={}", self.n_sites)));
            }
        }
        if !(self.fd_step > 0.0) || !self.fd_step.is_finite() {
            return Err(("fd_step", format!("fd_step must be > 0, got {}", self.fd_step)));
        }
        if self.samples == 0 {
            return Err(("samples", "samples must be >= 1".into()));
        }
        if !(self.basis_t_star >= 0.0) || !self.basis_t_star.is_finite() {
            return Err(("basis_t_star", format!("basis_t_star must be >= 0, got {}", self.basis_t_star)));
        }
        for (key, g) in [("t_star", &self.t_star), ("alpha_grid", &self.alpha_grid), ("basis_grid", &self.basis_grid)] {
            g.validate().map_err(|e| (key, e.to_string()))?;
            if g.len() > 1_000_000 {
                return Err((key, format!("{key} has more than 10^6 points")));
            }
        }
        if self.t_star.min < 0.0 {
            return Err(("t_star", "t_star grid must start at t* >= 0".into()));
        }
        if !(self.alpha_grid.min > 0.0) {
            return Err(("alpha_grid", "alpha_grid must be > 0".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(("values", "sweep values are empty".into()));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(("values", "sweep values must be finite".into()));
        }
        Ok(())
    }

    /// Spins for `experiment`, falling back to its defaults.
    pub fn spins(&self, experiment: Experiment) -> Vec<SpinValue> {
        self.s.as_ref().map(Spins::to_vec).unwrap_or_else(|| experiment.default_spins())
    }

    pub fn model(&self, spin: SpinValue) -> ModelSpec {
        ModelSpec {
            n_sites: self.n_sites,
            spin,
            coupling: self.coupling,
            field: self.field,
            beta: self.beta,
            alpha: self.alpha,
            omega: self.omega,
            t_int: self.t_int,
            nnn_middle: self.nnn_middle,
        }
    }

    pub fn protocol(&self, model: ModelSpec) -> ProtocolConfig {
        let n_eff = self.n_eff.unwrap_or(model.n_sites - 1).min(model.n_sites);
        ProtocolConfig {
            model,
            t_star_grid: self.t_star,
            fd_step: self.fd_step,
            n_eff,
            basis_grid: self.basis_grid,
            finite_difference: self.finite_difference,
        }
    }

    /// The effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        let m = cfg.model(SpinValue::HALF);
        assert_eq!(m, ModelSpec::default());
        assert_eq!(cfg.t_int, 500.0 * PI);
        assert_eq!(cfg.protocol(m).n_eff, 3);
        assert_eq!(cfg.spins(Experiment::Table1).len(), 6);
        assert_eq!(cfg.spins(Experiment::Fig2), vec![SpinValue::from_two_s(3).unwrap()]);
        assert_eq!(cfg.threads, Threads::Auto);
    }

    #[test]
    fn spin_list() {
        let cfg = parse_config("s = [0.5, 1.5]").unwrap();
        assert_eq!(cfg.spins(Experiment::Table1), vec![SpinValue::HALF, SpinValue::from_two_s(3).unwrap()]);
        let one = parse_config("s = 2").unwrap();
        assert_eq!(one.spins(Experiment::Fig1), vec![SpinValue::from_two_s(4).unwrap()]);
        assert!(parse_config("s = 0.7").is_err());
        assert!(parse_config("s = []").is_err());
    }

    #[test]
    fn alpha_engages_next_nearest_neighbours() {
        let cfg = parse_config("alpha = 1.76\ns = 1").unwrap();
        let spins = cfg.spins(Experiment::Table1);
        assert_eq!(cfg.model(spins[0]).alpha, Some(1.76));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = parse_config("N = 4\n").unwrap_err().to_string();
        assert!(err.contains("unknown field"), "{err}");
        assert!(parse_config("[t_star]\nmin = 0\nmax = 1\nstep = 0.1\nextra = 2").is_err());
        assert!(parse_config("[output]\nfolder = \"x\"").is_err());
    }

    #[test]
    fn semantic_errors_name_the_line() {
        let err = parse_config("seed = 3\nbeta = -1.0\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("beta"), "{err}");
        let err = parse_config("beta = \"hot\"").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn tables_and_threads() {
        let cfg = parse_config(
            "threads = 2\n[t_star]\nmin = 0.0\nmax = 10.0\nstep = 0.5\n[output]\nformat = \"both\"\n[sweep]\nparameter = \"beta\"\nvalues = [1, 5]",
        )
        .unwrap();
        assert_eq!(cfg.threads, Threads::Fixed(2));
        assert_eq!(cfg.t_star.len(), 21);
        assert!(cfg.output.format.json() && cfg.output.format.csv());
        assert_eq!(cfg.sweep.parameter, SweepParameter::Beta);
        assert!(parse_config("threads = 0").is_err());
        assert!(parse_config("threads = \"many\"").is_err());
    }

    #[test]
    fn infeasible_values() {
        for doc in ["t_int = 0", "n_sites = 1", "n_eff = 9", "samples = 0", "alpha = -1", "nnn_middle = \"squared\"", "s = 3\nn_sites = 6"] {
            assert!(parse_config(doc).is_err(), "{doc}");
        }
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = parse_config("s = [1, 2.5]\nalpha = 2.0\nexperiment = \"fig4\"").unwrap();
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }
}
