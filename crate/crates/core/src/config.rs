//! Flat `section.key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key has a default and
//! unknown keys are rejected. Overrides use the same syntax.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::bases::BasisFamily;
use crate::exec::Execution;
use crate::gaussian::ReceiverAssignment;
use crate::grid::Grid;
use crate::measurement::Sampling;
use crate::protocols::Protocol;
use crate::resources::{AmplitudeProfile, InputSpec, ResourceQuality};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("{key}: cannot use {value:?}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    R,
    NPoints,
}

/// Which engine computes sweep rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepEngine {
    /// Lattice wavefunctions, one run per seed.
    Lattice,
    /// Phase-space moments; deterministic, no grid limits on `r`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    GaussianPacket,
    RandomSmooth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n_points: usize,
    pub extent: f64,
    pub resource_ideal: bool,
    pub r: f64,
    pub profile: ProfileKind,
    pub center: f64,
    pub width: f64,
    pub profile_seed: u64,
    pub q: f64,
    /// Relative-position squeezing of the phase-space stand-in for the lattice input.
    pub input_squeezing: f64,
    pub seed_base: u64,
    pub seed_count: usize,
    pub sampling: Sampling,
    pub basis: BasisFamily,
    pub assignment: ReceiverAssignment,
    pub test_states: usize,
    /// Fidelity every run must reach; ideal resources always require `1 - 1e-8`.
    pub min_fidelity: Option<f64>,
    pub gram_labels: usize,
    pub sweep_parameter: SweepParameter,
    pub sweep_values: Vec<f64>,
    pub sweep_protocol: Protocol,
    pub sweep_engine: SweepEngine,
    pub format: OutputFormat,
    pub path: Option<PathBuf>,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_points: 128,
            extent: 20.0,
            resource_ideal: true,
            r: 1.0,
            profile: ProfileKind::GaussianPacket,
            center: 0.0,
            width: 1.0,
            profile_seed: 0,
            q: 0.0,
            input_squeezing: 8.0,
            seed_base: 0,
            seed_count: 10,
            sampling: Sampling::Stratified,
            basis: BasisFamily::Pi123,
            assignment: ReceiverAssignment::Standard,
            test_states: 8,
            min_fidelity: None,
            gram_labels: 64,
            sweep_parameter: SweepParameter::R,
            sweep_values: vec![0.5, 1.0, 2.0, 3.0],
            sweep_protocol: Protocol::Entangled,
            sweep_engine: SweepEngine::Lattice,
            format: OutputFormat::Csv,
            path: None,
            execution: Execution::default(),
        }
    }
}

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "grid.n_points",
    "grid.extent",
    "resource.mode",
    "resource.r",
    "input.profile",
    "input.center",
    "input.width",
    "input.seed",
    "input.q",
    "input.squeezing",
    "seeds.base",
    "seeds.count",
    "seeds.sampling",
    "protocol.basis",
    "protocol.assignment",
    "protocol.test_states",
    "protocol.min_fidelity",
    "bases.gram_labels",
    "sweep.parameter",
    "sweep.values",
    "sweep.protocol",
    "sweep.engine",
    "output.format",
    "output.path",
    "run.execution",
];

fn parse<T: FromStr>(key: &str, value: &str) -> ConfigResult<T>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn bad(key: &str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.to_string() }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> ConfigResult<T> {
    options.iter().find(|(name, _)| *name == value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        bad(key, value, format!("expected one of {}", names.join(", ")))
    })
}

fn name_of<T: PartialEq>(value: &T, options: &[(&'static str, T)]) -> &'static str
where
    T: Copy,
{
    options.iter().find(|(_, v)| v == value).map(|(n, _)| *n).expect("every variant is named")
}

const MODES: [(&str, bool); 2] = [("ideal", true), ("finite", false)];
const PROFILES: [(&str, ProfileKind); 2] =
    [("gaussian-packet", ProfileKind::GaussianPacket), ("random-smooth", ProfileKind::RandomSmooth)];
const SAMPLINGS: [(&str, Sampling); 2] = [("stratified", Sampling::Stratified), ("independent", Sampling::Independent)];
const BASES: [(&str, BasisFamily); 2] = [("pi123", BasisFamily::Pi123), ("triple", BasisFamily::Triple)];
const ASSIGNMENTS: [(&str, ReceiverAssignment); 2] =
    [("standard", ReceiverAssignment::Standard), ("swapped", ReceiverAssignment::Swapped)];
const PARAMETERS: [(&str, SweepParameter); 2] = [("r", SweepParameter::R), ("n_points", SweepParameter::NPoints)];
const PROTOCOLS: [(&str, Protocol); 2] = [("single", Protocol::Single), ("entangled", Protocol::Entangled)];
const ENGINES: [(&str, SweepEngine); 2] = [("lattice", SweepEngine::Lattice), ("gaussian", SweepEngine::Gaussian)];
const FORMATS: [(&str, OutputFormat); 2] = [("csv", OutputFormat::Csv), ("json", OutputFormat::Json)];
const EXECUTIONS: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

impl RunConfig {
    pub fn from_text(text: &str) -> ConfigResult<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> ConfigResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_pair(line).ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.into() })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Apply one `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> ConfigResult<()> {
        let (key, value) = split_pair(pair).ok_or_else(|| ConfigError::Syntax { line: 0, text: pair.into() })?;
        self.set(key, value)
    }

    pub fn set(&mut self, key: &str, value: &str) -> ConfigResult<()> {
        match key {
            "grid.n_points" => self.n_points = parse(key, value)?,
            "grid.extent" => self.extent = parse(key, value)?,
            "resource.mode" => self.resource_ideal = choice(key, value, &MODES)?,
            "resource.r" => self.r = parse(key, value)?,
            "input.profile" => self.profile = choice(key, value, &PROFILES)?,
            "input.center" => self.center = parse(key, value)?,
            "input.width" => self.width = parse(key, value)?,
            "input.seed" => self.profile_seed = parse(key, value)?,
            "input.q" => self.q = parse(key, value)?,
            "input.squeezing" => self.input_squeezing = parse(key, value)?,
            "seeds.base" => self.seed_base = parse(key, value)?,
            "seeds.count" => self.seed_count = parse(key, value)?,
            "seeds.sampling" => self.sampling = choice(key, value, &SAMPLINGS)?,
            "protocol.basis" => self.basis = choice(key, value, &BASES)?,
            "protocol.assignment" => self.assignment = choice(key, value, &ASSIGNMENTS)?,
            "protocol.test_states" => self.test_states = parse(key, value)?,
            "protocol.min_fidelity" => self.min_fidelity = if value.is_empty() { None } else { Some(parse(key, value)?) },
            "bases.gram_labels" => self.gram_labels = parse(key, value)?,
            "sweep.parameter" => self.sweep_parameter = choice(key, value, &PARAMETERS)?,
            "sweep.values" => {
                self.sweep_values = value
                    .split(',')
                    .map(|v| v.trim())
                    .filter(|v| !v.is_empty())
                    .map(|v| parse(key, v))
                    .collect::<ConfigResult<_>>()?
            }
            "sweep.protocol" => self.sweep_protocol = choice(key, value, &PROTOCOLS)?,
            "sweep.engine" => self.sweep_engine = choice(key, value, &ENGINES)?,
            "output.format" => self.format = choice(key, value, &FORMATS)?,
            "output.path" => self.path = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "run.execution" => self.execution = choice(key, value, &EXECUTIONS)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Current value of every key, in [`KEYS`] order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let values = vec![
            self.n_points.to_string(),
            self.extent.to_string(),
            name_of(&self.resource_ideal, &MODES).to_string(),
            self.r.to_string(),
            name_of(&self.profile, &PROFILES).to_string(),
            self.center.to_string(),
            self.width.to_string(),
            self.profile_seed.to_string(),
            self.q.to_string(),
            self.input_squeezing.to_string(),
            self.seed_base.to_string(),
            self.seed_count.to_string(),
            name_of(&self.sampling, &SAMPLINGS).to_string(),
            name_of(&self.basis, &BASES).to_string(),
            name_of(&self.assignment, &ASSIGNMENTS).to_string(),
            self.test_states.to_string(),
            self.min_fidelity.map(|f| f.to_string()).unwrap_or_default(),
            self.gram_labels.to_string(),
            name_of(&self.sweep_parameter, &PARAMETERS).to_string(),
            self.sweep_values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            name_of(&self.sweep_protocol, &PROTOCOLS).to_string(),
            name_of(&self.sweep_engine, &ENGINES).to_string(),
            name_of(&self.format, &FORMATS).to_string(),
            self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            name_of(&self.execution, &EXECUTIONS).to_string(),
        ];
        KEYS.iter().copied().zip(values).collect()
    }

    /// Render as a configuration file that parses back to `self`.
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn as_map(&self) -> BTreeMap<&'static str, String> {
        self.pairs().into_iter().collect()
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> ConfigResult<()> {
        self.grid().map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?;
        if !self.resource_ideal && !(self.r.is_finite() && self.r >= 0.0) {
            return Err(bad("resource.r", &self.r.to_string(), "squeezing must be finite and non-negative"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(bad("input.width", &self.width.to_string(), "width must be positive"));
        }
        if !self.q.is_finite() || !self.center.is_finite() {
            return Err(ConfigError::Invalid("input.q and input.center must be finite".into()));
        }
        if !(self.input_squeezing.is_finite() && self.input_squeezing > 0.0) {
            return Err(bad("input.squeezing", &self.input_squeezing.to_string(), "must be positive"));
        }
        if self.seed_count == 0 {
            return Err(bad("seeds.count", "0", "need at least one run"));
        }
        if self.test_states < 2 {
            return Err(bad("protocol.test_states", &self.test_states.to_string(), "need at least two test states"));
        }
        if let Some(f) = self.min_fidelity {
            if !(0.0..=1.0).contains(&f) {
                return Err(bad("protocol.min_fidelity", &f.to_string(), "must lie in [0, 1]"));
            }
        }
        if self.gram_labels == 0 {
            return Err(bad("bases.gram_labels", "0", "need at least one label"));
        }
        if self.sweep_values.is_empty() {
            return Err(bad("sweep.values", "", "need at least one value"));
        }
        for v in &self.sweep_values {
            let ok = match self.sweep_parameter {
                SweepParameter::R => v.is_finite() && *v >= 0.0,
                SweepParameter::NPoints => v.fract() == 0.0 && *v >= 2.0,
            };
            if !ok {
                return Err(bad("sweep.values", &v.to_string(), "not a valid value for the sweep parameter"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> crate::Result<Grid> {
        Grid::new(self.n_points, self.extent)
    }

    pub fn quality(&self) -> ResourceQuality {
        if self.resource_ideal {
            ResourceQuality::Ideal
        } else {
            ResourceQuality::Finite { r: self.r }
        }
    }

    pub fn input_spec(&self) -> InputSpec {
        let profile = match self.profile {
            ProfileKind::GaussianPacket => AmplitudeProfile::GaussianPacket { center: self.center, width: self.width },
            ProfileKind::RandomSmooth => AmplitudeProfile::RandomSmooth { seed: self.profile_seed },
        };
        InputSpec { profile, q: self.q }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.seed_count as u64).map(|i| self.seed_base.wrapping_add(i)).collect()
    }
}

fn split_pair(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k, v.trim()))
}
