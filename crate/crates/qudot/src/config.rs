//! Scenario documents.
//!
//! A scenario is one JSON object. Every section rejects unknown keys, and
//! units are not configurable: lengths are nm, energies meV, times ps. The
//! optional `units` header exists so that a file states its convention; any
//! other value is an error.

use std::path::{Path, PathBuf};

use qudot_core::gates::GateOptions;
use qudot_core::layout::{LayoutError, Permittivity};
use qudot_core::tune::OptimizerOptions;
use qudot_core::{build_register, Geometry, RegisterLayout, Scheme};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for scans. One keeps runs trivially reproducible.
    #[serde(default = "one")]
    pub threads: usize,
    #[serde(default)]
    pub layout: Option<LayoutSection>,
    #[serde(default)]
    pub physics: GateOptions,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Units {
    pub length: String,
    pub energy: String,
    pub time: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "nm".into(),
            energy: "meV".into(),
            time: "ps".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    pub scheme: Scheme,
    pub qudits: usize,
    pub levels: usize,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub permittivity: PermittivitySpec,
    /// Screening of inter-qudit pairs involving dots behind the trenches.
    #[serde(default)]
    pub trench_screening: f64,
    /// Per-pair overrides applied after the trench default.
    #[serde(default)]
    pub screening: Vec<ScreeningOverride>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PermittivitySpec {
    Uniform(f64),
    Regions(Permittivity),
}

impl Default for PermittivitySpec {
    fn default() -> Self {
        PermittivitySpec::Regions(Permittivity::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningOverride {
    pub sites: [usize; 2],
    pub s: f64,
}

impl LayoutSection {
    pub fn build(&self) -> Result<RegisterLayout, LayoutError> {
        let eps = match self.permittivity {
            PermittivitySpec::Uniform(e) => Permittivity::uniform(e),
            PermittivitySpec::Regions(p) => p,
        };
        for (name, v) in [("substrate", eps.substrate), ("auxiliary", eps.auxiliary)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LayoutError::InvalidParameters(format!(
                    "permittivity `{name}` must be positive, got {v}"
                )));
            }
        }
        let mut layout = build_register(self.scheme, self.qudits, self.levels, &self.geometry)?
            .with_permittivity(eps)
            .with_trench_screening(self.trench_screening)?;
        for o in &self.screening {
            layout.set_screening(o.sites[0], o.sites[1], o.s)?;
        }
        Ok(layout)
    }
}

/// Parameters of each subcommand; only the one being run must be present.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub dim_scan: Option<DimScanTask>,
    pub gate: Option<GateTask>,
    pub simulate: Option<SimulateTask>,
    pub optimize: Option<OptimizeTask>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimScanTask {
    /// Total number of donor sites K.
    pub k: usize,
    #[serde(default = "d_min")]
    pub d_min: usize,
    #[serde(default = "d_max")]
    pub d_max: usize,
}

fn d_min() -> usize {
    2
}

fn d_max() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateTask {
    ControlledPhase {
        participants: Vec<usize>,
        phi: f64,
        #[serde(default)]
        crosstalk: Option<CrosstalkTask>,
        #[serde(default)]
        permittivity_scan: Vec<f64>,
    },
    KPhase {
        participants: Vec<usize>,
        phi: f64,
        #[serde(default)]
        crosstalk: Option<CrosstalkTask>,
        #[serde(default)]
        permittivity_scan: Vec<f64>,
    },
    SingleQudit {
        qudit: usize,
        target: TargetSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkTask {
    pub screening: Vec<f64>,
    pub spectators: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Named(NamedTarget),
    /// Rows of `[re, im]` entries.
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedTarget {
    Identity,
    /// `|d> → |d+1>`, last level back to the first.
    Cyclic,
    /// Discrete Fourier transform, the `D`-level Hadamard analogue.
    Fourier,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    /// Schedule JSON, relative to the scenario file.
    pub schedule: PathBuf,
    pub initial: InitialState,
    #[serde(default)]
    pub frame: Frame,
    #[serde(default)]
    pub export_hamiltonian: bool,
    #[serde(default)]
    pub export_propagator: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Computational state, 1-based level per qudit.
    Levels(Vec<usize>),
    Index(usize),
    Amplitudes(Vec<[f64; 2]>),
    /// Equal superposition of every configuration.
    Uniform,
    /// Equal superposition of the computational configurations.
    UniformComputational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    #[default]
    Lab,
    /// Static Coulomb phases removed, as in gate reports.
    Idle,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "benchmark", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizeTask {
    /// One-qutrit transfer; parameters `[duration, Δ]`.
    Transfer {
        #[serde(default = "half")]
        delta: f64,
        /// Start duration as a multiple of the resonant one.
        #[serde(default = "one_f")]
        duration_scale: f64,
        budget: usize,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        optimizer: OptimizerOptions,
    },
    /// Compiled controlled phase; parameters `[Δ, aux offset, wait, transfer]`.
    PhaseGate {
        participants: Vec<usize>,
        phi: f64,
        #[serde(default = "one_f")]
        transfer_scale: f64,
        budget: usize,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        optimizer: OptimizerOptions,
    },
}

fn half() -> f64 {
    0.5
}

fn one_f() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Table formats: `csv` and/or `json`.
    pub formats: Vec<TableFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("qudot-out"),
            formats: vec![TableFormat::Csv],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Json,
}

/// A parsed scenario with the raw bytes it came from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub raw: Vec<u8>,
    /// Directory relative paths inside the scenario resolve against.
    pub base: PathBuf,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config = parse(&raw, &path.display().to_string())?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, raw, base })
    }

    pub fn layout(&self) -> Result<RegisterLayout, CliError> {
        let section = self
            .config
            .layout
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `layout` section".into()))?;
        section.build().map_err(|e| CliError::Config(format!("layout: {e}")))
    }
}

/// Strict parse with the failing field path and source location.
pub fn parse(raw: &[u8], origin: &str) -> Result<ScenarioConfig, CliError> {
    let config: ScenarioConfig = from_json(raw, origin)?;
    if config.units != Units::default() {
        return Err(CliError::Config(format!(
            "{origin}: units are fixed to length=nm, energy=meV, time=ps; got length={}, energy={}, time={}",
            config.units.length, config.units.energy, config.units.time
        )));
    }
    if config.threads == 0 {
        return Err(CliError::Config(format!("{origin}: `threads` must be at least 1")));
    }
    if config.output.formats.is_empty() {
        return Err(CliError::Config(format!("{origin}: `output.formats` is empty")));
    }
    Ok(config)
}

/// Deserializes any JSON document, reporting `origin:line:column` and the
/// path of the offending field.
pub fn from_json<T: for<'de> Deserialize<'de>>(raw: &[u8], origin: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_slice(raw);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { String::new() } else { format!(" at `{path}`") };
        located(origin, e.inner(), &field)
    })?;
    de.end().map_err(|e| located(origin, &e, ""))?;
    Ok(value)
}

fn located(origin: &str, e: &serde_json::Error, field: &str) -> CliError {
    let (line, col) = (e.line(), e.column());
    let msg = e.to_string();
    let msg = msg
        .strip_suffix(&format!(" at line {line} column {col}"))
        .unwrap_or(&msg);
    CliError::Config(format!("{origin}:{line}:{col}{field}: {msg}"))
}
