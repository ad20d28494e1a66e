//! Experiment descriptions, read from TOML or JSON.
//!
//! ```toml
//! model = "keener"
//! solver = "picard"
//! sweep = [1.0, 16.0, 256.0]
//! steps = 1000
//! initial = "bump-in-fast-component"
//!
//! [keener]
//! n = 64
//! d_a = 1e-3
//! ```
//!
//! Unknown keys are errors. Only the section of the selected model may appear.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convergence::{SolverChoice, SweepSetup};
use crate::error::MildError;
use crate::mild::PicardOptions;
use crate::models::custom::build_custom;
use crate::models::keener::{build_keener, KeenerParams, KeenerReaction};
use crate::models::mck::{build_mck, ClipBox, MckParams};
use crate::models::neuro::{build_neuro, pool_of_cells, NeuroParams, PoolGeometry};
use crate::models::thin_layer::build_thin_layer_model;
use crate::models::{ModelPair, ScalarReaction};
use crate::norm::StateVector;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("model construction failed: {0}")]
    Model(#[from] MildError),
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Keener,
    Mck,
    #[serde(rename = "thin_layer", alias = "thin-layer")]
    ThinLayer,
    Neuro,
    CustomMatrix,
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelName::Keener => "keener",
            ModelName::Mck => "mck",
            ModelName::ThinLayer => "thin_layer",
            ModelName::Neuro => "neuro",
            ModelName::CustomMatrix => "custom-matrix",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverSpec {
    #[default]
    Picard,
    Expeuler,
    Both,
}

impl SolverSpec {
    pub fn choices(self) -> Vec<SolverChoice> {
        match self {
            SolverSpec::Picard => vec![SolverChoice::Picard],
            SolverSpec::Expeuler => vec![SolverChoice::Expeuler],
            SolverSpec::Both => vec![SolverChoice::Picard, SolverChoice::Expeuler],
        }
    }
}

impl std::str::FromStr for SolverSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "picard" => Ok(SolverSpec::Picard),
            "expeuler" => Ok(SolverSpec::Expeuler),
            "both" => Ok(SolverSpec::Both),
            other => Err(format!("unknown solver `{other}` (expected picard, expeuler or both)")),
        }
    }
}

/// A named preset or an explicit vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Preset(String),
    Values(Vec<f64>),
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Preset("bump-in-fast-component".into())
    }
}

/// A scalar broadcast over the grid, or one value per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Uniform(f64),
    Cells(Vec<f64>),
}

impl Profile {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            Profile::Uniform(v) => Ok(vec![*v; n]),
            Profile::Cells(v) if v.len() == n => Ok(v.clone()),
            Profile::Cells(v) => Err(bad(field, format!("expected {n} values, got {}", v.len()))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeenerReactionName {
    #[default]
    ClippedCubic,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeenerSection {
    pub n: usize,
    pub d_a: f64,
    pub reaction: KeenerReactionName,
    pub clip: f64,
}

impl Default for KeenerSection {
    fn default() -> Self {
        Self { n: 64, d_a: 1e-3, reaction: KeenerReactionName::ClippedCubic, clip: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MckSection {
    pub n: usize,
    pub params: MckParams,
    pub clip: ClipBox,
}

impl Default for MckSection {
    fn default() -> Self {
        Self { n: 32, params: MckParams::default(), clip: ClipBox::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarReactionName {
    #[default]
    Logistic,
    Tanh,
    None,
}

impl ScalarReactionName {
    fn build(self, rate: f64) -> ScalarReaction {
        match self {
            ScalarReactionName::Logistic => ScalarReaction::logistic(rate),
            ScalarReactionName::Tanh => ScalarReaction::tanh(rate),
            ScalarReactionName::None => ScalarReaction::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThinLayerSection {
    pub nx: usize,
    pub nz: usize,
    pub c: Profile,
    pub d: Profile,
    pub reaction: ScalarReactionName,
    pub rate: f64,
}

impl Default for ThinLayerSection {
    fn default() -> Self {
        Self { nx: 16, nz: 8, c: Profile::Uniform(0.5), d: Profile::Uniform(0.5), reaction: ScalarReactionName::Logistic, rate: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuroSection {
    pub n: usize,
    pub geometry: PoolGeometry,
    /// Production on the outer pool: a rate, or one value per cell.
    pub beta: Profile,
    pub u_sharp: f64,
}

impl Default for NeuroSection {
    fn default() -> Self {
        Self { n: 300, geometry: PoolGeometry::default(), beta: Profile::Uniform(1.0), u_sharp: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSection {
    /// Rows of S.
    pub slow: Vec<Vec<f64>>,
    /// Rows of K.
    pub fast: Vec<Vec<f64>>,
    #[serde(default)]
    pub reaction: ScalarReactionName,
    #[serde(default = "unit")]
    pub rate: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelName,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Perturbation parameters; the model default when absent.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default = "unit")]
    pub tau: f64,
    /// Defaults to 0.1·tau.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Time steps M.
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub seed: u64,
    /// Random probes for the contraction diagnostics.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub picard_tol: Option<f64>,
    #[serde(default)]
    pub picard_max_iter: Option<usize>,
    #[serde(default)]
    pub keener: Option<KeenerSection>,
    #[serde(default)]
    pub mck: Option<MckSection>,
    #[serde(default)]
    pub thin_layer: Option<ThinLayerSection>,
    #[serde(default)]
    pub neuro: Option<NeuroSection>,
    #[serde(default)]
    pub custom: Option<CustomSection>,
}

fn default_steps() -> usize {
    1000
}

fn default_probes() -> usize {
    20
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let field = |path: &serde_path_to_error::Path| match path.to_string().as_str() {
            "." | "" => String::new(),
            p => format!(" in field `{p}`"),
        };
        let cfg: Self = if text.trim_start().starts_with('{') {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse(format!("JSON{}: {}", field(e.path()), e.inner())))?
        } else {
            let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse(format!("TOML: {e}")))?;
            serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse(format!("TOML{}: {}", field(e.path()), e.inner())))?
        };
        cfg.resolve()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Fills defaults and checks ranges and section consistency.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(bad("tau", format!("must be positive and finite, got {}", self.tau)));
        }
        let delta = *self.delta.get_or_insert(0.1 * self.tau);
        if !(0.0 <= delta && delta < self.tau) {
            return Err(bad("delta", format!("need 0 <= delta < tau = {}, got {delta}", self.tau)));
        }
        if self.steps < 2 {
            return Err(bad("steps", format!("need at least 2, got {}", self.steps)));
        }
        if self.probes == 0 {
            return Err(bad("probes", "need at least one probe"));
        }
        if let Some(tol) = self.picard_tol {
            if !(tol > 0.0) {
                return Err(bad("picard_tol", format!("must be positive, got {tol}")));
            }
        }
        if self.picard_max_iter == Some(0) {
            return Err(bad("picard_max_iter", "must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() {
                return Err(bad("sweep", "must not be empty"));
            }
            if let Some(p) = sweep.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
                return Err(bad("sweep", format!("parameters must be positive and finite, got {p}")));
            }
        }

        let present = [
            ("keener", self.keener.is_some(), ModelName::Keener),
            ("mck", self.mck.is_some(), ModelName::Mck),
            ("thin_layer", self.thin_layer.is_some(), ModelName::ThinLayer),
            ("neuro", self.neuro.is_some(), ModelName::Neuro),
            ("custom", self.custom.is_some(), ModelName::CustomMatrix),
        ];
        for (section, given, model) in present {
            if given && model != self.model {
                return Err(bad(section, format!("section given but model = {}", self.model)));
            }
        }
        match self.model {
            ModelName::Keener => {
                self.keener.get_or_insert_with(Default::default);
            }
            ModelName::Mck => {
                self.mck.get_or_insert_with(Default::default);
            }
            ModelName::ThinLayer => {
                self.thin_layer.get_or_insert_with(Default::default);
            }
            ModelName::Neuro => {
                self.neuro.get_or_insert_with(Default::default);
            }
            ModelName::CustomMatrix => {
                if self.custom.is_none() {
                    return Err(bad("custom", "model = custom-matrix needs a [custom] section with `slow` and `fast`"));
                }
            }
        }
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.1 * self.tau)
    }

    pub fn build_model(&self) -> Result<ModelPair, ConfigError> {
        let mp = match self.model {
            ModelName::Keener => {
                let s = self.keener.clone().unwrap_or_default();
                let reaction = match s.reaction {
                    KeenerReactionName::ClippedCubic => KeenerReaction::clipped_cubic(s.clip),
                    KeenerReactionName::Zero => KeenerReaction::zero(),
                };
                build_keener(&KeenerParams::new(s.n, s.d_a, reaction))?
            }
            ModelName::Mck => {
                let s = self.mck.clone().unwrap_or_default();
                build_mck(s.n, &s.params, &s.clip)?
            }
            ModelName::ThinLayer => {
                let s = self.thin_layer.clone().unwrap_or_default();
                let c = s.c.expand(s.nx, "thin_layer.c")?;
                let d = s.d.expand(s.nx, "thin_layer.d")?;
                build_thin_layer_model(s.nx, s.nz, &c, &d, s.reaction.build(s.rate))?
            }
            ModelName::Neuro => {
                let s = self.neuro.clone().unwrap_or_default();
                let beta = match &s.beta {
                    Profile::Uniform(rate) => {
                        pool_of_cells(s.n, &s.geometry).into_iter().map(|k| if k == 2 { *rate } else { 0.0 }).collect()
                    }
                    cells => cells.expand(s.n, "neuro.beta")?,
                };
                build_neuro(&NeuroParams { n: s.n, geometry: s.geometry, beta, u_sharp: s.u_sharp })?
            }
            ModelName::CustomMatrix => {
                let s = self.custom.as_ref().ok_or_else(|| bad("custom", "missing section"))?;
                let slow = matrix_from_rows(&s.slow, "custom.slow")?;
                let fast = matrix_from_rows(&s.fast, "custom.fast")?;
                build_custom(slow, fast, s.reaction.build(s.rate))?
            }
        };
        Ok(mp)
    }

    pub fn initial_state(&self, mp: &ModelPair) -> Result<StateVector, ConfigError> {
        let values = match &self.initial {
            InitialSpec::Preset(name) => mp.preset(name).cloned().ok_or_else(|| {
                let known: Vec<&str> = mp.presets.iter().map(|(n, _)| n.as_str()).collect();
                bad("initial", format!("unknown preset `{name}` for {} (known: {})", mp.name, known.join(", ")))
            })?,
            InitialSpec::Values(v) if v.len() == mp.dim() => DVector::from_column_slice(v),
            InitialSpec::Values(v) => return Err(bad("initial", format!("expected {} values, got {}", mp.dim(), v.len()))),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("initial", "values must be finite"));
        }
        Ok(mp.state(values)?)
    }

    pub fn sweep_params(&self, mp: &ModelPair) -> Vec<f64> {
        self.sweep.clone().unwrap_or_else(|| mp.param_kind.default_sweep())
    }

    pub fn picard_options(&self) -> PicardOptions {
        let mut opts = PicardOptions::default();
        if let Some(tol) = self.picard_tol {
            opts.tol = tol;
            opts.uniform_tol = Some(tol);
        }
        if let Some(m) = self.picard_max_iter {
            opts.max_iter = m;
        }
        opts
    }

    pub fn sweep_setup(&self, mp: &ModelPair, solver: SolverChoice) -> SweepSetup {
        SweepSetup {
            params: self.sweep_params(mp),
            tau: self.tau,
            delta: self.delta(),
            steps: self.steps,
            solver,
            picard: self.picard_options(),
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad(field, "must be a nonempty square matrix given by rows"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
