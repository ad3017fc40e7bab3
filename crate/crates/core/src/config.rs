//! Experiment configuration: one JSON document with a schema version.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{make_gh_shift, make_heat, make_rotation, make_scalar, make_transport, GhShiftModel, TransportModel, WeightConvention};
use crate::semigroup::{MatrixSemigroup, Semigroup};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Real generator in row-major order.
    Matrix { rows: usize, data: Vec<f64> },
    Scalar { rate: f64 },
    Heat {
        n: usize,
        #[serde(default = "default_length")]
        length: f64,
    },
    Transport { theta: f64, n: usize, h: f64 },
    Rotation { theta: f64 },
    GhShift {
        m: usize,
        h: f64,
        #[serde(default = "default_convention")]
        convention: WeightConvention,
    },
}

fn default_length() -> f64 {
    std::f64::consts::PI
}

fn default_convention() -> WeightConvention {
    WeightConvention::ExpNegAbs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSpec {
    Zero,
    /// Jumps of size `scale · δ(ε)`.
    Constant {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · δ(ε) · ρ^i`.
    Decaying {
        #[serde(default = "one")]
        scale: f64,
        rho: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for JumpSpec {
    fn default() -> Self {
        Self::Constant { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `{k · step}^dim` inside `[-half_width, half_width]^dim`.
    Box { half_width: f64, step: f64 },
    /// Points on a circle in the first two coordinates.
    Circle { n: usize, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceSpec {
    pub grid: GridSpec,
    pub delta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub t_max: f64,
}

impl Default for RecurrenceSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec::Box {
                half_width: 1.0,
                step: 0.1,
            },
            delta: 0.02,
            r: 1.0,
            t_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventSpec {
    pub omega_max: f64,
    pub samples: usize,
}

impl Default for ResolventSpec {
    fn default() -> Self {
        Self {
            omega_max: 100.0,
            samples: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Number of legs.
    #[serde(default = "default_length_n")]
    pub orbit_length: usize,
    #[serde(default)]
    pub jumps: JumpSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples_per_leg: usize,
    /// Lower bound on leg durations; the solver may raise it.
    #[serde(default = "one", rename = "R_min")]
    pub r_min: f64,
    /// Initial point; defaults to the normalized all-ones vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub recurrence: RecurrenceSpec,
    #[serde(default)]
    pub resolvent: ResolventSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_epsilon() -> f64 {
    1e-2
}

fn default_length_n() -> usize {
    100
}

fn default_samples() -> usize {
    8
}

impl ExperimentConfig {
    pub fn with_model(model: ModelSpec) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model,
            epsilon: default_epsilon(),
            orbit_length: default_length_n(),
            jumps: JumpSpec::default(),
            seed: 0,
            samples_per_leg: default_samples(),
            r_min: 1.0,
            initial: None,
            recurrence: RecurrenceSpec::default(),
            resolvent: ResolventSpec::default(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(format!("config: {msg}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad(&format!("unsupported schema_version {}", self.schema_version));
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.orbit_length == 0 {
            return bad("orbit_length must be positive");
        }
        if self.samples_per_leg == 0 {
            return bad("samples_per_leg must be positive");
        }
        if !(self.r_min > 0.0) {
            return bad("R_min must be positive");
        }
        match self.jumps {
            JumpSpec::Constant { scale } | JumpSpec::Decaying { scale, .. } if !(0.0..=1.0).contains(&scale) => {
                return bad("jump scale must lie in [0, 1]");
            }
            JumpSpec::Decaying { rho, .. } if !(0.0..1.0).contains(&rho) => return bad("rho must lie in [0, 1)"),
            _ => {}
        }
        if let ModelSpec::Matrix { rows, data } = &self.model {
            if *rows == 0 || data.len() != rows * rows {
                return bad("matrix data must have rows² entries");
            }
        }
        let rec = &self.recurrence;
        if !(rec.delta > 0.0 && rec.r > 0.0 && rec.t_max >= rec.r) {
            return bad("recurrence needs delta > 0 and 0 < R <= t_max");
        }
        if self.resolvent.samples < 3 || !(self.resolvent.omega_max > 0.0) {
            return bad("resolvent needs omega_max > 0 and at least 3 samples");
        }
        if let Some(x) = &self.initial {
            let model = self.build_model()?;
            if x.len() != model.semigroup().dim() {
                return bad("initial point has the wrong dimension");
            }
        } else {
            self.build_model()?;
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        Ok(match &self.model {
            ModelSpec::Matrix { rows, data } => Model::Matrix(MatrixSemigroup::from_real(*rows, data)?),
            ModelSpec::Scalar { rate } => Model::Matrix(make_scalar(*rate)),
            ModelSpec::Heat { n, length } => Model::Matrix(make_heat(*n, *length)?.semigroup),
            ModelSpec::Transport { theta, n, h } => Model::Transport(make_transport(*theta, *n, *h)?),
            ModelSpec::Rotation { theta } => Model::Matrix(make_rotation(*theta)?),
            ModelSpec::GhShift { m, h, convention } => Model::GhShift(make_gh_shift(*m, *h, *convention)?),
        })
    }
}

/// A built model.
#[derive(Debug, Clone)]
pub enum Model {
    Matrix(MatrixSemigroup),
    Transport(TransportModel),
    GhShift(GhShiftModel),
}

impl Model {
    pub fn semigroup(&self) -> &dyn Semigroup {
        match self {
            Model::Matrix(m) => m,
            Model::Transport(t) => t,
            Model::GhShift(g) => g,
        }
    }
}
