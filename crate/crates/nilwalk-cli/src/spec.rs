//! Experiment specification files.

use std::path::{Path, PathBuf};

use nilwalk::algebra::AlgebraJson;
use nilwalk::measure::{IncrementMeasure, MeasureJson, Num};
use nilwalk::presets::preset;
use nilwalk::stats::TestFunction;
use nilwalk::support::PiecewisePath;
use nilwalk::walk::{Recentering, Truncation};
use nilwalk::{Error, LieAlgebra, Result};
use serde::{Deserialize, Serialize};

/// A preset name, a path to an algebra JSON file, or an inline algebra.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraRef {
    Named(String),
    Inline(AlgebraJson),
}

/// A path to a measure JSON file or an inline measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureRef {
    Path(String),
    Inline(MeasureJson),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub algebra: AlgebraRef,
    /// Drift `X̄` in the algebra basis; defaults to the measure mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_trials() -> usize {
    100_000
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1e-3
}

fn default_dc_trials() -> usize {
    50
}

/// Where the limiting value `ν(f)` of a Berry–Esseen curve comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reference {
    /// Quadrature against the Heisenberg heat kernel.
    Levy,
    Diffusion {
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_dt")]
        dt: f64,
    },
    Value {
        value: f64,
        #[serde(default)]
        std_error: f64,
    },
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Diffusion { trials: default_trials(), dt: default_dt() }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySource {
    /// Closed form, centered Heisenberg with identity covariance only.
    Levy,
    /// Kernel estimate from a diffusion batch at time 1.
    #[default]
    Kde,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Algebra,
    Filtration,
    SimulateWalk {
        steps: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_true")]
        rescale: bool,
        #[serde(default)]
        recentering: Recentering,
        #[serde(default)]
        truncation: Truncation,
    },
    SimulateDiffusion {
        #[serde(default = "default_one")]
        horizon: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_trials")]
        trials: usize,
    },
    CompareClt {
        steps: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_dt")]
        dt: f64,
    },
    BerryEsseen {
        steps: Vec<usize>,
        #[serde(default = "default_trials")]
        trials: usize,
        function: TestFunction,
        #[serde(default)]
        reference: Reference,
    },
    Llt {
        steps: usize,
        samples: usize,
        function: TestFunction,
        #[serde(default)]
        density: DensitySource,
        #[serde(default = "default_trials")]
        kde_trials: usize,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default)]
        left_deviation: Option<Vec<f64>>,
        #[serde(default)]
        right_deviation: Option<Vec<f64>>,
    },
    Support {
        #[serde(default)]
        controls: Vec<Vec<(Vec<Num>, Num)>>,
        #[serde(default)]
        paths: Vec<PiecewisePath<Num>>,
        #[serde(default)]
        steps: Option<usize>,
        #[serde(default = "default_trials")]
        trials: usize,
    },
    GaussianCheck,
    AsympClose {
        other: MeasureRef,
    },
    DcCheck {
        generators: Vec<Vec<Num>>,
        #[serde(default = "default_dc_trials")]
        trials: usize,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Algebra => "algebra",
            Task::Filtration => "filtration",
            Task::SimulateWalk { .. } => "simulate-walk",
            Task::SimulateDiffusion { .. } => "simulate-diffusion",
            Task::CompareClt { .. } => "compare-clt",
            Task::BerryEsseen { .. } => "berry-esseen",
            Task::Llt { .. } => "llt",
            Task::Support { .. } => "support",
            Task::GaussianCheck => "gaussian-check",
            Task::AsympClose { .. } => "asymp-close",
            Task::DcCheck { .. } => "dc-check",
        }
    }

    pub fn stochastic(&self) -> bool {
        match self {
            Task::SimulateWalk { .. }
            | Task::SimulateDiffusion { .. }
            | Task::CompareClt { .. }
            | Task::BerryEsseen { .. }
            | Task::Llt { .. }
            | Task::DcCheck { .. } => true,
            Task::Support { steps, .. } => steps.is_some(),
            _ => false,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    Ok(serde_json::from_str(&read(path)?)?)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_algebra(r: &AlgebraRef, base: &Path) -> Result<LieAlgebra> {
    match r {
        AlgebraRef::Named(s) if s.ends_with(".json") => {
            let j: AlgebraJson = serde_json::from_str(&read(&resolve(base, s))?)?;
            LieAlgebra::from_json(&j)
        }
        AlgebraRef::Named(s) => preset(s),
        AlgebraRef::Inline(j) => LieAlgebra::from_json(j),
    }
}

pub fn load_measure(r: &MeasureRef, base: &Path) -> Result<IncrementMeasure> {
    let j = match r {
        MeasureRef::Path(s) => serde_json::from_str(&read(&resolve(base, s))?)?,
        MeasureRef::Inline(j) => j.clone(),
    };
    IncrementMeasure::from_json(j)
}

pub fn missing(what: &str, task: &Task) -> Error {
    Error::InvalidParameter(format!("task {} needs {what}", task.name()))
}
