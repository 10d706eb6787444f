//! Experiment configuration (TOML). Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use mtbcs_core::invert::{FieldSource, Strategy};
use mtbcs_core::sbl::SolverConfig;
use mtbcs_core::scenario::{
    BackgroundMedium, FrequencyPlan, ImagingScenario, InversionGrid, MeasurementSetup, Phantom,
};
use serde::{Deserialize, Serialize};

use crate::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default = "default_eps")]
    pub rel_permittivity: f64,
    #[serde(default = "default_sigma")]
    pub conductivity: f64,
    #[serde(default = "default_side")]
    pub side_length: f64,
    #[serde(default = "default_cells")]
    pub cells_per_side: usize,
    #[serde(default = "default_views")]
    pub num_views: usize,
    #[serde(default = "default_height")]
    pub antenna_height: f64,
    #[serde(default = "default_fmin")]
    pub f_min: f64,
    #[serde(default = "default_fmax")]
    pub f_max: f64,
    #[serde(default = "default_freqs")]
    pub num_freqs: usize,
    /// Built-in phantom name; exclusive with `contrast_csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<String>,
    /// Ground truth as a row-major `re,im` CSV at the band center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub delta1: f64,
    pub delta2: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub recompute_every: usize,
    pub field_model: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            delta1: d.delta1,
            delta2: d.delta2,
            tol: d.tol,
            max_iters: d.max_iters,
            recompute_every: d.recompute_every,
            field_model: FieldSource::IncidentApproximation.name().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub strategies: Vec<String>,
    /// `inf` marks noiseless data.
    pub snr_db: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub oversample: usize,
    /// Also write every data operator in `synth`.
    #[serde(default)]
    pub dump_operators: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.iter().map(|s| s.name().to_string()).collect(),
            snr_db: vec![35.0],
            seeds: vec![0],
            output_dir: PathBuf::from("out"),
            oversample: 2,
            dump_operators: false,
        }
    }
}

/// Optional time-domain noise applied to ingested total-field radargrams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub snr_db: f64,
    pub seed: u64,
}

fn default_eps() -> f64 {
    4.0
}
fn default_sigma() -> f64 {
    1e-3
}
fn default_side() -> f64 {
    0.8
}
fn default_cells() -> usize {
    20
}
fn default_views() -> usize {
    20
}
fn default_height() -> f64 {
    0.1
}
fn default_fmin() -> f64 {
    200e6
}
fn default_fmax() -> f64 {
    600e6
}
fn default_freqs() -> usize {
    9
}

/// Checked, ready-to-use form of an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct Validated {
    pub scenario: ImagingScenario,
    pub phantom: Option<Phantom>,
    pub solver: SolverConfig,
    pub field_source: FieldSource,
    pub strategies: Vec<Strategy>,
}

fn bad(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            AppError::Config(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<Validated, AppError> {
        let s = &self.scenario;
        let medium = BackgroundMedium::new(s.rel_permittivity, s.conductivity).map_err(|e| bad(e.to_string()))?;
        let grid = InversionGrid::below_interface(s.side_length, s.cells_per_side).map_err(|e| bad(e.to_string()))?;
        let setup = MeasurementSetup::spanning(&grid, s.num_views, s.antenna_height).map_err(|e| bad(e.to_string()))?;
        let plan = FrequencyPlan::new(s.f_min, s.f_max, s.num_freqs).map_err(|e| bad(e.to_string()))?;
        let phantom = match (&s.phantom, &s.contrast_csv) {
            (Some(_), Some(_)) => return Err(bad("scenario.phantom and scenario.contrast_csv are exclusive")),
            (Some(name), None) => Some(name.parse::<Phantom>().map_err(|e| bad(e.to_string()))?),
            _ => None,
        };
        let v = &self.solver;
        let solver = SolverConfig {
            delta1: v.delta1,
            delta2: v.delta2,
            tol: v.tol,
            max_iters: v.max_iters,
            recompute_every: v.recompute_every,
            ..SolverConfig::default()
        };
        solver.validate().map_err(|e| bad(e.to_string()))?;
        let field_source = v.field_model.parse::<FieldSource>().map_err(|e| bad(e.to_string()))?;
        let r = &self.run;
        if r.strategies.is_empty() {
            return Err(bad("run.strategies must name at least one strategy"));
        }
        let mut strategies = Vec::new();
        for name in &r.strategies {
            let k = name.parse::<Strategy>().map_err(|e| bad(e.to_string()))?;
            if strategies.contains(&k) {
                return Err(bad(format!("strategy `{name}` listed twice")));
            }
            strategies.push(k);
        }
        if r.snr_db.is_empty() {
            return Err(bad("run.snr_db must not be empty"));
        }
        if let Some(x) = r.snr_db.iter().find(|x| x.is_nan() || **x == f64::NEG_INFINITY) {
            return Err(bad(format!("invalid SNR {x} dB")));
        }
        if r.seeds.is_empty() {
            return Err(bad("run.seeds must not be empty"));
        }
        if r.oversample == 0 {
            return Err(bad("run.oversample must be >= 1"));
        }
        if let Some(ing) = &self.ingest {
            if ing.snr_db.is_nan() || ing.snr_db == f64::NEG_INFINITY {
                return Err(bad(format!("invalid ingest SNR {} dB", ing.snr_db)));
            }
        }
        Ok(Validated {
            scenario: ImagingScenario { medium, grid, setup, plan },
            phantom,
            solver,
            field_source,
            strategies,
        })
    }
}
