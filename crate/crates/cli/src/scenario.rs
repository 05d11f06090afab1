//! Declarative scenario files (TOML).

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use windobs::estimator::UkfConfig;
use windobs::models::{Control, SensorConfig, SensorKind, StateConfig};
use windobs::observability::{AlgebraSpec, TolPolicy};
use windobs::simulator::{BodyState, ClassifyConfig, ControlSchedule, NoiseSpec, TrajectoryLabel, WindSignal};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub model: StateConfig,
    #[serde(default = "default_sensors")]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub controls: Controls,
    #[serde(default)]
    pub algebra: AlgebraSection,
    #[serde(default)]
    pub points: Points,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default)]
    pub filter: UkfConfig,
    #[serde(default)]
    pub queries: Queries,
    /// Golden values checked by every command.
    #[serde(default)]
    pub expect: Expect,
}

fn default_sensors() -> SensorConfig {
    SensorConfig::new(SensorKind::CalibratedVision)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Controls {
    /// Actuation channels in the algebra and bound to 1 at the base point.
    pub active: Vec<Control>,
    /// Control law for simulation; defaults to constant zero input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ControlSchedule>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraSection {
    pub order: u8,
    pub cross_terms: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<String>>,
}

impl Default for AlgebraSection {
    fn default() -> Self {
        AlgebraSection { order: 1, cross_terms: false, terms: None }
    }
}

impl AlgebraSection {
    pub fn spec(&self, controls: &[Control]) -> AlgebraSpec {
        AlgebraSpec {
            order: self.order,
            controls: controls.to_vec(),
            cross_terms: self.cross_terms,
            terms: self.terms.clone(),
        }
    }
}

/// One probe of the override grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub name: String,
    /// Values replacing the prime-point defaults (states, parameters or
    /// controls).
    #[serde(default)]
    pub set: IndexMap<String, f64>,
    /// Replaces the scenario's active controls for this probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<Control>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Points {
    /// Overrides applied at the base point.
    pub base: IndexMap<String, f64>,
    pub probes: Vec<Probe>,
    pub tolerance: TolPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Simulation {
    pub dt: f64,
    pub duration: f64,
    /// `[v_par, v_perp, phi, phi_dot]` at t = 0.
    pub initial: [f64; 4],
    pub wind: WindSignal,
    pub noise: NoiseSpec,
    pub classify: ClassifyConfig,
    /// Number of trajectory samples used for the rank verdicts.
    pub rank_samples: usize,
}

impl Default for Simulation {
    fn default() -> Self {
        Simulation {
            dt: 0.01,
            duration: 10.0,
            initial: [1.0, 0.0, 0.0, 0.0],
            wind: WindSignal::constant(0.5, std::f64::consts::FRAC_PI_2),
            noise: NoiseSpec::default(),
            classify: ClassifyConfig::default(),
            rank_samples: 8,
        }
    }
}

impl Simulation {
    pub fn initial_state(&self) -> BodyState {
        let [a, b, c, d] = self.initial;
        BodyState::new(a, b, c, d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Queries {
    /// Expressions tested by augmentation, e.g. `"zeta"` or `"phi - zeta"`.
    pub exprs: Vec<String>,
    /// Also test every extended-state variable.
    pub each_var: bool,
}

impl Default for Queries {
    fn default() -> Self {
        Queries { exprs: vec!["zeta".into()], each_var: false }
    }
}

/// Expected verdicts at one probe.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeExpect {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Queries that must be observable at the probe.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub observable: Vec<String>,
    /// Queries that must be unobservable; a sensor undefined at the probe
    /// also counts.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unobservable: Vec<String>,
    /// The sensors must be undefined at the probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expect {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Query label to augmented rank.
    #[serde(skip_serializing_if = "IndexMap::is_empty")]
    pub augmented: IndexMap<String, usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub observable: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unobservable: Vec<String>,
    #[serde(skip_serializing_if = "IndexMap::is_empty")]
    pub probes: IndexMap<String, ProbeExpect>,
    /// Trajectory label from both the predicate and the rank classifier.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<TrajectoryLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_zeta_error_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_zeta_error_min: Option<f64>,
    /// Final-20% circular RMSE of zeta below the first-20% one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converging: Option<bool>,
}

impl Scenario {
    pub fn from_toml(text: &str, path: &str) -> Result<Scenario, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse { path: path.to_string(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Scenario::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// Directory of bundled scenarios: `WINDOBS_SCENARIO_DIR` if set, else the
/// `scenarios/` directory of the source tree.
pub fn scenario_dir() -> PathBuf {
    match std::env::var_os("WINDOBS_SCENARIO_DIR") {
        Some(d) => PathBuf::from(d),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios"),
    }
}

/// Resolves a scenario argument: an existing path, or a bundled scenario
/// name with or without the `.toml` extension.
pub fn resolve(arg: &str) -> PathBuf {
    let p = PathBuf::from(arg);
    if p.exists() {
        return p;
    }
    let dir = scenario_dir();
    let named = dir.join(arg);
    if named.exists() {
        return named;
    }
    dir.join(format!("{arg}.toml"))
}

/// Bundled scenario files in name order.
pub fn bundled() -> std::io::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(scenario_dir())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    out.sort();
    Ok(out)
}
