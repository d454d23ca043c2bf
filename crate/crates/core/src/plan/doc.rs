use super::orientation::OrientationPolicy;
use super::PlanError;
use crate::dmp::DmpConfig;
use crate::plant::{Injection, PlantConfig, TaskSpec};
use crate::surface::SurfaceDoc;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentModeDoc {
    FreeSpace,
    HybridSurface,
}

/// Rest-to-rest minimum-jerk demonstration through waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointDemo {
    pub duration: f64,
    /// Fraction of the duration at which each waypoint is reached; defaults to even spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    pub points: Vec<[f64; 3]>,
}

impl WaypointDemo {
    pub fn fractions(&self) -> Vec<f64> {
        self.fractions.clone().unwrap_or_else(|| {
            let n = self.points.len().max(2) - 1;
            (0..=n).map(|k| k as f64 / n as f64).collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub id: String,
    pub mode: SegmentModeDoc,
    /// Free-space segment that runs close to `surface` (corrections toward it are limited).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approach: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<String>,
    /// Path to a fitted model document, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<WaypointDemo>,
    /// Maximum correction per channel; zero makes a channel non-correctable.
    #[serde(default)]
    pub scaling: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_includes_force: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<OrientationPolicy>,
    /// Calibrated sub-procedure: corrections are disabled.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub calibrated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<SurfaceDoc>,
}

/// Scenario-wide defaults, overridable per segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Defaults {
    pub gamma: f64,
    pub stiffness: f64,
    pub edge_margin: f64,
    pub standoff_band: f64,
    pub tau_max: f64,
    pub debounce_ticks: u32,
    pub rate_includes_force: bool,
    pub dmp: DmpConfig,
    /// Sample step used when fitting inline demonstrations (s).
    pub fit_dt: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            stiffness: crate::correction::DEFAULT_STIFFNESS,
            edge_margin: 0.005,
            standoff_band: crate::correction::DEFAULT_STANDOFF_BAND,
            tau_max: 10.0,
            debounce_ticks: 3,
            rate_includes_force: false,
            dmp: DmpConfig::default(),
            fit_dt: 0.001,
        }
    }
}

/// Complete task description (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Control step (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Optional hard stop for the session (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub surfaces: Vec<SurfaceEntry>,
    pub segments: Vec<SegmentDoc>,
}

fn default_dt() -> f64 {
    0.001
}

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let doc: ScenarioDoc = toml::from_str(text).map_err(|e| PlanError::Document(e.to_string()))?;
        if doc.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(PlanError::Document(format!(
                "unsupported scenario schema version {} (expected {})",
                doc.schema_version, SCENARIO_SCHEMA_VERSION
            )));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path).map_err(|e| PlanError::Document(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, PlanError> {
        toml::to_string(self).map_err(|e| PlanError::Document(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), PlanError> {
        std::fs::write(path, self.to_toml()?).map_err(|e| PlanError::Document(format!("{}: {e}", path.display())))
    }
}
