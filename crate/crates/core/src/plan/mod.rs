//! Task plans: ordered primitive segments with modes, correctable subspaces,
//! orientation policies and the rules for handing corrections across
//! segment boundaries.

mod doc;
pub mod orientation;
mod transition;

pub use doc::{Defaults, ScenarioDoc, SegmentDoc, SegmentModeDoc, SurfaceEntry, WaypointDemo, SCENARIO_SCHEMA_VERSION};
pub use orientation::{orientation_at, OrientationPolicy, OrientationState};
pub use transition::{transition, SegmentEnd, Transition, TransitionRule};

use crate::correction::{CorrectionScaling, InputMapping, RateConfig, SegmentMode};
use crate::dmp::{DmpError, DmpModelDoc, DmpSegmentModel, Demonstration};
use crate::plant::{inject_error, PlantConfig, TaskSpec};
use crate::state::{ChannelKind, ChannelSpec};
use crate::surface::{best_fit_plane, BSplineSurface, PlaneFit, SurfaceDoc, SurfaceError};
use nalgebra::{Matrix3, Vector3};
use std::path::Path;
use thiserror::Error;

/// Largest gap between consecutive segment endpoints accepted at compile time.
pub const POSITION_CONTINUITY_TOL: f64 = 1e-3;
pub const PARAM_CONTINUITY_TOL: f64 = 1e-3;
pub const FORCE_CONTINUITY_TOL: f64 = 0.5;
/// Free/surface handoffs may start this far from the surface point (m).
pub const HANDOFF_TOL: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("scenario document: {0}")]
    Document(String),
    #[error("segment '{segment}': {reason}")]
    Segment { segment: String, reason: String },
    #[error("segments '{from}' -> '{to}': endpoints incompatible ({reason})")]
    Endpoint { from: String, to: String, reason: String },
    #[error("surface '{id}': {source}")]
    Surface { id: String, source: SurfaceError },
    #[error("segment '{segment}' model: {source}")]
    Model { segment: String, source: DmpError },
    #[error("injection: {0}")]
    Injection(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FreeSpace,
    HybridSurface,
}

impl From<SegmentModeDoc> for Mode {
    fn from(m: SegmentModeDoc) -> Self {
        match m {
            SegmentModeDoc::FreeSpace => Mode::FreeSpace,
            SegmentModeDoc::HybridSurface => Mode::HybridSurface,
        }
    }
}

/// A surface with its cached input-mapping plane.
#[derive(Debug, Clone)]
pub struct NamedSurface {
    pub id: String,
    pub surface: BSplineSurface,
    pub plane: PlaneFit,
}

#[derive(Debug, Clone)]
pub struct SegmentSpec {
    pub id: String,
    pub mode: Mode,
    pub approach: bool,
    pub model: DmpSegmentModel,
    pub scaling: CorrectionScaling,
    pub rate: RateConfig,
    pub stiffness: f64,
    pub orientation: OrientationPolicy,
    /// Index into [`BehaviorPlan::surfaces`].
    pub surface: Option<usize>,
    pub calibrated: bool,
    pub edge_margin: f64,
    pub standoff_band: f64,
}

impl SegmentSpec {
    pub fn validation_mode(&self) -> SegmentMode {
        match (self.mode, self.approach) {
            (Mode::HybridSurface, _) => SegmentMode::OnSurface,
            (Mode::FreeSpace, true) => SegmentMode::ApproachDepart,
            (Mode::FreeSpace, false) => SegmentMode::FreeSpace,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BehaviorPlan {
    pub name: String,
    pub dt: f64,
    pub max_time: Option<f64>,
    pub segments: Vec<SegmentSpec>,
    pub surfaces: Vec<NamedSurface>,
    /// Rule for the boundary after segment `i`.
    pub transitions: Vec<TransitionRule>,
    pub plant: PlantConfig,
    pub task: Option<TaskSpec>,
    pub warnings: Vec<String>,
}

impl BehaviorPlan {
    /// Sum of the segments' nominal durations.
    pub fn nominal_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.model.duration).sum()
    }

    pub fn surface_of(&self, seg: &SegmentSpec) -> Option<&NamedSurface> {
        seg.surface.map(|i| &self.surfaces[i])
    }

    /// Device-to-channel mapping for a segment.
    pub fn input_mapping(&self, seg: &SegmentSpec) -> InputMapping {
        match (seg.mode, self.surface_of(seg)) {
            (Mode::HybridSurface, Some(s)) => InputMapping::Frame(s.plane.r_input),
            _ => InputMapping::Identity,
        }
    }

    pub fn segment_index(&self, id: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.id == id)
    }
}

fn seg_err(id: &str, reason: impl Into<String>) -> PlanError {
    PlanError::Segment {
        segment: id.to_string(),
        reason: reason.into(),
    }
}

fn load_surfaces(doc: &ScenarioDoc, base: Option<&Path>) -> Result<Vec<NamedSurface>, PlanError> {
    let mut out: Vec<NamedSurface> = Vec::new();
    for entry in &doc.surfaces {
        if out.iter().any(|s| s.id == entry.id) {
            return Err(PlanError::Document(format!("duplicate surface id '{}'", entry.id)));
        }
        let wrap = |source| PlanError::Surface {
            id: entry.id.clone(),
            source,
        };
        let surface = match (&entry.inline, &entry.file) {
            (Some(inline), None) => inline.build().map_err(wrap)?,
            (None, Some(file)) => {
                let path = base.map(|b| b.join(file)).unwrap_or_else(|| file.into());
                SurfaceDoc::load(&path).map_err(wrap)?
            }
            _ => {
                return Err(PlanError::Document(format!(
                    "surface '{}' needs exactly one of `file` or `inline`",
                    entry.id
                )))
            }
        };
        let plane = best_fit_plane(&surface).map_err(wrap)?;
        out.push(NamedSurface {
            id: entry.id.clone(),
            surface,
            plane,
        });
    }
    Ok(out)
}

fn expected_channels(mode: Mode) -> Vec<ChannelSpec> {
    match mode {
        Mode::FreeSpace => ChannelSpec::cartesian(),
        Mode::HybridSurface => ChannelSpec::surface(),
    }
}

fn build_model(seg: &SegmentDoc, mode: Mode, defaults: &Defaults, base: Option<&Path>) -> Result<DmpSegmentModel, PlanError> {
    let model = match (&seg.model, &seg.demo) {
        (Some(file), None) => {
            let path = base.map(|b| b.join(file)).unwrap_or_else(|| file.into());
            DmpModelDoc::load(&path).map_err(|source| PlanError::Model {
                segment: seg.id.clone(),
                source,
            })?
        }
        (None, Some(demo)) => {
            let points: Vec<Vec<f64>> = demo.points.iter().map(|p| p.to_vec()).collect();
            let d = Demonstration::from_waypoints(expected_channels(mode), defaults.fit_dt, demo.duration, &demo.fractions(), &points)
                .map_err(|source| PlanError::Model {
                    segment: seg.id.clone(),
                    source,
                })?;
            DmpSegmentModel::fit(&d, &defaults.dmp).map_err(|source| PlanError::Model {
                segment: seg.id.clone(),
                source,
            })?
        }
        _ => return Err(seg_err(&seg.id, "needs exactly one of `model` or `demo`")),
    };
    let kinds: Vec<ChannelKind> = model.channels().iter().map(|c| c.kind).collect();
    let want: Vec<ChannelKind> = expected_channels(mode).iter().map(|c| c.kind).collect();
    if kinds != want {
        return Err(seg_err(&seg.id, format!("model channels {kinds:?} do not fit mode {mode:?}")));
    }
    Ok(model)
}

/// End and start of consecutive segments must meet (same variables) or lie
/// near the shared surface point (mode changes).
fn check_endpoints(a: &SegmentSpec, b: &SegmentSpec, surfaces: &[NamedSurface]) -> Result<(), PlanError> {
    let end = a.model.forward.goals();
    let start = b.model.forward.starts();
    let fail = |reason: String| PlanError::Endpoint {
        from: a.id.clone(),
        to: b.id.clone(),
        reason,
    };
    match (a.mode, b.mode) {
        (Mode::FreeSpace, Mode::FreeSpace) => {
            let gap = (Vector3::from_column_slice(&end) - Vector3::from_column_slice(&start)).norm();
            if gap > POSITION_CONTINUITY_TOL {
                return Err(fail(format!("{gap:.4} m gap")));
            }
        }
        (Mode::HybridSurface, Mode::HybridSurface) => {
            if a.surface != b.surface {
                return Err(fail("consecutive surface segments must share a surface".into()));
            }
            let duv = (end[0] - start[0]).abs().max((end[1] - start[1]).abs());
            if duv > PARAM_CONTINUITY_TOL {
                return Err(fail(format!("surface parameters differ by {duv:.4}")));
            }
            if (end[2] - start[2]).abs() > FORCE_CONTINUITY_TOL {
                return Err(fail(format!("force jumps by {:.2} N", end[2] - start[2])));
            }
        }
        (Mode::FreeSpace, Mode::HybridSurface) => {
            let s = &surfaces[b.surface.expect("validated")].surface;
            let gap = (s.eval(start[0], start[1]) - Vector3::from_column_slice(&end)).norm();
            if gap > HANDOFF_TOL {
                return Err(fail(format!("{gap:.4} m from the surface start")));
            }
        }
        (Mode::HybridSurface, Mode::FreeSpace) => {
            let s = &surfaces[a.surface.expect("validated")].surface;
            let gap = (s.eval(end[0], end[1]) - Vector3::from_column_slice(&start)).norm();
            if gap > HANDOFF_TOL {
                return Err(fail(format!("{gap:.4} m from the surface end")));
            }
        }
    }
    Ok(())
}

/// Validates a scenario and fits or loads every segment's primitive.
/// `base` resolves relative file references.
pub fn compile_plan(doc: &ScenarioDoc, base: Option<&Path>) -> Result<BehaviorPlan, PlanError> {
    if doc.segments.is_empty() {
        return Err(PlanError::Document("scenario has no segments".into()));
    }
    if !(0.0005..=0.01).contains(&doc.dt) {
        return Err(PlanError::Document(format!("dt {} outside [0.0005, 0.01]", doc.dt)));
    }
    let surfaces = load_surfaces(doc, base)?;
    let mut doc = doc.clone();
    for inj in doc.injections.clone() {
        inject_error(&mut doc, &inj, &surfaces)?;
    }
    let d = doc.defaults;
    let mut segments: Vec<SegmentSpec> = Vec::new();
    let mut warnings = Vec::new();
    for seg in &doc.segments {
        if segments.iter().any(|s| s.id == seg.id) {
            return Err(seg_err(&seg.id, "duplicate segment id"));
        }
        let mode = Mode::from(seg.mode);
        let surface = match &seg.surface {
            Some(id) => Some(
                surfaces
                    .iter()
                    .position(|s| &s.id == id)
                    .ok_or_else(|| seg_err(&seg.id, format!("unknown surface '{id}'")))?,
            ),
            None => None,
        };
        if mode == Mode::HybridSurface && surface.is_none() {
            return Err(seg_err(&seg.id, "hybrid segment needs a surface"));
        }
        if seg.approach && surface.is_none() {
            return Err(seg_err(&seg.id, "approach segment needs a surface"));
        }
        let model = build_model(seg, mode, &d, base)?;
        let scaling = CorrectionScaling::new(seg.scaling.to_vec(), seg.scaling.iter().map(|&s| s > 0.0).collect())
            .map_err(|e| seg_err(&seg.id, e.to_string()))?;
        let orientation = seg.orientation.clone().unwrap_or_else(|| match mode {
            Mode::FreeSpace => OrientationPolicy::default(),
            Mode::HybridSurface => OrientationPolicy::SurfaceNormalStatic { spin: [1.0, 0.0, 0.0] },
        });
        if let OrientationPolicy::Prescribed { keyframes } = &orientation {
            if keyframes.is_empty() {
                return Err(seg_err(&seg.id, "prescribed orientation needs at least one keyframe"));
            }
            for (k, w) in keyframes.windows(2).enumerate() {
                let angle = orientation::keyframe_angle(&orientation::quat_from_array(w[0]), &orientation::quat_from_array(w[1]));
                if angle >= std::f64::consts::FRAC_PI_2 {
                    let msg = format!("segment '{}': keyframes {k} and {} are {:.0} deg apart", seg.id, k + 1, angle.to_degrees());
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
        segments.push(SegmentSpec {
            id: seg.id.clone(),
            mode,
            approach: seg.approach,
            model,
            scaling,
            rate: RateConfig {
                gamma: seg.gamma.unwrap_or(d.gamma),
                tau_max: d.tau_max,
                debounce_ticks: d.debounce_ticks,
                include_force: seg.rate_includes_force.unwrap_or(d.rate_includes_force),
                ..RateConfig::default()
            },
            stiffness: seg.stiffness.unwrap_or(d.stiffness),
            orientation,
            surface,
            calibrated: seg.calibrated,
            edge_margin: seg.edge_margin.unwrap_or(d.edge_margin),
            standoff_band: d.standoff_band,
        });
    }
    let mut transitions = Vec::new();
    for w in segments.windows(2) {
        check_endpoints(&w[0], &w[1], &surfaces)?;
        transitions.push(TransitionRule::between(w[0].mode, w[1].mode));
    }
    if let Some(task) = &doc.task {
        task.validate(&segments, &surfaces).map_err(PlanError::Document)?;
    }
    Ok(BehaviorPlan {
        name: doc.name.clone(),
        dt: doc.dt,
        max_time: doc.max_time,
        segments,
        surfaces,
        transitions,
        plant: doc.plant,
        task: doc.task.clone(),
        warnings,
    })
}

/// Rotation whose columns are the world directions of a segment's correction channels.
pub fn channel_frame(plan: &BehaviorPlan, seg: &SegmentSpec) -> Matrix3<f64> {
    match plan.input_mapping(seg) {
        InputMapping::Frame(r) => r,
        InputMapping::Identity => Matrix3::identity(),
    }
}
