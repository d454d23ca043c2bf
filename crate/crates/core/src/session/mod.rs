//! Fixed-timestep session loop, trace recording and replay, scripted
//! operators and input-time metrics.

mod metrics;
mod runtime;
mod trace;
mod user;

pub use metrics::{
    compute_input_time, compute_metrics, InputThresholds, InputTimeMethod, Metrics, MetricsError, INPUT_DISTANCE_THRESHOLD,
    INPUT_SPEED_THRESHOLD,
};
pub use runtime::{SaturationCounts, Session, SessionEnd, SessionOptions, DEFAULT_DEVICE_RANGE};
pub use trace::{
    write_line, PlantSnapshot, SegmentInfo, SessionTrace, TraceError, TraceFooter, TraceHeader, TraceLine, TraceRecord,
    TraceSurface, TRACE_SCHEMA_VERSION,
};
pub use user::{InputFrame, InputMailbox, InputSource, ReplayUser, ScriptStep, ScriptedUser, TickContext, Trigger, ZeroInput};

use crate::plan::{compile_plan, BehaviorPlan, PlanError, ScenarioDoc};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("runtime fault: {0}")]
    Fault(String),
    #[error("session already finished")]
    Finished,
}

/// SHA-256 of the scenario's canonical TOML form.
pub fn config_hash(doc: &ScenarioDoc) -> String {
    let text = doc.to_toml().unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Compiles a scenario (optionally overriding its step) and opens a session.
pub fn open_session(
    doc: &ScenarioDoc,
    base: Option<&Path>,
    dt: Option<f64>,
    options: SessionOptions,
) -> Result<Session, SessionError> {
    let mut doc = doc.clone();
    if let Some(dt) = dt {
        doc.dt = dt;
    }
    let plan: BehaviorPlan = compile_plan(&doc, base)?;
    Session::new(plan, config_hash(&doc), options)
}

/// Headless run of a scenario with one input source.
pub fn run_headless(doc: &ScenarioDoc, source: &mut dyn InputSource) -> Result<SessionTrace, SessionError> {
    Ok(open_session(doc, None, None, SessionOptions::default())?.run(source))
}
