use super::runtime::SaturationCounts;
use super::trace::{SessionTrace, TraceError, TraceRecord};
use crate::plant::{evaluate_outcome, OutcomeReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Device displacement that counts as input (m).
pub const INPUT_DISTANCE_THRESHOLD: f64 = 0.005;
/// Device speed that counts as input (m/s).
pub const INPUT_SPEED_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trace has no device data")]
    MissingDevice,
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("outcome: {0}")]
    Outcome(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputTimeMethod {
    /// Device held away from its rest position by more than `d`.
    Corrective,
    /// Device moving faster than `v_alpha`.
    MotionBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputThresholds {
    pub d: f64,
    pub v_alpha: f64,
}

impl Default for InputThresholds {
    fn default() -> Self {
        Self {
            d: INPUT_DISTANCE_THRESHOLD,
            v_alpha: INPUT_SPEED_THRESHOLD,
        }
    }
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Time the operator spent providing input, at tick resolution.
///
/// Device displacement is the deflection times `device_range`, with the rest
/// position at zero. A tick counts when the displacement (or its finite
/// difference speed) is strictly above the threshold.
pub fn compute_input_time(
    records: &[TraceRecord],
    method: InputTimeMethod,
    device_range: Option<f64>,
    dt: f64,
    thresholds: InputThresholds,
) -> Result<f64, MetricsError> {
    let range = device_range.filter(|r| r.is_finite() && *r > 0.0).ok_or(MetricsError::MissingDevice)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MetricsError::InvalidStep(dt));
    }
    let device = |r: &TraceRecord| r.u.map(|x| x * range);
    let ticks = match method {
        InputTimeMethod::Corrective => records.iter().filter(|r| norm(device(r)) > thresholds.d).count(),
        InputTimeMethod::MotionBased => records
            .windows(2)
            .filter(|w| {
                let (a, b) = (device(&w[0]), device(&w[1]));
                norm([(b[0] - a[0]) / dt, (b[1] - a[1]) / dt, (b[2] - a[2]) / dt]) > thresholds.v_alpha
            })
            .count(),
    };
    Ok(ticks as f64 * dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub t_input_corrective: f64,
    pub t_input_motion: f64,
    pub t_total: f64,
    pub thresholds: InputThresholds,
    pub saturation: SaturationCounts,
    /// The trace has no footer or the session did not finish its plan.
    pub partial: bool,
    pub outcome: Option<OutcomeReport>,
}

pub fn compute_metrics(trace: &SessionTrace, thresholds: InputThresholds) -> Result<Metrics, MetricsError> {
    let h = &trace.header;
    let mut saturation = SaturationCounts::default();
    trace.records.iter().for_each(|r| saturation.add(&r.saturation));
    let complete = trace.is_complete();
    let outcome = match &h.task {
        Some(task) => {
            let surfaces = h.build_surfaces()?;
            Some(evaluate_outcome(&trace.records, complete, task, &surfaces, h.dt).map_err(MetricsError::Outcome)?)
        }
        None => None,
    };
    Ok(Metrics {
        t_input_corrective: compute_input_time(&trace.records, InputTimeMethod::Corrective, h.device_range, h.dt, thresholds)?,
        t_input_motion: compute_input_time(&trace.records, InputTimeMethod::MotionBased, h.device_range, h.dt, thresholds)?,
        t_total: trace.records.len() as f64 * h.dt,
        thresholds,
        saturation,
        partial: !complete,
        outcome,
    })
}
