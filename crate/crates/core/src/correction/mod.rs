//! Operator corrections: the second-order correction filter, arbitration with
//! the nominal command, execution-rate modulation and input validation.

mod ode;
mod rate;
mod validate;

pub use ode::{step_correction, CorrectionScaling, CorrectionState, DEFAULT_STIFFNESS};
pub use rate::{time_constant, rate_heuristic, RateConfig, RateState};
pub use validate::{saturate_validate, SaturationReport, SegmentMode, ValidationContext, DEFAULT_STANDOFF_BAND};

use crate::state::StateVector;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrectionError {
    #[error("nominal state has {nominal} channels but the correction has {correction}")]
    ChannelMismatch { nominal: usize, correction: usize },
    #[error("correction stiffness must be positive and finite, got {0}")]
    InvalidStiffness(f64),
    #[error("scaling must be non-negative and finite (channel {0})")]
    InvalidScaling(usize),
}

/// Operator-side flags that travel with an input sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Overrides {
    /// Multiplies every channel's scaling, clamped to [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<f64>,
}

/// One device sample: three deflections in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UserInput {
    pub u: [f64; 3],
    pub timestamp: f64,
    #[serde(default)]
    pub overrides: Overrides,
}

impl UserInput {
    /// Clamps each axis into [-1, 1]; non-finite entries become 0.
    pub fn new(u: [f64; 3], timestamp: f64) -> Self {
        Self {
            u: u.map(|x| if x.is_finite() { x.clamp(-1.0, 1.0) } else { 0.0 }),
            timestamp,
            overrides: Overrides::default(),
        }
    }

    pub fn zero(timestamp: f64) -> Self {
        Self::new([0.0; 3], timestamp)
    }

    pub fn is_zero(&self) -> bool {
        self.u == [0.0; 3]
    }
}

/// How device axes map onto a segment's three correctable channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputMapping {
    /// Device axes drive the channels directly.
    Identity,
    /// Columns of `r_input` are the device-frame directions of the channels.
    Frame(Matrix3<f64>),
}

impl InputMapping {
    pub fn to_channels(&self, u: [f64; 3]) -> [f64; 3] {
        match self {
            InputMapping::Identity => u,
            InputMapping::Frame(r) => {
                let c = r.transpose() * Vector3::from(u);
                [c.x, c.y, c.z].map(|x| x.clamp(-1.0, 1.0))
            }
        }
    }

    pub fn to_device(&self, c: [f64; 3]) -> [f64; 3] {
        match self {
            InputMapping::Identity => c,
            InputMapping::Frame(r) => {
                let u = r * Vector3::from(c);
                [u.x, u.y, u.z]
            }
        }
    }
}

/// Commanded state `x_n + dy`. Channels with an exactly zero correction keep
/// the nominal value bit for bit.
pub fn arbitrate(nominal: &StateVector, correction: &[f64]) -> Result<StateVector, CorrectionError> {
    if nominal.len() != correction.len() {
        return Err(CorrectionError::ChannelMismatch {
            nominal: nominal.len(),
            correction: correction.len(),
        });
    }
    Ok(StateVector(
        nominal
            .iter()
            .zip(correction)
            .map(|(&x, &d)| if d == 0.0 { x } else { x + d })
            .collect(),
    ))
}
