//! Dynamic movement primitives.
//!
//! Each state channel gets an independent second-order goal attractor
//!
//! ```text
//! tau_e * ds = -a s
//! tau_e * dx = z
//! tau_e * dz = alpha (beta (g - x) - z) + f(s)
//! ```
//!
//! where `tau_e = tau * T` folds the segment's nominal duration `T` into the
//! time constant so that `tau = 1` replays the demonstration at its recorded
//! speed. `f(s)` is a normalized mixture of Gaussian bases over the phase.
//!
//! Every segment carries a forward variant (fitted to the demonstration) and a
//! backward variant (fitted to the time-reversed demonstration) so execution
//! can be reversed without running the attractor with a negative time
//! constant.

mod basis;
mod demo;
mod fit;
mod integrate;
mod io;

pub use basis::{forcing_value, BasisSet, ForcingValue, DEGENERATE_ACTIVATION};
pub use demo::{min_jerk, Demonstration};
pub use fit::{fit_backward, fit_lwr, lwr_weights, FIT_RIDGE};
pub use integrate::{
    reverse_state, rollout, step, DmpState, Rollout, RolloutError, TAU_FREEZE, TAU_MIN,
};
pub use io::{DmpModelDoc, MODEL_SCHEMA_VERSION};

use crate::state::ChannelSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmpError {
    #[error("demonstration too short: {0} samples, need at least 3")]
    DemoTooShort(usize),
    #[error("demonstration step must be positive and finite, got {0}")]
    InvalidDemoStep(f64),
    #[error("sample {index} has {found} channels, expected {expected}")]
    ChannelCountMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("basis set needs at least 2 functions, got {0}")]
    TooFewBases(usize),
    #[error("basis centers must be strictly ordered inside (0, 1]")]
    UnorderedCenters,
    #[error("basis widths must be positive")]
    NonPositiveWidth,
    #[error("gains must be positive (alpha = {alpha}, decay = {decay})")]
    InvalidGain { alpha: f64, decay: f64 },
    #[error("forward and backward variants have different channel lists")]
    VariantMismatch,
    #[error("integration step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("phase frozen: time constant {0} is beyond the hold limit")]
    PhaseFrozen(f64),
    #[error("time constant magnitude {0} is below the minimum")]
    TimeConstantTooSmall(f64),
    #[error("time constant sign does not match the {0:?} direction")]
    DirectionMismatch(Direction),
    #[error("state has {found} channels, model has {expected}")]
    StateMismatch { expected: usize, found: usize },
    #[error("model document: {0}")]
    Document(String),
}

/// Which fitted variant drives the segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Exponentially decaying phase shared by all channels of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalSystem {
    pub decay: f64,
}

/// The segment is over once the phase falls below `exp(-a) * S_END_FACTOR`.
pub const S_END_FACTOR: f64 = 0.999;

impl Default for CanonicalSystem {
    fn default() -> Self {
        Self { decay: 1.0 }
    }
}

impl CanonicalSystem {
    pub fn new(decay: f64) -> Result<Self, DmpError> {
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(DmpError::InvalidGain { alpha: f64::NAN, decay });
        }
        Ok(Self { decay })
    }

    /// Phase after `progress` (fraction of the nominal duration) at `tau = 1`.
    pub fn phase_at(&self, progress: f64) -> f64 {
        (-self.decay * progress).exp()
    }

    /// Inverse of [`CanonicalSystem::phase_at`].
    pub fn progress(&self, s: f64) -> f64 {
        -s.ln() / self.decay
    }

    /// Phase reached when the nominal duration has elapsed.
    pub fn final_phase(&self) -> f64 {
        (-self.decay).exp()
    }

    pub fn end_threshold(&self) -> f64 {
        self.final_phase() * S_END_FACTOR
    }

    /// Maps a phase of one variant onto the matching phase of the other.
    pub fn mirror_phase(&self, s: f64) -> f64 {
        self.final_phase() / s
    }
}

/// One channel's attractor and forcing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpChannel {
    pub spec: ChannelSpec,
    pub weights: Vec<f64>,
    pub goal: f64,
    pub start: f64,
    /// Scaled rate `z = T * dx/dt` at the start of the demonstration.
    pub start_rate: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Set when the demonstration ends where it started.
    pub degenerate_goal: bool,
}

impl DmpChannel {
    pub fn zero_forcing(spec: ChannelSpec, start: f64, goal: f64, n_bases: usize, alpha: f64) -> Self {
        Self {
            spec,
            weights: vec![0.0; n_bases],
            goal,
            start,
            start_rate: 0.0,
            alpha,
            beta: alpha / 4.0,
            degenerate_goal: start == goal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpVariant {
    pub direction: Direction,
    pub channels: Vec<DmpChannel>,
}

impl DmpVariant {
    pub fn starts(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.start).collect()
    }

    pub fn goals(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.goal).collect()
    }

    pub fn start_rates(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.start_rate).collect()
    }
}

/// Fitting hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DmpConfig {
    pub bases: usize,
    /// Basis width is `width_scale / spacing^2` for the spacing to the next center.
    pub width_scale: f64,
    pub alpha: f64,
    pub decay: f64,
}

impl Default for DmpConfig {
    fn default() -> Self {
        Self {
            bases: 20,
            width_scale: 8.0,
            alpha: 25.0,
            decay: 1.0,
        }
    }
}

/// A fitted segment: shared phase system and basis, plus both variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpSegmentModel {
    pub canonical: CanonicalSystem,
    pub basis: BasisSet,
    pub duration: f64,
    pub forward: DmpVariant,
    pub backward: DmpVariant,
}

impl DmpSegmentModel {
    pub fn new(
        canonical: CanonicalSystem,
        basis: BasisSet,
        duration: f64,
        forward: DmpVariant,
        backward: DmpVariant,
    ) -> Result<Self, DmpError> {
        let same = forward.channels.len() == backward.channels.len()
            && forward
                .channels
                .iter()
                .zip(&backward.channels)
                .all(|(f, b)| f.spec == b.spec);
        if !same || forward.direction != Direction::Forward || backward.direction != Direction::Backward {
            return Err(DmpError::VariantMismatch);
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(DmpError::InvalidDemoStep(duration));
        }
        Ok(Self {
            canonical,
            basis,
            duration,
            forward,
            backward,
        })
    }

    /// Fits both variants from one demonstration.
    pub fn fit(demo: &Demonstration, config: &DmpConfig) -> Result<Self, DmpError> {
        let canonical = CanonicalSystem::new(config.decay)?;
        let basis = BasisSet::standard(config.bases, &canonical, config.width_scale)?;
        let forward = fit_lwr(demo, &canonical, &basis, config.alpha)?;
        let backward = fit_backward(demo, &canonical, &basis, config.alpha)?;
        Self::new(canonical, basis, demo.duration(), forward, backward)
    }

    pub fn channel_count(&self) -> usize {
        self.forward.channels.len()
    }

    pub fn channels(&self) -> Vec<ChannelSpec> {
        self.forward.channels.iter().map(|c| c.spec.clone()).collect()
    }

    pub fn variant(&self, direction: Direction) -> &DmpVariant {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    /// Moves the start of channel `index` (and the matching backward goal).
    pub fn set_start(&mut self, index: usize, value: f64) {
        self.forward.channels[index].start = value;
        self.backward.channels[index].goal = value;
    }

    /// Initial integration state of the forward variant.
    pub fn initial_state(&self) -> DmpState {
        DmpState {
            s: 1.0,
            x: self.forward.starts(),
            z: self.forward.start_rates(),
        }
    }

    /// Initial state of the backward variant.
    pub fn initial_backward_state(&self) -> DmpState {
        DmpState {
            s: 1.0,
            x: self.backward.starts(),
            z: self.backward.start_rates(),
        }
    }

    /// Phase of the forward variant equivalent to `s` of the given variant.
    pub fn forward_phase(&self, direction: Direction, s: f64) -> f64 {
        match direction {
            Direction::Forward => s,
            Direction::Backward => self.canonical.mirror_phase(s),
        }
    }
}
