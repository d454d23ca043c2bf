use super::CorrectionError;
use serde::{Deserialize, Serialize};

/// Default correction stiffness `k_c`; the filter settles in roughly `6 / sqrt(k_c)` = 0.6 s.
pub const DEFAULT_STIFFNESS: f64 = 100.0;

/// Raw state of `dy'' + b dy' + k dy = u` per correctable channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionState {
    pub dy: Vec<f64>,
    pub dy_rate: Vec<f64>,
    pub stiffness: f64,
    pub damping: f64,
}

impl CorrectionState {
    /// At rest, critically damped (`b = 2 sqrt(k)`).
    pub fn new(channels: usize, stiffness: f64) -> Result<Self, CorrectionError> {
        if !(stiffness > 0.0 && stiffness.is_finite()) {
            return Err(CorrectionError::InvalidStiffness(stiffness));
        }
        Ok(Self {
            dy: vec![0.0; channels],
            dy_rate: vec![0.0; channels],
            stiffness,
            damping: 2.0 * stiffness.sqrt(),
        })
    }

    pub fn reset(&mut self) {
        self.dy.iter_mut().for_each(|x| *x = 0.0);
        self.dy_rate.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn is_at_rest(&self) -> bool {
        self.dy.iter().chain(&self.dy_rate).all(|&x| x == 0.0)
    }
}

/// Advances the filter by `dt` holding the channel inputs constant.
///
/// Uses the exact solution of the critically damped system over the step, so
/// the response is free of discretization overshoot at any `dt`.
pub fn step_correction(state: &CorrectionState, input: &[f64], dt: f64) -> CorrectionState {
    let k = state.stiffness;
    let w = k.sqrt();
    let decay = (-w * dt).exp();
    let mut next = state.clone();
    for c in 0..state.dy.len() {
        let u = input.get(c).copied().unwrap_or(0.0);
        if u == 0.0 && state.dy[c] == 0.0 && state.dy_rate[c] == 0.0 {
            continue;
        }
        let e0 = state.dy[c] - u / k;
        let v0 = state.dy_rate[c];
        let b = v0 + w * e0;
        next.dy[c] = u / k + (e0 + b * dt) * decay;
        next.dy_rate[c] = (v0 - w * b * dt) * decay;
    }
    next
}

/// Maximum correction per channel and which channels are correctable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionScaling {
    pub max: Vec<f64>,
    pub subspace: Vec<bool>,
}

impl CorrectionScaling {
    pub fn new(max: Vec<f64>, subspace: Vec<bool>) -> Result<Self, CorrectionError> {
        if max.len() != subspace.len() {
            return Err(CorrectionError::ChannelMismatch {
                nominal: subspace.len(),
                correction: max.len(),
            });
        }
        if let Some(i) = max.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(CorrectionError::InvalidScaling(i));
        }
        Ok(Self { max, subspace })
    }

    pub fn none(channels: usize) -> Self {
        Self {
            max: vec![0.0; channels],
            subspace: vec![false; channels],
        }
    }

    /// Effective per-channel maximum: zero outside the subspace.
    pub fn effective(&self, factor: f64) -> Vec<f64> {
        self.max
            .iter()
            .zip(&self.subspace)
            .map(|(&s, &on)| if on { s * factor } else { 0.0 })
            .collect()
    }

    /// Raw filter output rescaled so a sustained unit input reaches the
    /// channel maximum, then clamped to it.
    pub fn apply(&self, state: &CorrectionState, factor: f64) -> Vec<f64> {
        self.effective(factor)
            .iter()
            .zip(&state.dy)
            .map(|(&s, &dy)| {
                if s == 0.0 || dy == 0.0 {
                    0.0
                } else {
                    (dy * state.stiffness * s).clamp(-s, s)
                }
            })
            .collect()
    }
}
