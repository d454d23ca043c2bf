use super::DmpError;
use crate::state::{ChannelSpec, StateVector};

/// Uniformly sampled demonstration of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    channels: Vec<ChannelSpec>,
    dt: f64,
    samples: Vec<StateVector>,
}

/// Minimum-jerk blend from 0 to 1 over `r` in [0, 1]; clamped outside.
pub fn min_jerk(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    r * r * r * (10.0 - 15.0 * r + 6.0 * r * r)
}

impl Demonstration {
    pub fn new(channels: Vec<ChannelSpec>, dt: f64, samples: Vec<StateVector>) -> Result<Self, DmpError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DmpError::InvalidDemoStep(dt));
        }
        if samples.len() < 3 {
            return Err(DmpError::DemoTooShort(samples.len()));
        }
        for (index, s) in samples.iter().enumerate() {
            if s.len() != channels.len() {
                return Err(DmpError::ChannelCountMismatch {
                    index,
                    expected: channels.len(),
                    found: s.len(),
                });
            }
        }
        Ok(Self {
            channels,
            dt,
            samples,
        })
    }

    /// Samples `f(t)` on `[0, duration]` at step `dt`.
    pub fn from_fn(
        channels: Vec<ChannelSpec>,
        dt: f64,
        duration: f64,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self, DmpError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DmpError::InvalidDemoStep(dt));
        }
        let n = (duration / dt).round() as usize + 1;
        let samples = (0..n).map(|k| StateVector(f(k as f64 * dt))).collect();
        Self::new(channels, dt, samples)
    }

    /// Rest-to-rest minimum-jerk moves through `points`, reaching point `k`
    /// at `fractions[k] * duration`. `fractions` must start at 0 and end at 1.
    pub fn from_waypoints(
        channels: Vec<ChannelSpec>,
        dt: f64,
        duration: f64,
        fractions: &[f64],
        points: &[Vec<f64>],
    ) -> Result<Self, DmpError> {
        if fractions.len() != points.len() || points.len() < 2 {
            return Err(DmpError::Document(
                "waypoint demo needs matching fractions and at least two points".into(),
            ));
        }
        if fractions[0] != 0.0
            || *fractions.last().unwrap() != 1.0
            || fractions.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(DmpError::Document(
                "waypoint fractions must increase strictly from 0 to 1".into(),
            ));
        }
        let m = channels.len();
        if let Some(bad) = points.iter().position(|p| p.len() != m) {
            return Err(DmpError::ChannelCountMismatch {
                index: bad,
                expected: m,
                found: points[bad].len(),
            });
        }
        Self::from_fn(channels, dt, duration, |t| {
            let r = (t / duration).clamp(0.0, 1.0);
            let k = fractions
                .windows(2)
                .position(|w| r <= w[1])
                .unwrap_or(fractions.len() - 2);
            let blend = min_jerk((r - fractions[k]) / (fractions[k + 1] - fractions[k]));
            (0..m)
                .map(|c| points[k][c] + (points[k + 1][c] - points[k][c]) * blend)
                .collect()
        })
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[StateVector] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[index]).collect()
    }

    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            channels: self.channels.clone(),
            dt: self.dt,
            samples,
        }
    }

    /// Copy with channel `index` replaced by `values`.
    pub fn with_channel(&self, index: usize, values: &[f64]) -> Self {
        let mut out = self.clone();
        for (s, &v) in out.samples.iter_mut().zip(values) {
            s[index] = v;
        }
        out
    }
}
