use crate::dmp::Direction;
use serde::{Deserialize, Serialize};

/// Execution-rate settings for one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateConfig {
    /// Slow-down and reversal authority.
    pub gamma: f64,
    pub tau_min: f64,
    /// Slower than this the phase is held instead.
    pub tau_max: f64,
    /// Ticks a reversed sign must persist before the direction switches.
    pub debounce_ticks: u32,
    /// Let force-channel corrections modulate the rate too.
    pub include_force: bool,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            tau_min: crate::dmp::TAU_MIN,
            tau_max: 10.0,
            debounce_ticks: 3,
            include_force: false,
        }
    }
}

/// Output of the rate heuristic for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateState {
    /// Signed time constant; infinite while the phase is held.
    pub tau: f64,
    pub direction: Direction,
    pub hold: bool,
    /// Alignment `v_n . f_d` that produced this state.
    pub alignment: f64,
    /// Consecutive ticks the heuristic has asked for the other direction.
    pub pending: u32,
}

impl Default for RateState {
    fn default() -> Self {
        Self {
            tau: 1.0,
            direction: Direction::Forward,
            hold: false,
            alignment: 0.0,
            pending: 0,
        }
    }
}

impl RateState {
    /// Phase rate relative to nominal, signed by direction; zero while held.
    pub fn rate(&self) -> f64 {
        if self.hold {
            0.0
        } else {
            1.0 / self.tau
        }
    }
}

/// Time constant for an alignment `p = v_n . f_d`: 1 when the correction
/// agrees with the motion, `1 / (1 + gamma p)` otherwise. Infinite at the
/// singular point `gamma p = -1`.
pub fn time_constant(p: f64, gamma: f64) -> f64 {
    if p > 0.0 {
        return 1.0;
    }
    let r = 1.0 + gamma * p;
    if r == 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

/// Rate modulation for one tick.
///
/// `v_n` is the unit direction of nominal forward motion (or zero) and `f_d`
/// the correction direction with `|f_d| <= 1`, both over the same channels.
/// A negative time constant asks for backward execution; the switch happens
/// only after `debounce_ticks` consecutive requests, and the phase is held
/// while a switch is pending.
pub fn rate_heuristic(prev: &RateState, v_n: &[f64], f_d: &[f64], cfg: &RateConfig) -> RateState {
    let p: f64 = v_n.iter().zip(f_d).map(|(a, b)| a * b).sum();
    let raw = time_constant(p, cfg.gamma);
    let held = |pending| RateState {
        tau: f64::INFINITY,
        direction: prev.direction,
        hold: true,
        alignment: p,
        pending,
    };
    if !raw.is_finite() {
        return held(0);
    }
    let wanted = if raw > 0.0 { Direction::Forward } else { Direction::Backward };
    let mut direction = prev.direction;
    if wanted != direction {
        let pending = prev.pending + 1;
        if pending < cfg.debounce_ticks.max(1) {
            return held(pending);
        }
        direction = wanted;
    }
    let magnitude = raw.abs().max(cfg.tau_min);
    if magnitude > cfg.tau_max {
        return RateState {
            direction,
            ..held(0)
        };
    }
    RateState {
        tau: magnitude * direction.sign(),
        direction,
        hold: false,
        alignment: p,
        pending: 0,
    }
}
