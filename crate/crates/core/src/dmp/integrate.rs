use super::{forcing_value, Direction, DmpError, DmpSegmentModel, DmpVariant};
use crate::state::StateVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest accepted `|tau|` (ten times the nominal speed).
pub const TAU_MIN: f64 = 0.1;
/// Beyond this `|tau|` the phase is considered frozen and must be held by the caller.
pub const TAU_FREEZE: f64 = 1e6;

/// Integration state of one variant: its own phase, positions and scaled rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpState {
    pub s: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

struct Deriv {
    ds: f64,
    dx: Vec<f64>,
    dz: Vec<f64>,
}

fn derivative(model: &DmpSegmentModel, variant: &DmpVariant, tau_e: f64, s: f64, x: &[f64], z: &[f64]) -> Deriv {
    let ds = -model.canonical.decay * s / tau_e;
    let mut dx = Vec::with_capacity(x.len());
    let mut dz = Vec::with_capacity(x.len());
    for (c, ch) in variant.channels.iter().enumerate() {
        let f = forcing_value(ch, &model.basis, s).value;
        dx.push(z[c] / tau_e);
        dz.push((ch.alpha * (ch.beta * (ch.goal - x[c]) - z[c]) + f) / tau_e);
    }
    Deriv { ds, dx, dz }
}

fn offset(base: &DmpState, d: &Deriv, h: f64) -> DmpState {
    DmpState {
        s: base.s + h * d.ds,
        x: base.x.iter().zip(&d.dx).map(|(x, dx)| x + h * dx).collect(),
        z: base.z.iter().zip(&d.dz).map(|(z, dz)| z + h * dz).collect(),
    }
}

/// Advances one step of `dt` seconds with the variant selected by `direction`.
///
/// `tau` is the signed time constant from the rate heuristic; its sign must
/// agree with `direction`. Integration is classic fourth-order Runge-Kutta
/// over `(s, x, z)`.
pub fn step(
    model: &DmpSegmentModel,
    state: &DmpState,
    tau: f64,
    dt: f64,
    direction: Direction,
) -> Result<DmpState, DmpError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DmpError::InvalidStep(dt));
    }
    if tau.is_nan() || tau.abs() > TAU_FREEZE {
        return Err(DmpError::PhaseFrozen(tau));
    }
    if tau.abs() < TAU_MIN {
        return Err(DmpError::TimeConstantTooSmall(tau));
    }
    if tau.signum() != direction.sign() {
        return Err(DmpError::DirectionMismatch(direction));
    }
    let variant = model.variant(direction);
    let m = variant.channels.len();
    if state.x.len() != m || state.z.len() != m {
        return Err(DmpError::StateMismatch {
            expected: m,
            found: state.x.len(),
        });
    }
    let tau_e = tau.abs() * model.duration;

    let k1 = derivative(model, variant, tau_e, state.s, &state.x, &state.z);
    let p2 = offset(state, &k1, dt / 2.0);
    let k2 = derivative(model, variant, tau_e, p2.s, &p2.x, &p2.z);
    let p3 = offset(state, &k2, dt / 2.0);
    let k3 = derivative(model, variant, tau_e, p3.s, &p3.x, &p3.z);
    let p4 = offset(state, &k3, dt);
    let k4 = derivative(model, variant, tau_e, p4.s, &p4.x, &p4.z);

    let w = dt / 6.0;
    let mut next = state.clone();
    next.s += w * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
    for c in 0..m {
        next.x[c] += w * (k1.dx[c] + 2.0 * k2.dx[c] + 2.0 * k3.dx[c] + k4.dx[c]);
        next.z[c] += w * (k1.dz[c] + 2.0 * k2.dz[c] + 2.0 * k3.dz[c] + k4.dz[c]);
    }
    Ok(next)
}

/// Hands the state over to the other variant: same position, mirrored phase,
/// negated scaled rate.
pub fn reverse_state(model: &DmpSegmentModel, state: &DmpState) -> DmpState {
    DmpState {
        s: model.canonical.mirror_phase(state.s),
        x: state.x.clone(),
        z: state.z.iter().map(|z| -z).collect(),
    }
}

/// Dense trajectory produced by [`rollout`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rollout {
    pub times: Vec<f64>,
    pub phases: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&StateVector> {
        self.states.last()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[c]).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RolloutError {
    #[error("phase did not reach the end threshold within {max_steps} steps")]
    NotConverged { max_steps: usize, partial: Rollout },
    #[error(transparent)]
    Step(#[from] DmpError),
}

/// Integrates a variant from its start until the phase passes the end
/// threshold. `tau_of_time` gives the (positive) time constant at each step.
pub fn rollout(
    model: &DmpSegmentModel,
    direction: Direction,
    tau_of_time: impl Fn(f64) -> f64,
    dt: f64,
) -> Result<Rollout, RolloutError> {
    let mut state = match direction {
        Direction::Forward => model.initial_state(),
        Direction::Backward => model.initial_backward_state(),
    };
    let end = model.canonical.end_threshold();
    // Allows a tenfold average slowdown.
    let max_steps = ((10.0 * model.duration / dt).ceil() as usize).max(10);
    let mut out = Rollout::default();
    let mut t = 0.0;
    for k in 0..=max_steps {
        out.times.push(t);
        out.phases.push(state.s);
        out.states.push(StateVector(state.x.clone()));
        if state.s < end {
            return Ok(out);
        }
        if k == max_steps {
            break;
        }
        let tau = tau_of_time(t) * direction.sign();
        state = step(model, &state, tau, dt, direction)?;
        t = (k + 1) as f64 * dt;
    }
    Err(RolloutError::NotConverged {
        max_steps,
        partial: out,
    })
}
