//! Simulated tool and environment: a kinematic tool point with a velocity
//! servo, an admittance force loop against spring-damper contact, the task
//! errors the study scenarios inject, and outcome scoring.

mod inject;
mod outcome;

pub use inject::{inject_error, DefectRegion, Injection};
pub use outcome::{evaluate_outcome, LayupPass, OutcomeDetail, OutcomeReport, Rivet, TaskSpec};

use crate::surface::{project_local, BSplineSurface};
use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Plant and contact constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// Position servo gain (1/s).
    pub k_v: f64,
    /// Tool speed limit (m/s).
    pub v_max: f64,
    /// Admittance gain from force error to normal velocity (m/(s N)).
    pub k_p: f64,
    /// Contact stiffness (N/m).
    pub k_s: f64,
    /// Contact damping (N s/m).
    pub contact_damping: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        let k_s = 5000.0;
        Self {
            k_v: 50.0,
            v_max: 0.5,
            k_p: 0.002,
            k_s,
            // critical damping for a 1 kg effective tool mass
            contact_damping: 2.0 * k_s.sqrt(),
        }
    }
}

/// Contact force for a penetration and its rate: zero out of contact, never pulling.
pub fn contact_force(cfg: &PlantConfig, penetration: f64, rate: f64) -> f64 {
    if penetration <= 0.0 {
        0.0
    } else {
        (cfg.k_s * penetration + cfg.contact_damping * rate).max(0.0)
    }
}

/// What the controller asks of the plant this tick.
#[derive(Debug, Clone, Copy)]
pub enum PlantCommand<'a> {
    Free {
        position: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
    },
    Hybrid {
        surface: &'a BSplineSurface,
        u: f64,
        v: f64,
        force: f64,
        orientation: UnitQuaternion<f64>,
    },
}

/// Contact bookkeeping per environment surface.
#[derive(Debug, Clone, PartialEq)]
struct ContactTrack {
    seed: (f64, f64),
    penetration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub velocity: Vector3<f64>,
    /// Measured contact force along the surface normal (N).
    pub force: f64,
    pub contact: bool,
    pub penetration: f64,
    /// Parameters of the closest point on the contact surface, when known.
    pub uv: Option<(f64, f64)>,
    target: Option<Vector3<f64>>,
    tracks: Vec<ContactTrack>,
}

impl PlantState {
    pub fn at_rest(position: Vector3<f64>, orientation: UnitQuaternion<f64>, surfaces: usize) -> Self {
        Self {
            position,
            orientation,
            velocity: Vector3::zeros(),
            force: 0.0,
            contact: false,
            penetration: 0.0,
            uv: None,
            target: None,
            tracks: vec![
                ContactTrack {
                    seed: (0.5, 0.5),
                    penetration: 0.0
                };
                surfaces
            ],
        }
    }
}

fn saturate(v: Vector3<f64>, limit: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}

/// Advances the tool by one step and measures contact against `environment`.
///
/// Free commands are tracked with feed-forward plus a proportional velocity
/// servo. Hybrid commands servo the tangential position toward the surface
/// point `r(u, v)` and move along the normal at `k_p (f_cmd - f_meas)`.
pub fn plant_step(
    state: &PlantState,
    cmd: &PlantCommand,
    environment: &[BSplineSurface],
    cfg: &PlantConfig,
    dt: f64,
) -> PlantState {
    let mut next = state.clone();
    let feed_forward = |target: Vector3<f64>| state.target.map(|prev| (target - prev) / dt).unwrap_or_else(Vector3::zeros);
    let (velocity, target, orientation) = match *cmd {
        PlantCommand::Free { position, orientation } => {
            let v = feed_forward(position) + (position - state.position) * cfg.k_v;
            (v, position, orientation)
        }
        PlantCommand::Hybrid {
            surface,
            u,
            v,
            force,
            orientation,
        } => {
            let frame = surface.frame(u, v);
            let target = surface.eval(u, v);
            let n = frame.map(|f| f.normal).unwrap_or_else(|_| Vector3::z());
            let tangential = |w: Vector3<f64>| w - n * w.dot(&n);
            let servo = tangential(feed_forward(target)) + tangential(target - state.position) * cfg.k_v;
            let normal = -n * (cfg.k_p * (force - state.force));
            (servo + normal, target, orientation)
        }
    };
    let velocity = saturate(velocity, cfg.v_max);
    next.position = state.position + velocity * dt;
    next.velocity = velocity;
    next.orientation = orientation;
    next.target = Some(target);

    // contact against every surface; the deepest one wins
    let mut deepest: Option<(usize, f64, f64, (f64, f64))> = None;
    for (k, surf) in environment.iter().enumerate() {
        let track = &mut next.tracks[k];
        let proj = project_local(surf, &next.position, track.seed);
        track.seed = (proj.u, proj.v);
        let inside = proj.u > 0.0 && proj.u < 1.0 && proj.v > 0.0 && proj.v < 1.0;
        let penetration = match surf.normal(proj.u, proj.v) {
            Ok(n) if inside => (-(next.position - proj.point).dot(&n)).max(0.0),
            _ => 0.0,
        };
        let rate = (penetration - track.penetration) / dt;
        track.penetration = penetration;
        let depth_key = penetration;
        if deepest.is_none_or(|d| depth_key > d.1) {
            deepest = Some((k, penetration, rate, (proj.u, proj.v)));
        }
    }
    match deepest {
        Some((_, pen, rate, uv)) => {
            next.penetration = pen;
            next.force = contact_force(cfg, pen, rate);
            next.contact = pen > 0.0;
            next.uv = Some(uv);
        }
        None => {
            next.penetration = 0.0;
            next.force = 0.0;
            next.contact = false;
            next.uv = None;
        }
    }
    if let PlantCommand::Hybrid { surface, .. } = cmd {
        // report parameters on the commanded surface
        if let Some(k) = environment.iter().position(|s| std::ptr::eq(s, *surface) || s == *surface) {
            next.uv = Some(next.tracks[k].seed);
        }
    }
    next
}
