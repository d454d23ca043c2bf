use crate::surface::SurfaceFrame;
use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Smoothing time constant for the motion direction used by motion-aligned tools (s).
pub const MOTION_SMOOTHING: f64 = 0.1;
const MIN_MOTION: f64 = 1e-9;

/// How the tool orientation is commanded during a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OrientationPolicy {
    /// Keyframes `[w, x, y, z]` spread evenly over the segment.
    Prescribed { keyframes: Vec<[f64; 4]> },
    /// Tool axis against the normal, tool x-axis along a fixed direction
    /// projected into the tangent plane.
    SurfaceNormalStatic { spin: [f64; 3] },
    /// Tool axis against the normal, tool x-axis along the smoothed
    /// tangential motion.
    SurfaceNormalMotionAligned,
}

impl Default for OrientationPolicy {
    fn default() -> Self {
        // tool pointing straight down
        OrientationPolicy::Prescribed {
            keyframes: vec![[0.0, 1.0, 0.0, 0.0]],
        }
    }
}

/// Per-segment memory for orientation policies that need it.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationState {
    pub last: UnitQuaternion<f64>,
    pub smoothed: Option<Vector3<f64>>,
}

impl OrientationState {
    pub fn new(initial: UnitQuaternion<f64>) -> Self {
        Self {
            last: initial,
            smoothed: None,
        }
    }
}

pub fn quat_from_array(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

pub fn quat_to_array(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Component-wise interpolation along the shorter arc, then renormalized.
pub fn lerp_normalized(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, t: f64) -> UnitQuaternion<f64> {
    let qa = a.into_inner();
    let mut qb = b.into_inner();
    if qa.dot(&qb) < 0.0 {
        qb = -qb;
    }
    UnitQuaternion::from_quaternion(qa * (1.0 - t) + qb * t)
}

/// Angle between two keyframes, used to warn about coarse keyframing.
pub fn keyframe_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    a.angle_to(b)
}

fn tool_frame(normal: &Vector3<f64>, heading: &Vector3<f64>) -> Option<UnitQuaternion<f64>> {
    let z = -normal;
    let tangential = heading - z * heading.dot(&z);
    if tangential.norm() < MIN_MOTION {
        return None;
    }
    let x = tangential.normalize();
    let y = z.cross(&x);
    let r = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Some(UnitQuaternion::from_rotation_matrix(&r))
}

/// Commanded tool orientation.
///
/// `frame` is required by the surface policies; without it (or with no usable
/// heading) the previous orientation is held.
pub fn orientation_at(
    policy: &OrientationPolicy,
    progress: f64,
    frame: Option<&SurfaceFrame>,
    motion: &Vector3<f64>,
    state: &mut OrientationState,
    dt: f64,
) -> UnitQuaternion<f64> {
    let q = match policy {
        OrientationPolicy::Prescribed { keyframes } => match keyframes.len() {
            0 => state.last,
            1 => quat_from_array(keyframes[0]),
            n => {
                let x = progress.clamp(0.0, 1.0) * (n - 1) as f64;
                let k = (x.floor() as usize).min(n - 2);
                lerp_normalized(&quat_from_array(keyframes[k]), &quat_from_array(keyframes[k + 1]), x - k as f64)
            }
        },
        OrientationPolicy::SurfaceNormalStatic { spin } => frame
            .and_then(|f| tool_frame(&f.normal, &Vector3::from(*spin)))
            .unwrap_or(state.last),
        OrientationPolicy::SurfaceNormalMotionAligned => {
            if motion.norm() > MIN_MOTION {
                let dir = motion.normalize();
                let a = dt / (MOTION_SMOOTHING + dt);
                state.smoothed = Some(match state.smoothed {
                    Some(prev) => prev + (dir - prev) * a,
                    None => dir,
                });
            }
            match (frame, state.smoothed) {
                (Some(f), Some(h)) => tool_frame(&f.normal, &h).unwrap_or(state.last),
                _ => state.last,
            }
        }
    };
    state.last = q;
    q
}
