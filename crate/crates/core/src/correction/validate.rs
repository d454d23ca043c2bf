use crate::surface::{project_local, BSplineSurface};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Width of the clearance band over which corrections toward a surface fade out (m).
pub const DEFAULT_STANDOFF_BAND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    FreeSpace,
    /// Free-space motion near a surface: corrections must not push into it.
    ApproachDepart,
    /// Hybrid execution in surface coordinates `(u, v, f_n)`.
    OnSurface,
}

/// What validation had to change this tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SaturationReport {
    pub param_clamped: bool,
    pub normal_scaled: bool,
    pub force_floored: bool,
    pub scaling_zeroed: bool,
}

impl SaturationReport {
    pub fn any(&self) -> bool {
        self.param_clamped || self.normal_scaled || self.force_floored || self.scaling_zeroed
    }
}

pub struct ValidationContext<'a> {
    pub mode: SegmentMode,
    pub surface: Option<&'a BSplineSurface>,
    pub edge_margin: f64,
    pub standoff_band: f64,
    /// Seed for locating the closest surface point in approach/depart mode.
    pub seed: (f64, f64),
}

/// Normal reductions smaller than this (m) are rounding, not saturation.
const NORMAL_EPS: f64 = 1e-12;

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Adjusts a proposed correction so the command `x_n + dy` is safe.
///
/// On a surface the parameters stay inside the edge margin (or wherever the
/// nominal already is) and the commanded force stays non-negative. Near a
/// surface the component of the correction toward it fades with clearance and
/// never exceeds the clearance. Returns the correction actually applied.
pub fn saturate_validate(nominal: &[f64], correction: &[f64], ctx: &ValidationContext) -> (Vec<f64>, SaturationReport) {
    let mut dy = correction.to_vec();
    let mut report = SaturationReport::default();
    if dy.iter().all(|&d| d == 0.0) {
        return (dy, report);
    }
    match ctx.mode {
        SegmentMode::FreeSpace => {}
        SegmentMode::OnSurface => {
            for c in 0..2.min(dy.len()) {
                if dy[c] == 0.0 {
                    continue;
                }
                let lo = ctx.edge_margin.min(nominal[c]);
                let hi = (1.0 - ctx.edge_margin).max(nominal[c]);
                let proposed = nominal[c] + dy[c];
                let clamped = proposed.clamp(lo, hi);
                if clamped != proposed {
                    dy[c] = clamped - nominal[c];
                    report.param_clamped = true;
                }
            }
            if dy.len() > 2 && nominal[2] + dy[2] < 0.0 && dy[2] < 0.0 {
                dy[2] = -nominal[2].max(0.0);
                report.force_floored = true;
            }
        }
        SegmentMode::ApproachDepart => {
            if let (Some(surf), true) = (ctx.surface, dy.len() >= 3) {
                let xn = Vector3::new(nominal[0], nominal[1], nominal[2]);
                let proj = project_local(surf, &xn, ctx.seed);
                if let Ok(n) = surf.normal(proj.u, proj.v) {
                    let clearance = (xn - proj.point).dot(&n);
                    let d = Vector3::new(dy[0], dy[1], dy[2]);
                    let toward = d.dot(&n);
                    if toward < 0.0 {
                        let allowed = (-toward * smoothstep(clearance / ctx.standoff_band)).min(clearance.max(0.0));
                        let adjusted = d + n * (-toward - allowed);
                        dy[0] = adjusted.x;
                        dy[1] = adjusted.y;
                        dy[2] = adjusted.z;
                        report.normal_scaled = -toward - allowed > NORMAL_EPS;
                    }
                }
            }
        }
    }
    (dy, report)
}
