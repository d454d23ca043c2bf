use super::TaskSpec;
use crate::plan::{NamedSurface, PlanError, ScenarioDoc, SegmentModeDoc};
use serde::{Deserialize, Serialize};

/// Region of a polished surface that needs extra force to clear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectRegion {
    pub u: [f64; 2],
    pub v: [f64; 2],
    /// Force needed for contact inside the region to count (N).
    pub required_force: f64,
}

impl DefectRegion {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u[0] && u <= self.u[1] && v >= self.v[0] && v <= self.v[1]
    }
}

/// Deterministic task error applied when a scenario is compiled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Injection {
    /// The real hole sits `offset` (m) away from where the plan expects it.
    RegistrationOffset { target: String, offset: [f64; 3] },
    DefectRegion(DefectRegion),
    /// The pass's path (all waypoints but its first and last) is shifted
    /// sideways by `lateral_offset` meters along the surface `v` direction.
    MisalignedPass { segment: String, lateral_offset: f64 },
}

/// Applies one injection to a scenario: world errors go into the task
/// description, plan errors into the segment demonstrations.
pub fn inject_error(doc: &mut ScenarioDoc, injection: &Injection, surfaces: &[NamedSurface]) -> Result<(), PlanError> {
    let err = |m: String| PlanError::Injection(m);
    match injection {
        Injection::RegistrationOffset { target, offset } => match &mut doc.task {
            Some(TaskSpec::Insertion { rivets, .. }) => {
                let rivet = rivets
                    .iter_mut()
                    .find(|r| &r.id == target)
                    .ok_or_else(|| err(format!("no rivet '{target}'")))?;
                for c in 0..3 {
                    rivet.target[c] += offset[c];
                }
                Ok(())
            }
            _ => Err(err("registration_offset needs an insertion task".into())),
        },
        Injection::DefectRegion(region) => match &mut doc.task {
            Some(TaskSpec::Polishing { defect, .. }) => {
                if !(region.u[0] < region.u[1] && region.v[0] < region.v[1]) {
                    return Err(err("defect region bounds must be increasing".into()));
                }
                *defect = Some(*region);
                Ok(())
            }
            _ => Err(err("defect_region needs a polishing task".into())),
        },
        Injection::MisalignedPass { segment, lateral_offset } => {
            let seg = doc
                .segments
                .iter_mut()
                .find(|s| &s.id == segment)
                .ok_or_else(|| err(format!("no segment '{segment}'")))?;
            if seg.mode != SegmentModeDoc::HybridSurface {
                return Err(err(format!("segment '{segment}' is not a surface pass")));
            }
            let surf = seg
                .surface
                .as_ref()
                .and_then(|id| surfaces.iter().find(|s| &s.id == id))
                .ok_or_else(|| err(format!("segment '{segment}' has no known surface")))?;
            let demo = seg
                .demo
                .as_mut()
                .ok_or_else(|| err(format!("segment '{segment}' must use inline waypoints")))?;
            let n = demo.points.len();
            if n < 3 {
                return Err(err(format!("segment '{segment}' needs at least three waypoints")));
            }
            let mid = demo.points[n / 2];
            let (_, v_scale) = surf.surface.param_scale(mid[0], mid[1]);
            let dv = lateral_offset / v_scale;
            for p in &mut demo.points[1..n - 1] {
                p[1] += dv;
            }
            Ok(())
        }
    }
}
