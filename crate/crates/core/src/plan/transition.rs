use super::{Mode, NamedSurface, SegmentSpec};
use crate::dmp::DmpSegmentModel;
use crate::state::StateVector;
use crate::surface::project_to_surface;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Which variables carry over a segment boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionRule {
    /// Same channel layout on both sides.
    Same,
    /// Cartesian end projected onto the surface; force keeps its nominal start.
    FreeToSurface,
    /// Surface end mapped back to Cartesian space; the force correction is dropped.
    SurfaceToFree,
}

impl TransitionRule {
    pub fn between(a: Mode, b: Mode) -> Self {
        match (a, b) {
            (Mode::FreeSpace, Mode::HybridSurface) => TransitionRule::FreeToSurface,
            (Mode::HybridSurface, Mode::FreeSpace) => TransitionRule::SurfaceToFree,
            _ => TransitionRule::Same,
        }
    }
}

/// State of a segment when its phase ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEnd {
    pub nominal: StateVector,
    /// Correction applied on the final tick (already validated).
    pub correction: Vec<f64>,
}

impl SegmentEnd {
    pub fn commanded(&self) -> StateVector {
        crate::correction::arbitrate(&self.nominal, &self.correction).expect("matching channel counts")
    }

    fn corrected(&self, c: usize) -> bool {
        self.correction[c] != 0.0
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    /// Next segment's model with its start moved to absorb the carried correction.
    pub model: DmpSegmentModel,
    pub warning: Option<String>,
}

/// Starts the next segment where the corrected previous one ended.
///
/// The carried correction is folded into the next primitive's start, so the
/// correction filter itself restarts from rest. Without corrections the next
/// model is returned unchanged.
pub fn transition(
    prev: &SegmentSpec,
    end: &SegmentEnd,
    next: &SegmentSpec,
    surfaces: &[NamedSurface],
) -> Transition {
    let mut model = next.model.clone();
    let mut warning = None;
    match TransitionRule::between(prev.mode, next.mode) {
        TransitionRule::Same => {
            for c in 0..model.channel_count() {
                if end.corrected(c) {
                    let start = model.forward.channels[c].start + end.correction[c];
                    model.set_start(c, start);
                }
            }
        }
        TransitionRule::FreeToSurface => {
            if (0..3).any(|c| end.corrected(c)) {
                let surf = &surfaces[next.surface.expect("compiled plan")].surface;
                let x = end.commanded();
                let p = Vector3::new(x[0], x[1], x[2]);
                let seed = (model.forward.channels[0].start, model.forward.channels[1].start);
                let proj = project_to_surface(surf, &p, seed);
                if proj.warning {
                    warning = Some(format!(
                        "projection onto the surface of '{}' did not converge; keeping the nominal start",
                        next.id
                    ));
                } else {
                    model.set_start(0, proj.u);
                    model.set_start(1, proj.v);
                }
            }
        }
        TransitionRule::SurfaceToFree => {
            if end.corrected(0) || end.corrected(1) {
                let surf = &surfaces[prev.surface.expect("compiled plan")].surface;
                let x = end.commanded();
                let shift = surf.eval(x[0], x[1]) - surf.eval(end.nominal[0], end.nominal[1]);
                for c in 0..3 {
                    let start = model.forward.channels[c].start + shift[c];
                    model.set_start(c, start);
                }
            }
        }
    }
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Transition { model, warning }
}
