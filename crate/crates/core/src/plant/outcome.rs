use super::DefectRegion;
use crate::plan::{NamedSurface, SegmentSpec};
use crate::session::TraceRecord;
use crate::surface::BSplineSurface;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rivet {
    pub id: String,
    /// Segment whose final tool position seats this rivet.
    pub segment: String,
    /// Hole location (m).
    pub target: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayupPass {
    pub segment: String,
    /// Surface `v` of the intended track.
    pub v_track: f64,
    pub u_from: f64,
    pub u_to: f64,
}

/// Success criteria of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Insertion {
        surface: String,
        /// Largest accepted lateral placement error (m).
        tolerance: f64,
        rivets: Vec<Rivet>,
    },
    Polishing {
        surface: String,
        nominal_force: f64,
        /// Time at the required force that clears the defect (s).
        dwell: f64,
        #[serde(default = "default_grid")]
        grid: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        defect: Option<DefectRegion>,
    },
    Layup {
        surface: String,
        /// Largest accepted lateral deviation from the track (m).
        bound: f64,
        #[serde(default = "default_bins")]
        bins: usize,
        /// Share of each run's length ignored at either end.
        #[serde(default = "default_edge_fraction")]
        edge_fraction: f64,
        passes: Vec<LayupPass>,
    },
}

fn default_grid() -> [usize; 2] {
    [40, 40]
}

fn default_bins() -> usize {
    30
}

fn default_edge_fraction() -> f64 {
    0.1
}

impl TaskSpec {
    pub fn surface(&self) -> &str {
        match self {
            TaskSpec::Insertion { surface, .. } | TaskSpec::Polishing { surface, .. } | TaskSpec::Layup { surface, .. } => surface,
        }
    }

    pub(crate) fn validate(&self, segments: &[SegmentSpec], surfaces: &[NamedSurface]) -> Result<(), String> {
        if !surfaces.iter().any(|s| s.id == self.surface()) {
            return Err(format!("task refers to unknown surface '{}'", self.surface()));
        }
        let known = |id: &str| segments.iter().any(|s| s.id == id);
        let missing = match self {
            TaskSpec::Insertion { rivets, .. } => rivets.iter().map(|r| &r.segment).find(|s| !known(s)),
            TaskSpec::Layup { passes, .. } => passes.iter().map(|p| &p.segment).find(|s| !known(s)),
            TaskSpec::Polishing { .. } => None,
        };
        match missing {
            Some(s) => Err(format!("task refers to unknown segment '{s}'")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RivetOutcome {
    pub id: String,
    pub lateral_error: Option<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeDetail {
    Insertion {
        rivets: Vec<RivetOutcome>,
    },
    Polishing {
        /// Force-time integral above the required force inside the defect (N s).
        region_dose: f64,
        threshold: f64,
        cleared: bool,
        /// Per-cell force-time integral of all contact, row-major over `u` then `v`.
        dose_map: Vec<f64>,
        grid: [usize; 2],
    },
    Layup {
        crease: bool,
        /// `(pass index, bin)` pairs left outside the bound.
        bad_bins: Vec<(usize, usize)>,
        max_deviation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    /// The trace ended early; results cover only what was recorded.
    pub partial: bool,
    pub success: bool,
    pub detail: OutcomeDetail,
}

/// Scores a trace against the task criteria.
pub fn evaluate_outcome(
    records: &[TraceRecord],
    complete: bool,
    task: &TaskSpec,
    surfaces: &[(String, BSplineSurface)],
    dt: f64,
) -> Result<OutcomeReport, String> {
    let surf = &surfaces
        .iter()
        .find(|(id, _)| id == task.surface())
        .ok_or_else(|| format!("trace has no surface '{}'", task.surface()))?
        .1;
    let mut partial = !complete;
    let detail = match task {
        TaskSpec::Insertion { tolerance, rivets, .. } => {
            let rivets = rivets
                .iter()
                .map(|r| {
                    let last = records.iter().rposition(|x| x.segment == r.segment);
                    // the segment must have finished: a later segment started or the run completed
                    let finished = last.is_some_and(|k| k + 1 < records.len() || complete);
                    let error = last.filter(|_| finished).map(|k| {
                        let p = Vector3::from(records[k].plant.position);
                        let target = Vector3::from(r.target);
                        let uv = crate::surface::project_to_surface(surf, &target, (0.5, 0.5));
                        let n = surf.normal(uv.u, uv.v).unwrap_or_else(|_| Vector3::z());
                        let d = p - target;
                        (d - n * d.dot(&n)).norm()
                    });
                    if error.is_none() {
                        partial = true;
                    }
                    RivetOutcome {
                        id: r.id.clone(),
                        lateral_error: error,
                        success: error.is_some_and(|e| e <= *tolerance),
                    }
                })
                .collect();
            OutcomeDetail::Insertion { rivets }
        }
        TaskSpec::Polishing {
            nominal_force,
            dwell,
            grid,
            defect,
            ..
        } => {
            let required = defect.map_or(*nominal_force, |d| d.required_force);
            let mut map = vec![0.0; grid[0] * grid[1]];
            let mut region_dose = 0.0;
            for rec in records {
                let (Some([u, v]), true) = (rec.plant.uv, rec.plant.contact) else {
                    continue;
                };
                let f = rec.plant.force;
                let i = ((u * grid[0] as f64) as usize).min(grid[0] - 1);
                let j = ((v * grid[1] as f64) as usize).min(grid[1] - 1);
                map[i * grid[1] + j] += f * dt;
                if f >= required && defect.is_some_and(|d| d.contains(u, v)) {
                    region_dose += f * dt;
                }
            }
            let threshold = required * dwell;
            OutcomeDetail::Polishing {
                region_dose,
                threshold,
                cleared: defect.is_none() || region_dose >= threshold,
                dose_map: map,
                grid: *grid,
            }
        }
        TaskSpec::Layup {
            bound,
            bins,
            edge_fraction,
            passes,
            ..
        } => {
            let mut bad = Vec::new();
            let mut max_dev: f64 = 0.0;
            for (k, pass) in passes.iter().enumerate() {
                let (lo, hi) = (pass.u_from.min(pass.u_to), pass.u_from.max(pass.u_to));
                let margin = edge_fraction * (hi - lo);
                let (lo, hi) = (lo + margin, hi - margin);
                let mut last: Vec<Option<f64>> = vec![None; *bins];
                for rec in records.iter().filter(|r| r.segment == pass.segment && r.plant.contact) {
                    let Some([u, v]) = rec.plant.uv else { continue };
                    if u < lo || u > hi {
                        continue;
                    }
                    let b = (((u - lo) / (hi - lo)) * *bins as f64) as usize;
                    let scale = surf.param_scale(u, pass.v_track).1;
                    last[b.min(bins - 1)] = Some((v - pass.v_track).abs() * scale);
                }
                for (b, dev) in last.iter().enumerate() {
                    match dev {
                        Some(d) if *d <= *bound => max_dev = max_dev.max(*d),
                        Some(d) => {
                            max_dev = max_dev.max(*d);
                            bad.push((k, b));
                        }
                        None => bad.push((k, b)),
                    }
                }
            }
            OutcomeDetail::Layup {
                crease: !bad.is_empty(),
                bad_bins: bad,
                max_deviation: max_dev,
            }
        }
    };
    let success = match &detail {
        OutcomeDetail::Insertion { rivets } => rivets.iter().all(|r| r.success),
        OutcomeDetail::Polishing { cleared, .. } => *cleared,
        OutcomeDetail::Layup { crease, .. } => !crease,
    };
    Ok(OutcomeReport { partial, success, detail })
}
