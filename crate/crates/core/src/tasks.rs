//! The three study tasks as ready-made scenarios, with scripted operators
//! that perform the corrections each task calls for.
//!
//! - Insertion: three rivets placed on a flat panel; two holes are 3 mm away
//!   from where the plan expects them.
//! - Polishing: three force-controlled passes over a curved panel; one region
//!   needs twice the nominal force.
//! - Layup: ten roller passes over an airfoil section; one pass is planned
//!   8 mm off its track and leaves a crease unless redone.

use crate::dmp::{Direction, DmpConfig};
use crate::plan::{Defaults, ScenarioDoc, SegmentDoc, SegmentModeDoc, SurfaceEntry, WaypointDemo, SCENARIO_SCHEMA_VERSION};
use crate::plant::{DefectRegion, Injection, LayupPass, PlantConfig, Rivet, TaskSpec};
use crate::session::{InputFrame, ScriptStep, ScriptedUser, Trigger};
use crate::surface::{fit_control_points, BSplineSurface, Parameterization, SampleGrid, SurfaceDoc};
use nalgebra::Vector3;

fn free(id: &str, duration: f64, points: Vec<[f64; 3]>, scaling: f64) -> SegmentDoc {
    SegmentDoc {
        id: id.into(),
        mode: SegmentModeDoc::FreeSpace,
        approach: false,
        surface: None,
        model: None,
        demo: Some(WaypointDemo {
            duration,
            fractions: None,
            points,
        }),
        scaling: [scaling; 3],
        gamma: None,
        stiffness: None,
        rate_includes_force: None,
        orientation: None,
        calibrated: false,
        edge_margin: None,
    }
}

fn approach(id: &str, surface: &str, duration: f64, points: Vec<[f64; 3]>, scaling: f64) -> SegmentDoc {
    SegmentDoc {
        approach: true,
        surface: Some(surface.into()),
        ..free(id, duration, points, scaling)
    }
}

fn hybrid(id: &str, surface: &str, duration: f64, fractions: Option<Vec<f64>>, points: Vec<[f64; 3]>, scaling: [f64; 3]) -> SegmentDoc {
    SegmentDoc {
        id: id.into(),
        mode: SegmentModeDoc::HybridSurface,
        approach: false,
        surface: Some(surface.into()),
        model: None,
        demo: Some(WaypointDemo {
            duration,
            fractions,
            points,
        }),
        scaling,
        gamma: None,
        stiffness: None,
        rate_includes_force: None,
        orientation: None,
        calibrated: false,
        edge_margin: None,
    }
}

fn arr(p: Vector3<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn inline(id: &str, s: &BSplineSurface) -> SurfaceEntry {
    SurfaceEntry {
        id: id.into(),
        file: None,
        inline: Some(SurfaceDoc::from_surface(s)),
    }
}

fn step(when: Trigger, u: [f64; 3], frame: InputFrame) -> ScriptStep {
    ScriptStep {
        when,
        u,
        frame,
        scaling: None,
    }
}

fn in_segment(id: &str) -> Trigger {
    Trigger {
        segment: Some(id.into()),
        ..Trigger::default()
    }
}

fn at_progress(id: &str, min: f64) -> Trigger {
    Trigger {
        progress_min: Some(min),
        ..in_segment(id)
    }
}

/// Flat riveting panel: 0.4 m along x (u) by 0.3 m along y (v) at z = 0.05 m.
pub fn panel_surface() -> BSplineSurface {
    let (rows, cols) = (4, 4);
    let pts = (0..rows)
        .flat_map(|i| {
            (0..cols).map(move |j| Vector3::new(0.3 + 0.4 * i as f64 / 3.0, -0.15 + 0.3 * j as f64 / 3.0, 0.05))
        })
        .collect();
    BSplineSurface::uniform(3, 3, rows, cols, pts).expect("valid panel")
}

/// Gently curved panel: 0.3 m along x, 0.3 m along y, crowned 20 mm along x.
pub fn polishing_surface() -> BSplineSurface {
    let (rows, cols) = (6, 4);
    let pts = (0..rows)
        .flat_map(|i| {
            let xi = i as f64 / (rows - 1) as f64;
            (0..cols).map(move |j| {
                let eta = j as f64 / (cols - 1) as f64;
                Vector3::new(0.35 + 0.3 * xi, -0.15 + 0.3 * eta, 0.04 + 0.02 * (std::f64::consts::PI * xi).sin())
            })
        })
        .collect();
    BSplineSurface::uniform(3, 3, rows, cols, pts).expect("valid polishing panel")
}

/// Single-curvature airfoil section fitted to sampled geometry: chord 0.3 m
/// along x (u), span 0.25 m along y (v).
pub fn airfoil_surface() -> BSplineSurface {
    let samples = SampleGrid::from_fn(40, 10, |i, j| {
        let xi = i as f64 / 39.0;
        let eta = j as f64 / 9.0;
        let z = 0.045 * (std::f64::consts::PI * xi).sin() * (1.0 - 0.35 * xi) + 0.01 * xi;
        Vector3::new(0.35 + 0.3 * xi, -0.125 + 0.25 * eta, 0.03 + z)
    });
    fit_control_points(&samples, 3, 3, 9, 4, &Parameterization::ChordLength)
        .expect("airfoil samples cover the grid")
        .surface
}

const PANEL: &str = "panel";
const INSERTION_HOLES: [(f64, f64); 3] = [(0.25, 0.5), (0.5, 0.5), (0.75, 0.5)];
/// Where the holes of rivets 2 and 3 really are, relative to the plan.
pub const INSERTION_OFFSETS: [[f64; 3]; 2] = [[0.003, 0.0, 0.0], [0.0, -0.003, 0.0]];
const INSERTION_CLEARANCE: f64 = 0.004;
const PLACE_FORCE: f64 = 5.0;

/// Rivet insertion: grab, carry and place, three times.
pub fn insertion_scenario() -> ScenarioDoc {
    let surf = panel_surface();
    let bin = [0.5, -0.3, 0.12];
    let home: [f64; 3] = [0.45, -0.25, 0.25];
    let s_bar = 0.01;
    let (su, sv) = (s_bar / 0.4, s_bar / 0.3);
    let mut segments = Vec::new();
    let mut rivets = Vec::new();
    let mut from = home;
    for (k, &(u, v)) in INSERTION_HOLES.iter().enumerate() {
        let n = k + 1;
        let hole = arr(surf.eval(u, v));
        let above = [hole[0], hole[1], hole[2] + 0.1];
        let lift = [from[0], from[1], from[2].max(0.17)];
        segments.push(free(&format!("grab_{n}"), 2.0, vec![from, lift, bin], s_bar));
        segments.push(approach(
            &format!("carry_{n}"),
            PANEL,
            2.5,
            vec![bin, above, [hole[0], hole[1], hole[2] + INSERTION_CLEARANCE]],
            s_bar,
        ));
        segments.push(hybrid(
            &format!("place_{n}"),
            PANEL,
            2.5,
            Some(vec![0.0, 0.5, 1.0]),
            vec![[u, v, 0.0], [u, v, PLACE_FORCE], [u, v, PLACE_FORCE]],
            [su, sv, 0.0],
        ));
        rivets.push(Rivet {
            id: format!("rivet_{n}"),
            segment: format!("place_{n}"),
            target: hole,
        });
        from = hole;
    }
    ScenarioDoc {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "insertion".into(),
        description: "Place three rivets; holes 2 and 3 are offset 3 mm from the plan.".into(),
        dt: 0.001,
        max_time: None,
        defaults: Defaults {
            gamma: 0.5,
            ..Defaults::default()
        },
        plant: PlantConfig::default(),
        task: Some(TaskSpec::Insertion {
            surface: PANEL.into(),
            tolerance: 0.001,
            rivets,
        }),
        injections: vec![
            Injection::RegistrationOffset {
                target: "rivet_2".into(),
                offset: INSERTION_OFFSETS[0],
            },
            Injection::RegistrationOffset {
                target: "rivet_3".into(),
                offset: INSERTION_OFFSETS[1],
            },
        ],
        surfaces: vec![inline(PANEL, &surf)],
        segments,
    }
}

/// Deflection the insertion operator holds toward a misplaced hole.
pub const INSERTION_DEFLECTION: f64 = 0.3;

/// Operator who sees the misplaced holes late in each carry and nudges the
/// rivet over until it is seated.
pub fn insertion_corrective_user() -> ScriptedUser {
    let mut steps = Vec::new();
    for (k, offset) in INSERTION_OFFSETS.iter().enumerate() {
        let n = k + 2;
        let norm = (offset[0].powi(2) + offset[1].powi(2) + offset[2].powi(2)).sqrt();
        let u = offset.map(|c| INSERTION_DEFLECTION * c / norm);
        steps.push(step(at_progress(&format!("carry_{n}"), 0.5), u, InputFrame::Device));
        if n < 3 {
            steps.push(step(in_segment(&format!("grab_{}", n + 1)), [0.0; 3], InputFrame::Device));
        }
    }
    ScriptedUser::new("insertion-corrective", steps)
}

const POLISH: &str = "workpiece";
pub const POLISH_FORCE: f64 = 5.0;
const POLISH_TRACKS: [f64; 3] = [0.2, 0.5, 0.8];
const POLISH_U: (f64, f64) = (0.1, 0.9);

/// Polishing: approach, three force-controlled passes joined by step-overs, recede.
pub fn polishing_scenario() -> ScenarioDoc {
    let surf = polishing_surface();
    let (u0, u1) = POLISH_U;
    let f = POLISH_FORCE;
    let scaling = [0.01 / 0.3, 0.01 / 0.3, 8.0];
    let start = surf.eval(u0, POLISH_TRACKS[0]);
    let home = [start.x - 0.05, start.y, start.z + 0.12];
    let mut segments = vec![approach(
        "approach",
        POLISH,
        2.0,
        vec![home, [start.x, start.y, start.z + 0.004]],
        0.01,
    )];
    for (k, &v) in POLISH_TRACKS.iter().enumerate() {
        let n = k + 1;
        let (a, b) = if k % 2 == 0 { (u0, u1) } else { (u1, u0) };
        let lead = a + (b - a) * 0.08;
        let trail = a + (b - a) * 0.92;
        let f_start = if k == 0 { 0.0 } else { f };
        let f_end = if k == POLISH_TRACKS.len() - 1 { 0.0 } else { f };
        segments.push(hybrid(
            &format!("pass_{n}"),
            POLISH,
            4.0,
            Some(vec![0.0, 0.1, 0.9, 1.0]),
            vec![[a, v, f_start], [lead, v, f], [trail, v, f], [b, v, f_end]],
            scaling,
        ));
        if let Some(&next_v) = POLISH_TRACKS.get(k + 1) {
            segments.push(hybrid(
                &format!("step_{n}"),
                POLISH,
                1.0,
                None,
                vec![[b, v, f], [b, next_v, f]],
                scaling,
            ));
        }
    }
    let end_u = if POLISH_TRACKS.len() % 2 == 1 { u1 } else { u0 };
    let end = surf.eval(end_u, *POLISH_TRACKS.last().unwrap());
    segments.push(approach(
        "recede",
        POLISH,
        1.5,
        vec![arr(end), [end.x, end.y, end.z + 0.03], [end.x + 0.05, end.y, end.z + 0.12]],
        0.01,
    ));
    ScenarioDoc {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "polishing".into(),
        description: "Three polishing passes; one region needs twice the nominal force.".into(),
        dt: 0.001,
        max_time: None,
        defaults: Defaults::default(),
        plant: PlantConfig::default(),
        task: Some(TaskSpec::Polishing {
            surface: POLISH.into(),
            nominal_force: f,
            dwell: 0.3,
            grid: [40, 40],
            defect: None,
        }),
        injections: vec![Injection::DefectRegion(DefectRegion {
            u: [0.45, 0.6],
            v: [0.42, 0.58],
            required_force: 2.0 * f,
        })],
        surfaces: vec![inline(POLISH, &surf)],
        segments,
    }
}

/// Operator who presses harder while the middle pass crosses the stubborn spot.
pub fn polishing_corrective_user() -> ScriptedUser {
    ScriptedUser::new(
        "polishing-corrective",
        vec![
            step(at_progress("pass_2", 0.1), [0.0, 0.0, 1.0], InputFrame::Channels),
            step(at_progress("pass_2", 0.9), [0.0; 3], InputFrame::Channels),
        ],
    )
}

const AIRFOIL: &str = "airfoil";
pub const LAYUP_PASSES: usize = 10;
pub const LAYUP_FORCE: f64 = 8.0;
const LAYUP_U: (f64, f64) = (0.08, 0.92);
/// The pass planned off its track (1-based).
pub const LAYUP_MISALIGNED: usize = 6;
pub const LAYUP_OFFSET: f64 = 0.008;

fn layup_track(k: usize) -> f64 {
    0.1 + 0.08 * k as f64
}

/// Layup: approach, ten alternating roller passes with step-overs, recede.
pub fn layup_scenario() -> ScenarioDoc {
    let surf = airfoil_surface();
    let (u0, u1) = LAYUP_U;
    let f = LAYUP_FORCE;
    let s_bar = 0.01;
    let scaling = [s_bar / 0.3, s_bar / 0.25, 4.0];
    let start = surf.eval(u0, layup_track(0));
    let home = [start.x - 0.05, start.y, start.z + 0.12];
    let mut segments = vec![approach(
        "approach",
        AIRFOIL,
        2.0,
        vec![home, [start.x, start.y, start.z + 0.004]],
        0.01,
    )];
    let mut passes = Vec::new();
    for k in 0..LAYUP_PASSES {
        let n = k + 1;
        let v = layup_track(k);
        let (a, b) = if k % 2 == 0 { (u0, u1) } else { (u1, u0) };
        let f_start = if k == 0 { 0.0 } else { f };
        let f_end = if k == LAYUP_PASSES - 1 { 0.0 } else { f };
        let lead = a + (b - a) * 0.05;
        let trail = a + (b - a) * 0.95;
        segments.push(hybrid(
            &format!("pass_{n}"),
            AIRFOIL,
            3.0,
            Some(vec![0.0, 0.05, 0.95, 1.0]),
            vec![[a, v, f_start], [lead, v, f], [trail, v, f], [b, v, f_end]],
            scaling,
        ));
        passes.push(LayupPass {
            segment: format!("pass_{n}"),
            v_track: v,
            u_from: a,
            u_to: b,
        });
        if k + 1 < LAYUP_PASSES {
            segments.push(hybrid(
                &format!("step_{n}"),
                AIRFOIL,
                0.8,
                None,
                vec![[b, v, f], [b, layup_track(k + 1), f]],
                scaling,
            ));
        }
    }
    let end_u = if LAYUP_PASSES % 2 == 1 { u1 } else { u0 };
    let end = surf.eval(end_u, layup_track(LAYUP_PASSES - 1));
    segments.push(approach(
        "recede",
        AIRFOIL,
        1.5,
        vec![arr(end), [end.x, end.y, end.z + 0.03], [end.x - 0.05, end.y, end.z + 0.12]],
        0.01,
    ));
    ScenarioDoc {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "layup".into(),
        description: "Ten roller passes; pass 6 is planned 8 mm off its track.".into(),
        dt: 0.001,
        max_time: None,
        defaults: Defaults {
            gamma: 2.0,
            // resolves the short lead-in and run-out of each pass
            dmp: DmpConfig {
                bases: 60,
                ..DmpConfig::default()
            },
            ..Defaults::default()
        },
        plant: PlantConfig::default(),
        task: Some(TaskSpec::Layup {
            surface: AIRFOIL.into(),
            bound: 0.004,
            bins: 30,
            edge_fraction: 0.1,
            passes,
        }),
        injections: vec![Injection::MisalignedPass {
            segment: format!("pass_{LAYUP_MISALIGNED}"),
            lateral_offset: LAYUP_OFFSET,
        }],
        surfaces: vec![inline(AIRFOIL, &surf)],
        segments,
    }
}

/// Operator who notices the crease halfway through pass 6, backs the roller
/// up while steering onto the track, re-rolls the pass with only the lateral
/// correction, and lets go before pass 7.
pub fn layup_corrective_user() -> ScriptedUser {
    let pass = format!("pass_{LAYUP_MISALIGNED}");
    // pass 6 rolls toward -u, so pushing +u opposes it; the plan sits at +v
    let against = if LAYUP_MISALIGNED.is_multiple_of(2) { 1.0 } else { -1.0 };
    let lateral = -1.0;
    ScriptedUser::new(
        "layup-backtrack",
        vec![
            step(at_progress(&pass, 0.55), [0.8 * against, 0.6 * lateral, 0.0], InputFrame::Channels),
            step(
                Trigger {
                    direction: Some(Direction::Backward),
                    progress_max: Some(0.03),
                    ..in_segment(&pass)
                },
                [0.0, 0.8 * lateral, 0.0],
                InputFrame::Channels,
            ),
            step(
                Trigger {
                    direction: Some(Direction::Forward),
                    ..at_progress(&pass, 0.92)
                },
                [0.0; 3],
                InputFrame::Channels,
            ),
        ],
    )
}

/// Short approach, draw and recede on the polishing panel.
pub fn three_segment_scenario() -> ScenarioDoc {
    let surf = polishing_surface();
    let a = surf.eval(0.2, 0.5);
    let b = surf.eval(0.8, 0.5);
    ScenarioDoc {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "draw".into(),
        description: "Approach, one surface stroke, recede.".into(),
        dt: 0.001,
        max_time: None,
        defaults: Defaults::default(),
        plant: PlantConfig::default(),
        task: None,
        injections: Vec::new(),
        surfaces: vec![inline(POLISH, &surf)],
        segments: vec![
            approach("approach", POLISH, 1.5, vec![[a.x, a.y, a.z + 0.1], [a.x, a.y, a.z + 0.004]], 0.01),
            hybrid(
                "draw",
                POLISH,
                2.0,
                Some(vec![0.0, 0.15, 1.0]),
                vec![[0.2, 0.5, 0.0], [0.25, 0.5, 4.0], [0.8, 0.5, 4.0]],
                [0.02, 0.02, 5.0],
            ),
            approach("recede", POLISH, 1.5, vec![arr(b), [b.x, b.y, b.z + 0.1]], 0.01),
        ],
    }
}
