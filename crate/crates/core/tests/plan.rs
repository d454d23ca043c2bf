use corrective_core::plan::orientation::{lerp_normalized, quat_from_array};
use corrective_core::plan::*;
use corrective_core::plant::{Injection, TaskSpec};
use corrective_core::surface::SurfaceFrame;
use corrective_core::tasks::*;
use corrective_core::StateVector;
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;

fn compile(doc: &ScenarioDoc) -> BehaviorPlan {
    compile_plan(doc, None).expect("scenario compiles")
}

/// Approach ending exactly on the surface, then a stroke, then a lift-off.
fn touching_doc() -> ScenarioDoc {
    let mut doc = three_segment_scenario();
    let plan = compile(&doc);
    let a = plan.surfaces[0].surface.eval(0.2, 0.5);
    doc.segments[0].demo.as_mut().unwrap().points[1] = [a.x, a.y, a.z];
    doc
}

#[test]
fn three_segment_plan_compiles_with_summed_duration() {
    let plan = compile(&three_segment_scenario());
    assert_eq!(plan.segments.len(), 3);
    assert!((plan.nominal_duration() - 5.0).abs() < 1e-9);
    assert_eq!(
        plan.transitions,
        vec![TransitionRule::FreeToSurface, TransitionRule::SurfaceToFree]
    );
}

#[test]
fn hybrid_segment_without_surface_is_rejected() {
    let mut doc = three_segment_scenario();
    doc.segments[1].surface = None;
    let err = compile_plan(&doc, None).unwrap_err();
    assert!(matches!(&err, PlanError::Segment { segment, .. } if segment == "draw"), "{err}");
}

#[test]
fn unknown_surface_and_bad_step_are_rejected() {
    let mut doc = three_segment_scenario();
    doc.segments[1].surface = Some("missing".into());
    assert!(compile_plan(&doc, None).unwrap_err().to_string().contains("missing"));

    let mut doc = three_segment_scenario();
    doc.dt = 0.05;
    assert!(matches!(compile_plan(&doc, None), Err(PlanError::Document(_))));
}

#[test]
fn endpoint_gap_names_both_segments() {
    let mut doc = insertion_scenario();
    doc.segments[1].demo.as_mut().unwrap().points[0][0] += 0.01;
    match compile_plan(&doc, None) {
        Err(PlanError::Endpoint { from, to, .. }) => assert_eq!((from.as_str(), to.as_str()), ("grab_1", "carry_1")),
        other => panic!("expected endpoint error, got {other:?}"),
    }
}

#[test]
fn insertion_scenario_round_trips_through_toml() {
    let doc = insertion_scenario();
    let text = doc.to_toml().unwrap();
    let back = ScenarioDoc::parse(&text).unwrap();
    assert_eq!(back, doc);
    let plan = compile(&back);
    assert_eq!(plan.segments.len(), 9);
    for (k, seg) in plan.segments.iter().enumerate() {
        let want = if k % 3 == 2 { Mode::HybridSurface } else { Mode::FreeSpace };
        assert_eq!(seg.mode, want, "segment {}", seg.id);
    }
}

#[test]
fn scenario_files_resolve_relative_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = three_segment_scenario();
    let inline = doc.surfaces[0].inline.take().unwrap();
    inline.save(&dir.path().join("panel.toml")).unwrap();
    doc.surfaces[0].file = Some("panel.toml".into());
    doc.save(&dir.path().join("scenario.toml")).unwrap();
    let loaded = ScenarioDoc::load(&dir.path().join("scenario.toml")).unwrap();
    let plan = compile_plan(&loaded, Some(dir.path())).unwrap();
    assert_eq!(plan.surfaces[0].surface, compile(&three_segment_scenario()).surfaces[0].surface);
    assert!(compile_plan(&loaded, None).is_err());
}

#[test]
fn schema_version_is_checked() {
    let text = three_segment_scenario().to_toml().unwrap().replace("schema_version = 1", "schema_version = 7");
    assert!(ScenarioDoc::parse(&text).unwrap_err().to_string().contains("schema version"));
}

#[test]
fn zero_correction_transition_keeps_the_nominal_start() {
    let plan = compile(&insertion_scenario());
    for w in 0..plan.segments.len() - 1 {
        let (a, b) = (&plan.segments[w], &plan.segments[w + 1]);
        let end = SegmentEnd {
            nominal: StateVector(a.model.forward.goals()),
            correction: vec![0.0; 3],
        };
        let t = transition(a, &end, b, &plan.surfaces);
        assert_eq!(t.model, b.model, "{} -> {}", a.id, b.id);
        assert!(t.warning.is_none());
    }
}

#[test]
fn same_mode_transition_adds_the_correction_to_the_start() {
    let plan = compile(&insertion_scenario());
    let (a, b) = (&plan.segments[0], &plan.segments[1]);
    let end = SegmentEnd {
        nominal: StateVector(a.model.forward.goals()),
        correction: vec![0.002, 0.0, -0.001],
    };
    let t = transition(a, &end, b, &plan.surfaces);
    let starts = t.model.forward.starts();
    let nominal = b.model.forward.starts();
    assert_eq!(starts[0], nominal[0] + 0.002);
    assert_eq!(starts[1], nominal[1]);
    assert_eq!(starts[2], nominal[2] - 0.001);
    assert_eq!(t.model.backward.goals(), starts);
}

#[test]
fn corrected_free_to_surface_handoff_lands_on_the_corrected_point() {
    let plan = compile(&touching_doc());
    let (a, b) = (&plan.segments[0], &plan.segments[1]);
    let surf = &plan.surfaces[0].surface;
    let end_nominal = a.model.forward.goals();
    let frame = surf.frame(0.2, 0.5).unwrap();
    let shift = frame.t_u * 0.005;
    let end = SegmentEnd {
        nominal: StateVector(end_nominal.clone()),
        correction: vec![shift.x, shift.y, shift.z],
    };
    let t = transition(a, &end, b, &plan.surfaces);
    let start = t.model.forward.starts();
    let landed = surf.eval(start[0], start[1]);
    let corrected = Vector3::from_column_slice(&end.commanded().0);
    assert!((landed - corrected).norm() < 1e-4, "{}", (landed - corrected).norm());
    // force keeps its nominal start
    assert_eq!(start[2], b.model.forward.starts()[2]);
}

#[test]
fn force_correction_is_dropped_when_leaving_the_surface() {
    let plan = compile(&three_segment_scenario());
    let (a, b) = (&plan.segments[1], &plan.segments[2]);
    let end = SegmentEnd {
        nominal: StateVector(a.model.forward.goals()),
        correction: vec![0.0, 0.0, 3.0],
    };
    let t = transition(a, &end, b, &plan.surfaces);
    assert_eq!(t.model, b.model);

    // a parameter correction moves the Cartesian start by the surface displacement
    let end = SegmentEnd {
        nominal: StateVector(a.model.forward.goals()),
        correction: vec![0.01, 0.0, 3.0],
    };
    let t = transition(a, &end, b, &plan.surfaces);
    let surf = &plan.surfaces[0].surface;
    let g = a.model.forward.goals();
    let shift = surf.eval(g[0] + 0.01, g[1]) - surf.eval(g[0], g[1]);
    let moved = Vector3::from_column_slice(&t.model.forward.starts());
    let nominal = Vector3::from_column_slice(&b.model.forward.starts());
    assert!((moved - nominal - shift).norm() < 1e-15);
}

#[test]
fn identical_keyframes_give_a_constant_orientation() {
    let q = [0.5, 0.5, 0.5, 0.5];
    let policy = OrientationPolicy::Prescribed { keyframes: vec![q, q, q] };
    let mut st = OrientationState::new(UnitQuaternion::identity());
    let expected = quat_from_array(q);
    for k in 0..=20 {
        let out = orientation_at(&policy, k as f64 / 20.0, None, &Vector3::zeros(), &mut st, 0.001);
        assert!(out.angle_to(&expected) < 1e-12);
    }
}

#[test]
fn lerp_midpoint_is_close_to_slerp() {
    let a = UnitQuaternion::identity();
    let b = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    let mid = lerp_normalized(&a, &b, 0.5);
    assert!((mid.into_inner().norm() - 1.0).abs() < 1e-9);
    let slerp = a.slerp(&b, 0.5);
    assert!(mid.angle_to(&slerp).to_degrees() < 4.0);
}

#[test]
fn motion_aligned_tool_on_a_plane() {
    let frame = SurfaceFrame {
        origin: Vector3::zeros(),
        normal: Vector3::z(),
        t_u: Vector3::x(),
        t_v: Vector3::y(),
    };
    let mut st = OrientationState::new(UnitQuaternion::identity());
    let mut q = UnitQuaternion::identity();
    for _ in 0..100 {
        q = orientation_at(
            &OrientationPolicy::SurfaceNormalMotionAligned,
            0.5,
            Some(&frame),
            &Vector3::new(0.1, 0.0, 0.0),
            &mut st,
            0.001,
        );
    }
    let tool_axis = q * Vector3::z();
    let roller_axis = q * Vector3::y();
    assert!((tool_axis - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-6);
    assert!(roller_axis.dot(&Vector3::x()).abs() < 1e-6);

    // no motion: the previous orientation is held
    let held = orientation_at(
        &OrientationPolicy::SurfaceNormalMotionAligned,
        0.6,
        Some(&frame),
        &Vector3::zeros(),
        &mut st,
        0.001,
    );
    assert_eq!(held, q);
}

#[test]
fn coarse_keyframes_raise_a_warning() {
    let mut doc = three_segment_scenario();
    doc.segments[0].orientation = Some(OrientationPolicy::Prescribed {
        keyframes: vec![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
    });
    let plan = compile(&doc);
    assert_eq!(plan.warnings.len(), 1);
    assert!(plan.warnings[0].contains("approach"));
}

#[test]
fn registration_offset_moves_the_rivet_target() {
    let doc = insertion_scenario();
    let plan = compile(&doc);
    let Some(TaskSpec::Insertion { rivets, .. }) = &plan.task else { panic!() };
    let Some(TaskSpec::Insertion { rivets: planned, .. }) = &doc.task else { panic!() };
    assert_eq!(rivets[0].target, planned[0].target);
    for k in 0..3 {
        assert!((rivets[1].target[k] - planned[1].target[k] - INSERTION_OFFSETS[0][k]).abs() < 1e-15);
        assert!((rivets[2].target[k] - planned[2].target[k] - INSERTION_OFFSETS[1][k]).abs() < 1e-15);
    }
}

#[test]
fn misaligned_pass_shifts_its_interior_waypoints() {
    let doc = layup_scenario();
    let plan = compile(&doc);
    let seg = plan.segments.iter().find(|s| s.id == "pass_6").unwrap();
    let raw = doc.segments.iter().find(|s| s.id == "pass_6").unwrap().demo.as_ref().unwrap();
    let surf = &plan.surfaces[0].surface;
    // endpoints untouched
    assert_eq!(seg.model.forward.starts()[1], raw.points[0][1]);
    assert_eq!(seg.model.forward.goals()[1], raw.points[3][1]);
    // the fitted path sits 8 mm off in the middle
    let mut doc2 = doc.clone();
    doc2.injections.clear();
    let plan2 = compile(&doc2);
    let clean = plan2.segments.iter().find(|s| s.id == "pass_6").unwrap();
    let a = corrective_core::dmp::rollout(&seg.model, corrective_core::dmp::Direction::Forward, |_| 1.0, 0.001).unwrap();
    let b = corrective_core::dmp::rollout(&clean.model, corrective_core::dmp::Direction::Forward, |_| 1.0, 0.001).unwrap();
    let mid = a.len() / 2;
    let gap = (surf.eval(a.states[mid][0], a.states[mid][1]) - surf.eval(b.states[mid][0], b.states[mid][1])).norm();
    assert!((gap - LAYUP_OFFSET).abs() < 2e-4, "{gap}");
}

#[test]
fn injections_must_match_the_task() {
    let mut doc = polishing_scenario();
    doc.injections.push(Injection::RegistrationOffset {
        target: "rivet_1".into(),
        offset: [0.0; 3],
    });
    assert!(matches!(compile_plan(&doc, None), Err(PlanError::Injection(_))));

    let text = insertion_scenario()
        .to_toml()
        .unwrap()
        .replacen("kind = \"registration_offset\"", "kind = \"gravity_well\"", 1);
    assert!(ScenarioDoc::parse(&text).is_err());
}

proptest! {
    #[test]
    fn prescribed_orientations_stay_unit(
        a in prop::array::uniform4(-1.0f64..1.0),
        b in prop::array::uniform4(-1.0f64..1.0),
        p in 0.0f64..1.0,
    ) {
        prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 0.1);
        prop_assume!(b.iter().map(|x| x * x).sum::<f64>() > 0.1);
        let policy = OrientationPolicy::Prescribed { keyframes: vec![a, b] };
        let mut st = OrientationState::new(UnitQuaternion::identity());
        let q = orientation_at(&policy, p, None, &Vector3::zeros(), &mut st, 0.001);
        prop_assert!((q.into_inner().norm() - 1.0).abs() < 1e-9);
    }
}
