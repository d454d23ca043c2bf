use corrective_core::dmp::*;
use corrective_core::state::{ChannelKind, ChannelSpec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::PI;

const DT: f64 = 0.001;

fn pos(name: &str) -> ChannelSpec {
    ChannelSpec::new(name, ChannelKind::Position)
}

fn demo_1d(duration: f64, f: impl Fn(f64) -> f64) -> Demonstration {
    Demonstration::from_fn(vec![pos("x")], DT, duration, |t| vec![f(t)]).unwrap()
}

fn range(x: &[f64]) -> f64 {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Largest deviation between a rollout and reference samples on the same time grid.
fn max_err(rollout: &[f64], reference: &[f64]) -> f64 {
    reference
        .iter()
        .zip(rollout)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn forward(model: &DmpSegmentModel) -> Rollout {
    rollout(model, Direction::Forward, |_| 1.0, DT).unwrap()
}

fn min_jerk_demo(x0: f64, g: f64, duration: f64) -> Demonstration {
    demo_1d(duration, |t| x0 + (g - x0) * min_jerk(t / duration))
}

#[test]
fn forcing_matches_batch_least_squares_oracle() {
    let canonical = CanonicalSystem::default();
    let basis = BasisSet::standard(10, &canonical, DmpConfig::default().width_scale).unwrap();
    let phases: Vec<f64> = (0..=2000)
        .map(|k| canonical.phase_at(k as f64 / 2000.0))
        .collect();
    let target: Vec<f64> = phases.iter().map(|s| (2.0 * PI * s).sin()).collect();

    // oracle: one global least-squares solve over normalized basis features
    let features = DMatrix::from_fn(phases.len(), basis.len(), |k, i| {
        let total: f64 = basis.activations(phases[k]).sum();
        basis.activation(i, phases[k]) / total
    });
    let w_oracle = features
        .clone()
        .svd(true, true)
        .solve(&DVector::from_vec(target.clone()), 1e-12)
        .unwrap();

    let mut channel = DmpChannel::zero_forcing(pos("x"), 0.0, 0.0, basis.len(), 25.0);
    channel.weights = lwr_weights(&basis, &phases, &target);
    let ours = forcing_value(&channel, &basis, 0.5);
    channel.weights = w_oracle.iter().cloned().collect();
    let oracle = forcing_value(&channel, &basis, 0.5);
    assert!(!ours.degenerate);
    assert!(
        (ours.value - oracle.value).abs() < 0.05,
        "lwr {} vs batch {}",
        ours.value,
        oracle.value
    );
}

#[test]
fn constant_demo_has_zero_weights() {
    let demo = demo_1d(1.0, |_| 0.42);
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    for variant in [&model.forward, &model.backward] {
        let ch = &variant.channels[0];
        assert!(ch.degenerate_goal);
        assert!(ch.weights.iter().all(|w| w.abs() < 1e-6));
    }
    let r = forward(&model);
    assert!(r.channel(0).iter().all(|x| (x - 0.42).abs() < 1e-12));
}

#[test]
fn min_jerk_fit_fidelity() {
    let demo = min_jerk_demo(0.0, 1.0, 1.0);
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let r = forward(&model);
    let err = max_err(&r.channel(0), &demo.channel(0));
    assert!(err < 0.02, "max error {err}");
    assert!(!model.forward.channels[0].degenerate_goal);
}

#[test]
fn two_channel_demo_fits_each_channel() {
    let spec = vec![pos("x"), ChannelSpec::new("f_z", ChannelKind::Force)];
    let demo = Demonstration::from_waypoints(
        spec,
        DT,
        2.0,
        &[0.0, 0.3, 0.7, 1.0],
        &[vec![0.1, 0.0], vec![0.19, 5.0], vec![0.31, 5.0], vec![0.4, 0.0]],
    )
    .unwrap();
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let r = forward(&model);
    for c in 0..2 {
        let reference = demo.channel(c);
        let err = max_err(&r.channel(c), &reference) / range(&reference);
        assert!(err < 0.02, "channel {c}: relative error {err}");
    }
}

#[test]
fn fidelity_holds_for_fifteen_bases() {
    let demo = min_jerk_demo(-0.2, 0.3, 1.5);
    let config = DmpConfig {
        bases: 15,
        ..DmpConfig::default()
    };
    let model = DmpSegmentModel::fit(&demo, &config).unwrap();
    let r = forward(&model);
    assert!(max_err(&r.channel(0), &demo.channel(0)) / 0.5 < 0.02);
}

#[test]
fn backward_of_constant_demo_is_flat() {
    let demo = demo_1d(1.0, |_| -3.0);
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    assert!(model.backward.channels[0].weights.iter().all(|w| w.abs() < 1e-6));
}

#[test]
fn backward_ramp_follows_reversed_demo() {
    let demo = min_jerk_demo(0.0, 1.0, 1.0);
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let r = rollout(&model, Direction::Backward, |_| 1.0, DT).unwrap();
    let x = r.channel(0);
    assert!((x[0] - 1.0).abs() < 1e-12);
    assert!(x.last().unwrap().abs() < 1e-3);
    let reversed = demo.reversed().channel(0);
    assert!(max_err(&x, &reversed) < 0.02);
}

#[test]
fn backward_sine_mirrors_forward_rollout() {
    let demo = demo_1d(1.0, |t| (2.0 * PI * t).sin());
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let fwd = forward(&model).channel(0);
    let bwd = rollout(&model, Direction::Backward, |_| 1.0, DT).unwrap().channel(0);
    let n = demo.len();
    let mirrored: Vec<f64> = (0..n).map(|k| fwd[n - 1 - k]).collect();
    let err = max_err(&bwd[..n], &mirrored) / 2.0;
    assert!(err < 0.03, "relative mirror error {err}");
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let canonical = CanonicalSystem::default();
    let basis = BasisSet::standard(20, &canonical, 8.0).unwrap();
    let ch = DmpChannel::zero_forcing(pos("x"), 0.7, 0.7, 20, 25.0);
    let variant = |direction| DmpVariant {
        direction,
        channels: vec![ch.clone()],
    };
    let model = DmpSegmentModel::new(
        canonical,
        basis,
        1.0,
        variant(Direction::Forward),
        variant(Direction::Backward),
    )
    .unwrap();
    let mut state = model.initial_state();
    for _ in 0..500 {
        state = step(&model, &state, 1.0, DT, Direction::Forward).unwrap();
        assert_eq!(state.x, vec![0.7]);
        assert_eq!(state.z, vec![0.0]);
    }
}

fn zero_forcing_model(x0: f64, g: f64, duration: f64) -> DmpSegmentModel {
    let canonical = CanonicalSystem::default();
    let basis = BasisSet::standard(20, &canonical, 8.0).unwrap();
    let fwd = DmpChannel::zero_forcing(pos("x"), x0, g, 20, 25.0);
    let bwd = DmpChannel::zero_forcing(pos("x"), g, x0, 20, 25.0);
    DmpSegmentModel::new(
        canonical,
        basis,
        duration,
        DmpVariant {
            direction: Direction::Forward,
            channels: vec![fwd],
        },
        DmpVariant {
            direction: Direction::Backward,
            channels: vec![bwd],
        },
    )
    .unwrap()
}

/// Closed-form critically damped response of `x'' + alpha x' + alpha beta x = alpha beta g`
/// with time measured in units of the segment duration.
fn critically_damped(t: f64, g: f64, alpha: f64) -> f64 {
    let w = alpha / 2.0;
    g * (1.0 - (1.0 + w * t) * (-w * t).exp())
}

#[test]
fn zero_forcing_converges_to_goal() {
    let model = zero_forcing_model(0.0, 1.0, 1.0);
    let r = forward(&model);
    let end = *r.channel(0).last().unwrap();
    assert!((end - 1.0).abs() < 1e-3, "end {end}");
    for (t, x) in r.times.iter().zip(r.channel(0)) {
        assert!((x - critically_damped(*t, 1.0, 25.0)).abs() < 1e-9);
    }
}

#[test]
fn temporal_scaling_preserves_path() {
    let demo = min_jerk_demo(0.0, 1.0, 1.0);
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let base = forward(&model);
    let x1 = base.channel(0);
    for (k, stride) in [(0.5, 0.5), (2.0, 2.0)] {
        let scaled = rollout(&model, Direction::Forward, |_| k, DT).unwrap();
        let xk = scaled.channel(0);
        // wall-clock duration scales with tau
        let ratio = scaled.times.last().unwrap() / base.times.last().unwrap();
        assert!((ratio - k).abs() < 0.01, "duration ratio {ratio}");
        // align by phase: sample i of the base rollout has the phase of sample i*k of the scaled one
        let mut worst: f64 = 0.0;
        for i in 0..x1.len() {
            let j = i as f64 * stride;
            if j.fract() != 0.0 || j as usize >= xk.len() {
                continue;
            }
            let j = j as usize;
            assert!((scaled.phases[j] - base.phases[i]).abs() < 1e-9);
            worst = worst.max((xk[j] - x1[i]).abs());
        }
        assert!(worst < 1e-3, "tau {k}: path error {worst}");
    }
}

#[test]
fn step_halving_changes_little() {
    let demo = demo_1d(1.0, |t| 0.3 * min_jerk(t) + 0.05 * (2.0 * PI * t).sin());
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let coarse = rollout(&model, Direction::Forward, |_| 1.0, DT).unwrap().channel(0);
    let fine = rollout(&model, Direction::Forward, |_| 1.0, DT / 2.0).unwrap().channel(0);
    let span = range(&demo.channel(0));
    let err = coarse
        .iter()
        .enumerate()
        .filter(|(k, _)| 2 * k < fine.len())
        .map(|(k, x)| (x - fine[2 * k]).abs())
        .fold(0.0, f64::max);
    assert!(err / span < 1e-4, "step halving error {}", err / span);
}

#[test]
fn goal_convergence_for_rest_to_rest_demos() {
    for (x0, g, t) in [(0.0, 1.0, 1.0), (0.5, -0.2, 2.0), (10.0, 12.0, 0.8), (0.0, 0.05, 3.0)] {
        let demo = min_jerk_demo(x0, g, t);
        let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
        for direction in [Direction::Forward, Direction::Backward] {
            let r = rollout(&model, direction, |_| 1.0, DT).unwrap();
            let goal = model.variant(direction).channels[0].goal;
            let end = *r.channel(0).last().unwrap();
            let tol = 1e-3 * (g - x0).abs().max(1.0);
            assert!((end - goal).abs() < tol, "{direction:?} {x0}->{g}: end {end}");
        }
    }
}

#[test]
fn rollout_reports_non_convergence_with_partial_trace() {
    let model = zero_forcing_model(0.0, 1.0, 1.0);
    match rollout(&model, Direction::Forward, |_| 20.0, 0.01) {
        Err(RolloutError::NotConverged { max_steps, partial }) => {
            assert_eq!(max_steps, 1000);
            assert_eq!(partial.len(), max_steps + 1);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn step_guards() {
    let model = zero_forcing_model(0.0, 1.0, 1.0);
    let st = model.initial_state();
    assert_eq!(
        step(&model, &st, 0.05, DT, Direction::Forward),
        Err(DmpError::TimeConstantTooSmall(0.05))
    );
    assert!(matches!(
        step(&model, &st, f64::NAN, DT, Direction::Forward),
        Err(DmpError::PhaseFrozen(_))
    ));
    assert_eq!(
        step(&model, &st, f64::INFINITY, DT, Direction::Forward),
        Err(DmpError::PhaseFrozen(f64::INFINITY))
    );
    assert_eq!(
        step(&model, &st, -1.0, DT, Direction::Forward),
        Err(DmpError::DirectionMismatch(Direction::Forward))
    );
    assert_eq!(step(&model, &st, 1.0, 0.0, Direction::Forward), Err(DmpError::InvalidStep(0.0)));
    let bad = DmpState {
        s: 1.0,
        x: vec![0.0, 0.0],
        z: vec![0.0, 0.0],
    };
    assert!(matches!(
        step(&model, &bad, 1.0, DT, Direction::Forward),
        Err(DmpError::StateMismatch { .. })
    ));
}

#[test]
fn reversal_keeps_position_and_forward_phase_continuous() {
    let demo = min_jerk_demo(0.0, 1.0, 1.0);
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let mut st = model.initial_state();
    let mut trace = vec![st.s];
    for _ in 0..400 {
        st = step(&model, &st, 1.0, DT, Direction::Forward).unwrap();
        trace.push(st.s);
    }
    let x_switch = st.x[0];
    let mut back = reverse_state(&model, &st);
    assert_eq!(back.x[0], x_switch);
    assert!((model.forward_phase(Direction::Backward, back.s) - st.s).abs() < 1e-15);
    let mut prev_x = x_switch;
    for _ in 0..200 {
        back = step(&model, &back, -1.0, DT, Direction::Backward).unwrap();
        trace.push(model.forward_phase(Direction::Backward, back.s));
        // position keeps moving smoothly, now toward the start
        assert!((back.x[0] - prev_x).abs() < 3.0 * DT);
        prev_x = back.x[0];
    }
    assert!(prev_x < x_switch);
    let turn = 400;
    assert!(trace[..=turn].windows(2).all(|w| w[1] < w[0]));
    assert!(trace[turn..].windows(2).all(|w| w[1] > w[0]));
    assert!(trace.windows(2).all(|w| (w[1] - w[0]).abs() < 1e-2));
}

#[test]
fn model_document_round_trip() {
    let spec = vec![pos("x"), pos("y")];
    let demo = Demonstration::from_waypoints(spec, DT, 1.2, &[0.0, 1.0], &[vec![0.0, 0.1], vec![0.3, -0.1]])
        .unwrap();
    let model = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
    let text = DmpModelDoc::new(model.clone()).to_toml().unwrap();
    let back = DmpModelDoc::from_toml(&text).unwrap();
    assert_eq!(back, model);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seg.toml");
    DmpModelDoc::new(model.clone()).save(&path).unwrap();
    assert_eq!(DmpModelDoc::load(&path).unwrap(), model);

    let wrong = text.replace("schema_version = 1", "schema_version = 9");
    assert!(matches!(DmpModelDoc::from_toml(&wrong), Err(DmpError::Document(_))));
}

#[test]
fn short_demo_is_rejected() {
    let err = Demonstration::new(vec![pos("x")], DT, vec![vec![0.0].into(), vec![1.0].into()]).unwrap_err();
    assert_eq!(err, DmpError::DemoTooShort(2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn channel_independence(amp in -1.0f64..1.0, freq in 0.5f64..3.0, bump in -0.5f64..0.5) {
        let spec = vec![pos("x"), pos("y")];
        let demo = Demonstration::from_fn(spec, 0.002, 1.0, |t| {
            vec![amp * (freq * t).sin(), 0.2 * min_jerk(t)]
        })
        .unwrap();
        let perturbed_y: Vec<f64> = demo.channel(1).iter().enumerate()
            .map(|(k, y)| y + bump * (k as f64 * 0.01).cos())
            .collect();
        let other = demo.with_channel(1, &perturbed_y);
        let a = DmpSegmentModel::fit(&demo, &DmpConfig::default()).unwrap();
        let b = DmpSegmentModel::fit(&other, &DmpConfig::default()).unwrap();
        prop_assert_eq!(&a.forward.channels[0], &b.forward.channels[0]);
        prop_assert_eq!(&a.backward.channels[0], &b.backward.channels[0]);
    }

    #[test]
    fn phase_strictly_decreases(tau in 0.2f64..5.0, dt in 0.0005f64..0.01) {
        let model = zero_forcing_model(0.0, 1.0, 1.0);
        let mut st = model.initial_state();
        for _ in 0..200 {
            let next = step(&model, &st, tau, dt, Direction::Forward).unwrap();
            prop_assert!(next.s < st.s);
            prop_assert!(next.s > 0.0);
            st = next;
        }
    }

    #[test]
    fn temporal_invariance_for_any_constant_scaling(k in prop::sample::select(vec![0.5f64, 1.0, 2.0]), g in -2.0f64..2.0) {
        let model = zero_forcing_model(0.0, g, 1.0);
        let r = rollout(&model, Direction::Forward, |_| k, DT).unwrap();
        // the zero-forcing path as a function of phase has a closed form
        for (s, x) in r.phases.iter().zip(r.channel(0)) {
            let t_nominal = -s.ln();
            prop_assert!((x - critically_damped(t_nominal, g, 25.0)).abs() < 1e-3 * g.abs().max(1.0));
        }
    }
}
