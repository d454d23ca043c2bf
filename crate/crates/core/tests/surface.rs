use corrective_core::surface::*;
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Cox-de Boor recursion, written independently of the library's basis code.
fn cox_de_boor(i: usize, p: usize, t: f64, knots: &[f64]) -> f64 {
    if p == 0 {
        let last = knots[knots.len() - 1];
        let inside = knots[i] <= t && t < knots[i + 1];
        // close the final non-empty span at the right end of the domain
        let at_end = t == last && knots[i] < last && knots[i + 1] == last;
        return if inside || at_end { 1.0 } else { 0.0 };
    }
    let mut out = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        out += (t - knots[i]) / d1 * cox_de_boor(i, p - 1, t, knots);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        out += (knots[i + p + 1] - t) / d2 * cox_de_boor(i + 1, p - 1, t, knots);
    }
    out
}

fn naive_eval(s: &BSplineSurface, u: f64, v: f64) -> Vector3<f64> {
    let (p, q) = s.degrees();
    let (rows, cols) = s.grid_size();
    let mut r = Vector3::zeros();
    for i in 0..rows {
        for j in 0..cols {
            r += s.control_point(i, j) * (cox_de_boor(i, p, u, s.knots_u()) * cox_de_boor(j, q, v, s.knots_v()));
        }
    }
    r
}

fn wavy_surface() -> BSplineSurface {
    let pts = (0..7)
        .flat_map(|i| {
            (0..6).map(move |j| {
                let (x, y) = (0.05 * i as f64, 0.04 * j as f64);
                Vector3::new(x + 0.003 * (j as f64).sin(), y, 0.02 * (3.0 * x).sin() * (5.0 * y).cos())
            })
        })
        .collect();
    BSplineSurface::uniform(3, 3, 7, 6, pts).unwrap()
}

/// Single-curvature wing-like section: 0.3 m chord along x, 0.25 m span along y.
fn airfoil(xi: f64, eta: f64) -> Vector3<f64> {
    let z = 0.045 * (PI * xi).sin() * (1.0 - 0.35 * xi) + 0.01 * xi;
    Vector3::new(0.3 * xi, 0.25 * eta, z)
}

fn airfoil_fit() -> SurfaceFit {
    let samples = SampleGrid::from_fn(40, 10, |i, j| airfoil(i as f64 / 39.0, j as f64 / 9.0));
    fit_control_points(&samples, 3, 3, 9, 4, &Parameterization::ChordLength).unwrap()
}

fn cylinder_section(radius: f64, half_angle: f64) -> BSplineSurface {
    let samples = SampleGrid::from_fn(41, 6, |i, j| {
        let th = -half_angle + 2.0 * half_angle * i as f64 / 40.0;
        Vector3::new(radius * th.sin(), 0.2 * j as f64 / 5.0, radius * th.cos())
    });
    fit_control_points(&samples, 3, 1, 10, 2, &Parameterization::ChordLength)
        .unwrap()
        .surface
}

#[test]
fn eval_matches_naive_double_sum() {
    let s = wavy_surface();
    let mut worst: f64 = 0.0;
    for a in 0..50 {
        for b in 0..50 {
            let (u, v) = (a as f64 / 49.0, b as f64 / 49.0);
            worst = worst.max((s.eval(u, v) - naive_eval(&s, u, v)).norm());
        }
    }
    assert!(worst < 1e-12, "max deviation {worst}");
}

#[test]
fn partition_of_unity() {
    let s = wavy_surface();
    for k in 0..=1000 {
        let t = k as f64 / 1000.0;
        for axis in ['u', 'v'] {
            let (_, n, d) = s.basis(axis, t);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().sum::<f64>().abs() < 1e-9);
        }
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let s = wavy_surface();
    let h = 1e-6;
    for &(u, v) in &[(0.2, 0.3), (0.5, 0.5), (0.81, 0.07)] {
        let (_, ru, rv) = s.derivatives(u, v);
        let fu = (s.eval(u + h, v) - s.eval(u - h, v)) / (2.0 * h);
        let fv = (s.eval(u, v + h) - s.eval(u, v - h)) / (2.0 * h);
        assert!((ru - fu).norm() < 1e-6 * ru.norm().max(1.0));
        assert!((rv - fv).norm() < 1e-6 * rv.norm().max(1.0));
    }
}

#[test]
fn normal_is_orthogonal_to_finite_difference_tangents() {
    let s = wavy_surface();
    let h = 1e-6;
    for a in 0..=10 {
        for b in 0..=10 {
            let (u, v) = (0.05 + 0.09 * a as f64, 0.05 + 0.09 * b as f64);
            let n = s.normal(u, v).unwrap();
            let tu = ((s.eval(u + h, v) - s.eval(u - h, v)) / (2.0 * h)).normalize();
            let tv = ((s.eval(u, v + h) - s.eval(u, v - h)) / (2.0 * h)).normalize();
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.dot(&tu).abs() < 1e-5 && n.dot(&tv).abs() < 1e-5);
        }
    }
}

#[test]
fn cylinder_normal_is_radial() {
    let s = cylinder_section(0.2, PI / 6.0);
    let (r, ..) = s.derivatives(0.5, 0.5);
    let radial = Vector3::new(r.x, 0.0, r.z).normalize();
    let n = s.normal(0.5, 0.5).unwrap();
    // the tool side of this parameterization faces the axis
    let n = if n.dot(&radial) < 0.0 { -n } else { n };
    assert!((n - radial).norm() < 1e-6, "{n} vs {radial}");
}

#[test]
fn frames_are_orthonormal_on_fitted_surfaces() {
    let fit = airfoil_fit();
    for a in 0..=20 {
        for b in 0..=20 {
            let f = fit.surface.frame(a as f64 / 20.0, b as f64 / 20.0).unwrap();
            assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            assert!((f.t_u.norm() - 1.0).abs() < 1e-12 && (f.t_v.norm() - 1.0).abs() < 1e-12);
            assert!(f.normal.dot(&f.t_u).abs() < 1e-6);
            assert!(f.normal.dot(&f.t_v).abs() < 1e-6);
        }
    }
}

#[test]
fn fit_round_trips_an_existing_surface() {
    let original = wavy_surface();
    let (nu, nv) = (23, 19);
    let samples = SampleGrid::from_fn(nu, nv, |i, j| original.eval(i as f64 / (nu - 1) as f64, j as f64 / (nv - 1) as f64));
    let fit = fit_control_points(&samples, 3, 3, 7, 6, &Parameterization::Uniform).unwrap();
    assert!(fit.max_residual < 1e-10, "residual {}", fit.max_residual);
    let worst = original
        .control_points()
        .iter()
        .zip(fit.surface.control_points())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "control point error {worst}");
}

#[test]
fn planar_samples_give_constant_normals() {
    let rot = Rotation3::from_euler_angles(0.3, -0.2, 0.5);
    let samples = SampleGrid::from_fn(15, 12, |i, j| {
        let (x, y) = (0.02 * i as f64 + 0.001 * (j as f64).powi(2), 0.03 * j as f64);
        rot * Vector3::new(x, y, 0.1)
    });
    let fit = fit_control_points(&samples, 3, 2, 6, 5, &Parameterization::default()).unwrap();
    let n0 = fit.surface.normal(0.0, 0.0).unwrap();
    for a in 0..=10 {
        for b in 0..=10 {
            let n = fit.surface.normal(a as f64 / 10.0, b as f64 / 10.0).unwrap();
            assert!((n - n0).norm() < 1e-8);
        }
    }
}

#[test]
fn airfoil_fit_residual_below_half_millimeter() {
    let fit = airfoil_fit();
    assert!(fit.max_residual < 5e-4, "residual {}", fit.max_residual);
}

#[test]
fn sparse_samples_are_rejected() {
    let samples = SampleGrid::from_fn(10, 10, |i, j| Vector3::new(i as f64, j as f64, 0.0));
    let u: Vec<f64> = (0..10).map(|i| 0.03 * i as f64).collect();
    let v: Vec<f64> = (0..10).map(|j| j as f64 / 9.0).collect();
    let err = fit_control_points(&samples, 3, 3, 8, 6, &Parameterization::Explicit { u, v }).unwrap_err();
    assert!(matches!(err, SurfaceError::InsufficientCoverage(_)));
    let err = fit_control_points(&samples, 3, 3, 12, 6, &Parameterization::Uniform).unwrap_err();
    assert!(matches!(err, SurfaceError::InsufficientCoverage(_)));
}

fn plane_grid(rot: Rotation3<f64>, z: f64) -> BSplineSurface {
    let pts = (0..5)
        .flat_map(|i| (0..4).map(move |j| rot * Vector3::new(0.1 * i as f64, 0.1 * j as f64, z)))
        .collect();
    BSplineSurface::uniform(3, 3, 5, 4, pts).unwrap()
}

#[test]
fn plane_fit_identity_case() {
    let fit = best_fit_plane(&plane_grid(Rotation3::identity(), 0.3)).unwrap();
    assert!(fit.w[0].abs() < 1e-9 && fit.w[1].abs() < 1e-9);
    assert!((fit.d - 0.3).abs() < 1e-9);
    assert!(fit.objective < 1e-16);
    assert!((fit.r_input - nalgebra::Matrix3::identity()).norm() < 1e-8);
}

#[test]
fn plane_fit_recovers_known_rotation() {
    let angle = 20f64.to_radians();
    let surf = plane_grid(Rotation3::from_axis_angle(&Vector3::x_axis(), angle), 0.3);
    for fit in [
        best_fit_plane(&surf).unwrap(),
        // from a cold start the simplex has to do the work on its own
        best_fit_plane_from(&surf, [0.0, 0.0, 0.0]).unwrap(),
    ] {
        assert!((fit.w[0] - angle).abs() < 1e-4, "w = {:?}", fit.w);
        assert!(fit.w[1].abs() < 1e-4);
        assert!((fit.d - 0.3).abs() < 1e-6);
    }
}

#[test]
fn nelder_mead_matches_svd_plane_on_curved_nets() {
    let surfaces = [
        wavy_surface(),
        airfoil_fit().surface,
        cylinder_section(0.2, PI / 5.0),
        plane_grid(Rotation3::from_euler_angles(0.4, 0.1, 1.0), -0.2),
    ];
    for s in &surfaces {
        let svd = svd_plane(s.control_points()).unwrap();
        for fit in [best_fit_plane(s).unwrap(), best_fit_plane_from(s, [0.1, -0.1, 0.0]).unwrap()] {
            assert!(fit.objective <= svd.objective + 1e-8, "{} vs {}", fit.objective, svd.objective);
            assert!((fit.objective - svd.objective).abs() < 1e-8);
            let r = fit.r_input;
            assert!((r * r.transpose() - nalgebra::Matrix3::identity()).norm() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
            assert!((plane_objective(s.control_points(), fit.w[0], fit.w[1], fit.d) - fit.objective).abs() < 1e-15);
        }
    }
}

#[test]
fn collinear_net_has_no_plane() {
    let pts = (0..3)
        .flat_map(|i| (0..3).map(move |j| Vector3::new((i * 3 + j) as f64, 2.0 * (i * 3 + j) as f64, 0.0)))
        .collect();
    let s = BSplineSurface::uniform(1, 1, 3, 3, pts).unwrap();
    assert_eq!(best_fit_plane(&s).unwrap_err(), SurfaceError::CollinearPoints);
}

#[test]
fn project_point_on_surface() {
    let s = airfoil_fit().surface;
    let p = s.eval(0.3, 0.7);
    let pr = project_to_surface(&s, &p, (0.5, 0.5));
    assert!((pr.u - 0.3).abs() < 1e-6 && (pr.v - 0.7).abs() < 1e-6, "{pr:?}");
    assert!(!pr.warning);
}

#[test]
fn project_normal_offset_point() {
    for s in [airfoil_fit().surface, wavy_surface()] {
        let p = s.eval(0.3, 0.7) + s.normal(0.3, 0.7).unwrap() * 0.005;
        let pr = project_to_surface(&s, &p, (0.9, 0.1));
        assert!((pr.u - 0.3).abs() < 1e-4 && (pr.v - 0.7).abs() < 1e-4, "{pr:?}");
        assert!((pr.distance - 0.005).abs() < 1e-8);
    }
}

#[test]
fn project_beyond_edge_clamps_to_boundary() {
    let s = wavy_surface();
    let (edge, _, rv) = s.derivatives(0.4, 1.0);
    let p = edge + rv.normalize() * 0.05 + s.normal(0.4, 1.0).unwrap() * 0.01;
    let pr = project_to_surface(&s, &p, (0.5, 0.5));
    assert_eq!(pr.v, 1.0);

    // dense search along the edge curve
    let n = 200_000;
    let dist = |u: f64| (s.eval(u, 1.0) - p).norm();
    let (k, _) = (0..=n)
        .map(|k| (k, dist(k as f64 / n as f64)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let oracle = dist(k as f64 / n as f64);
    assert!((pr.distance - oracle).abs() < 1e-6, "{} vs {}", pr.distance, oracle);
    assert!((pr.u - k as f64 / n as f64).abs() < 1e-3);
}

#[test]
fn clamp_params_stays_in_band() {
    for &(u, v) in &[(-3.0, 0.2), (0.5, 7.0), (0.001, 0.999)] {
        let (a, b) = clamp_params(u, v, 0.005);
        assert!((0.005..=0.995).contains(&a) && (0.005..=0.995).contains(&b));
    }
}

#[test]
fn surface_document_round_trip_and_validation() {
    let s = wavy_surface().with_tool_side(ToolSide::Negative);
    let doc = SurfaceDoc::from_surface(&s);
    let text = doc.to_toml().unwrap();
    assert_eq!(SurfaceDoc::parse(&text).unwrap(), s);

    let mut bad = doc.clone();
    bad.knots_u[5] = 0.9;
    let err = bad.build().unwrap_err();
    assert!(matches!(err, SurfaceError::InvalidKnots { axis: 'u', index: 6, .. }), "{err}");

    let mut dup = doc.clone();
    for j in 0..dup.cols {
        dup.control_points[3 * dup.cols + j] = dup.control_points[2 * dup.cols + j];
    }
    assert_eq!(dup.build().unwrap_err(), SurfaceError::DuplicateRow(3, 2));

    let mut short = doc;
    short.control_points.pop();
    assert!(matches!(short.build().unwrap_err(), SurfaceError::GridMismatch { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eval_stays_in_control_hull(
        zs in prop::collection::vec(-1.0f64..1.0, 20),
        u in 0.0f64..=1.0,
        v in 0.0f64..=1.0,
    ) {
        let pts = (0..5).flat_map(|i| (0..4).map(move |j| (i, j)))
            .zip(&zs)
            .map(|((i, j), z)| Vector3::new(i as f64 + 0.3 * z, j as f64, *z))
            .collect();
        let s = BSplineSurface::uniform(3, 2, 5, 4, pts).unwrap();
        let (lo, hi) = s.control_bounds();
        let r = s.eval(u, v);
        for c in 0..3 {
            prop_assert!(r[c] >= lo[c] - 1e-12 && r[c] <= hi[c] + 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent(u in 0.02f64..0.98, v in 0.02f64..0.98) {
        let s = airfoil_fit().surface;
        let pr = project_to_surface(&s, &s.eval(u, v), (0.5, 0.5));
        prop_assert!((pr.u - u).abs() < 1e-6 && (pr.v - v).abs() < 1e-6, "{:?}", pr);
    }
}
