use super::nelder_mead::{self, Options};
use super::{BSplineSurface, SurfaceError};
use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};

/// Plane through `d * R e_z` with normal `R e_z`, `R = exp([w_x, w_y, 0])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub w: [f64; 2],
    pub d: f64,
    /// Unit plane normal, oriented toward the tool side of the surface.
    pub normal: Vector3<f64>,
    /// Columns are the surface-frame axes in world coordinates: in-plane `u`
    /// direction, in-plane lateral direction, plane normal.
    pub r_input: Matrix3<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl PlaneFit {
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::new(Vector3::new(self.w[0], self.w[1], 0.0))
    }
}

/// Closed-form total-least-squares plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdPlane {
    pub normal: Vector3<f64>,
    pub d: f64,
    pub objective: f64,
}

/// Sum of squared distances from the points to the plane `(w_x, w_y, d)`.
pub fn plane_objective(points: &[Vector3<f64>], wx: f64, wy: f64, d: f64) -> f64 {
    let r = Rotation3::new(Vector3::new(wx, wy, 0.0));
    let n = r * Vector3::z();
    let origin = r * Vector3::new(0.0, 0.0, d);
    points.iter().map(|p| (origin - p).dot(&n).powi(2)).sum()
}

/// SVD plane fit. The normal is returned with a non-negative z component.
pub fn svd_plane(points: &[Vector3<f64>]) -> Result<SvdPlane, SurfaceError> {
    if points.len() < 3 {
        return Err(SurfaceError::CollinearPoints);
    }
    let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let m = DMatrix::from_fn(points.len(), 3, |i, c| points[i][c] - centroid[c]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if sv[idx[1]] <= 1e-12 * sv[idx[0]].max(f64::MIN_POSITIVE) {
        return Err(SurfaceError::CollinearPoints);
    }
    let k = idx[2];
    let mut normal = Vector3::new(v_t[(k, 0)], v_t[(k, 1)], v_t[(k, 2)]).normalize();
    if normal.z < 0.0 {
        normal = -normal;
    }
    let d = normal.dot(&centroid);
    let objective = points.iter().map(|p| (p.dot(&normal) - d).powi(2)).sum();
    Ok(SvdPlane { normal, d, objective })
}

/// Exponential coordinates with zero z-component that rotate `e_z` onto `n`.
fn normal_to_w(n: &Vector3<f64>) -> [f64; 2] {
    let axis = Vector3::z().cross(n);
    let s = axis.norm();
    if s < 1e-15 {
        return if n.z > 0.0 { [0.0, 0.0] } else { [std::f64::consts::PI, 0.0] };
    }
    let angle = s.atan2(n.z);
    [axis.x / s * angle, axis.y / s * angle]
}

/// Fits the plane, starting Nelder-Mead from the SVD solution.
pub fn best_fit_plane(surf: &BSplineSurface) -> Result<PlaneFit, SurfaceError> {
    let svd = svd_plane(surf.control_points())?;
    let w = normal_to_w(&svd.normal);
    best_fit_plane_from(surf, [w[0], w[1], svd.d])
}

/// Fits the plane from an explicit `(w_x, w_y, d)` starting point.
pub fn best_fit_plane_from(surf: &BSplineSurface, start: [f64; 3]) -> Result<PlaneFit, SurfaceError> {
    let points = surf.control_points();
    // also validates that the net spans a plane
    let svd = svd_plane(points)?;
    let (lo, hi) = surf.control_bounds();
    let scale = (hi - lo).norm().max(1e-3);
    let f = |x: &[f64]| plane_objective(points, x[0], x[1], x[2]);
    let opts = Options {
        max_iterations: 5000,
        // curved nets leave a residual; allow for its rounding noise
        f_tol: 1e-18 * scale * scale + 1e-12 * svd.objective,
        x_tol: 1e-11,
    };
    let out = nelder_mead::minimize(f, &start, &[0.05, 0.05, 0.05 * scale], opts);
    if !out.converged {
        return Err(SurfaceError::PlaneFitStagnated {
            iterations: out.iterations,
            wx: out.x[0],
            wy: out.x[1],
            d: out.x[2],
            objective: out.value,
        });
    }
    let (wx, wy, d) = (out.x[0], out.x[1], out.x[2]);
    let rot = Rotation3::new(Vector3::new(wx, wy, 0.0));
    let mut normal = rot * Vector3::z();
    let tool = surf.normal(0.5, 0.5).unwrap_or(normal);
    if normal.dot(&tool) < 0.0 {
        normal = -normal;
    }

    // u axis of the control grid projected into the plane
    let (rows, cols) = surf.grid_size();
    let mut axis: Vector3<f64> = (0..cols)
        .map(|j| surf.control_point(rows - 1, j) - surf.control_point(0, j))
        .sum();
    axis -= normal * axis.dot(&normal);
    if axis.norm() < 1e-12 {
        let v_axis: Vector3<f64> = (0..rows)
            .map(|i| surf.control_point(i, cols - 1) - surf.control_point(i, 0))
            .sum();
        axis = v_axis.cross(&normal);
    }
    let x = axis.normalize();
    let y = normal.cross(&x);
    let r_input = Matrix3::from_columns(&[x, y, normal]);
    Ok(PlaneFit {
        w: [wx, wy],
        d,
        normal,
        r_input,
        objective: out.value,
        iterations: out.iterations,
    })
}
