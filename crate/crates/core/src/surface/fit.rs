use super::{clamped_uniform_knots, BSplineSurface, SurfaceError};
use nalgebra::{DMatrix, Vector3};

/// Gridded sample points, row-major with rows along `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<Vector3<f64>>,
}

impl SampleGrid {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Vector3<f64>) -> Self {
        let points = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Self { rows, cols, points }
    }

    pub fn at(&self, i: usize, j: usize) -> Vector3<f64> {
        self.points[i * self.cols + j]
    }
}

/// How sample parameters are assigned before the least-squares solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Parameterization {
    /// Averaged normalized chord length along each grid direction.
    #[default]
    ChordLength,
    Uniform,
    Explicit { u: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SurfaceFit {
    pub surface: BSplineSurface,
    /// Largest distance between a sample and the fitted surface at its parameters.
    pub max_residual: f64,
    pub params_u: Vec<f64>,
    pub params_v: Vec<f64>,
}

fn uniform_params(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Average of per-line normalized cumulative chord lengths.
fn chord_params(n: usize, lines: usize, point: impl Fn(usize, usize) -> Vector3<f64>) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    let mut used = 0;
    for l in 0..lines {
        let mut cum = vec![0.0; n];
        for k in 1..n {
            cum[k] = cum[k - 1] + (point(l, k) - point(l, k - 1)).norm();
        }
        let total = cum[n - 1];
        if total > 0.0 {
            for k in 0..n {
                acc[k] += cum[k] / total;
            }
            used += 1;
        }
    }
    if used == 0 {
        return uniform_params(n);
    }
    let mut out: Vec<f64> = acc.iter().map(|a| a / used as f64).collect();
    out[0] = 0.0;
    out[n - 1] = 1.0;
    out
}

fn collocation(params: &[f64], basis: impl Fn(f64) -> (usize, Vec<f64>), n_ctrl: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(params.len(), n_ctrl);
    for (k, &t) in params.iter().enumerate() {
        let (first, vals) = basis(t);
        for (o, val) in vals.into_iter().enumerate() {
            a[(k, first + o)] = val;
        }
    }
    a
}

fn pseudo_inverse(a: DMatrix<f64>, axis: char) -> Result<DMatrix<f64>, SurfaceError> {
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    if max <= 0.0 || min / max < 1e-12 {
        return Err(SurfaceError::InsufficientCoverage(format!(
            "collocation matrix along {axis} is rank deficient (condition {:.3e})",
            if min > 0.0 { max / min } else { f64::INFINITY }
        )));
    }
    svd.pseudo_inverse(0.0)
        .map_err(|e| SurfaceError::InsufficientCoverage(e.to_string()))
}

/// Global least-squares fit of a clamped uniform control grid to gridded samples.
pub fn fit_control_points(
    samples: &SampleGrid,
    degree_u: usize,
    degree_v: usize,
    ctrl_rows: usize,
    ctrl_cols: usize,
    parameterization: &Parameterization,
) -> Result<SurfaceFit, SurfaceError> {
    if samples.rows < ctrl_rows || samples.cols < ctrl_cols {
        return Err(SurfaceError::InsufficientCoverage(format!(
            "{}x{} samples for a {}x{} control grid",
            samples.rows, samples.cols, ctrl_rows, ctrl_cols
        )));
    }
    if samples.points.len() != samples.rows * samples.cols {
        return Err(SurfaceError::InsufficientCoverage("sample count does not match grid".into()));
    }
    let (pu, pv) = match parameterization {
        Parameterization::Uniform => (uniform_params(samples.rows), uniform_params(samples.cols)),
        Parameterization::ChordLength => (
            chord_params(samples.rows, samples.cols, |j, i| samples.at(i, j)),
            chord_params(samples.cols, samples.rows, |i, j| samples.at(i, j)),
        ),
        Parameterization::Explicit { u, v } => {
            if u.len() != samples.rows || v.len() != samples.cols {
                return Err(SurfaceError::InsufficientCoverage("explicit parameter count mismatch".into()));
            }
            (u.clone(), v.clone())
        }
    };

    // Placeholder net carries the knots so the basis routine can be reused.
    if ctrl_rows <= degree_u || ctrl_cols <= degree_v {
        return Err(SurfaceError::InsufficientCoverage("control grid smaller than degree + 1".into()));
    }
    let scaffold_pts = (0..ctrl_rows)
        .flat_map(|i| (0..ctrl_cols).map(move |j| Vector3::new(i as f64, j as f64, 0.0)))
        .collect();
    let scaffold = BSplineSurface::new(
        degree_u,
        degree_v,
        clamped_uniform_knots(ctrl_rows, degree_u),
        clamped_uniform_knots(ctrl_cols, degree_v),
        ctrl_rows,
        ctrl_cols,
        scaffold_pts,
    )?;
    let au = collocation(&pu, |t| { let (f, n, _) = scaffold.basis('u', t); (f, n) }, ctrl_rows);
    let av = collocation(&pv, |t| { let (f, n, _) = scaffold.basis('v', t); (f, n) }, ctrl_cols);
    let au_pinv = pseudo_inverse(au, 'u')?;
    let av_pinv = pseudo_inverse(av, 'v')?;

    let mut ctrl = vec![Vector3::zeros(); ctrl_rows * ctrl_cols];
    for c in 0..3 {
        let q = DMatrix::from_fn(samples.rows, samples.cols, |i, j| samples.at(i, j)[c]);
        let p = &au_pinv * q * av_pinv.transpose();
        for i in 0..ctrl_rows {
            for j in 0..ctrl_cols {
                ctrl[i * ctrl_cols + j][c] = p[(i, j)];
            }
        }
    }
    let surface = BSplineSurface::new(
        degree_u,
        degree_v,
        clamped_uniform_knots(ctrl_rows, degree_u),
        clamped_uniform_knots(ctrl_cols, degree_v),
        ctrl_rows,
        ctrl_cols,
        ctrl,
    )?;
    let mut max_residual: f64 = 0.0;
    for i in 0..samples.rows {
        for j in 0..samples.cols {
            max_residual = max_residual.max((surface.eval(pu[i], pv[j]) - samples.at(i, j)).norm());
        }
    }
    Ok(SurfaceFit {
        surface,
        max_residual,
        params_u: pu,
        params_v: pv,
    })
}
