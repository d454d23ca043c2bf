use super::SurfaceError;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Which side of the surface the tool works from. Normals point toward it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ToolSide {
    /// Along `dr/du x dr/dv`.
    #[default]
    Positive,
    Negative,
}

impl ToolSide {
    fn sign(self) -> f64 {
        match self {
            ToolSide::Positive => 1.0,
            ToolSide::Negative => -1.0,
        }
    }
}

/// Hybrid-control frame at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub origin: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub t_u: Vector3<f64>,
    pub t_v: Vector3<f64>,
}

/// Clamped uniform knot vector on [0, 1] for `n` control points.
pub fn clamped_uniform_knots(n: usize, degree: usize) -> Vec<f64> {
    let spans = n - degree;
    let mut k = vec![0.0; degree + 1];
    k.extend((1..spans).map(|i| i as f64 / spans as f64));
    k.extend(std::iter::repeat_n(1.0, degree + 1));
    k
}

/// Clamps both parameters into `[margin, 1 - margin]`.
pub fn clamp_params(u: f64, v: f64, margin: f64) -> (f64, f64) {
    (u.clamp(margin, 1.0 - margin), v.clamp(margin, 1.0 - margin))
}

/// Index of the knot span holding `t` (degree `p`, `n + 1` control points).
fn find_span(n: usize, p: usize, t: f64, knots: &[f64]) -> usize {
    if t >= knots[n + 1] {
        return n;
    }
    if t <= knots[p] {
        return p;
    }
    let (mut low, mut high) = (p, n + 1);
    let mut mid = (low + high) / 2;
    while t < knots[mid] || t >= knots[mid + 1] {
        if t < knots[mid] {
            high = mid;
        } else {
            low = mid;
        }
        mid = (low + high) / 2;
    }
    mid
}

/// Non-zero basis values and first derivatives on `span`: `(N, N')`, each of length `p + 1`.
fn basis_with_derivative(span: usize, t: f64, p: usize, knots: &[f64]) -> (Vec<f64>, Vec<f64>) {
    // Triangular table of basis values for degrees 0..=p.
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle holds knot differences
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let values: Vec<f64> = (0..=p).map(|j| ndu[j][p]).collect();
    let derivs: Vec<f64> = (0..=p)
        .map(|r| {
            let mut d = 0.0;
            if r >= 1 {
                d += ndu[r - 1][p - 1] / ndu[p][r - 1];
            }
            if r < p {
                d -= ndu[r][p - 1] / ndu[p][r];
            }
            d * p as f64
        })
        .collect();
    (values, derivs)
}

fn validate_knots(axis: char, knots: &[f64], degree: usize) -> Result<(), SurfaceError> {
    let bad = |index, reason| SurfaceError::InvalidKnots { axis, index, reason };
    if let Some(i) = knots.iter().position(|k| !k.is_finite()) {
        return Err(bad(i, "non-finite knot"));
    }
    if let Some(i) = knots.windows(2).position(|w| w[1] < w[0]) {
        return Err(bad(i + 1, "knots decrease"));
    }
    if knots.len() < 2 * (degree + 1) {
        return Err(bad(knots.len(), "too few knots for the degree"));
    }
    if knots[0] != 0.0 {
        return Err(bad(0, "domain must start at 0"));
    }
    if *knots.last().unwrap() != 1.0 {
        return Err(bad(knots.len() - 1, "domain must end at 1"));
    }
    if let Some(i) = (1..=degree).find(|&i| knots[i] != knots[0]) {
        return Err(bad(i, "start is not clamped"));
    }
    let last = knots.len() - 1;
    if let Some(i) = (last - degree..last).find(|&i| knots[i] != knots[last]) {
        return Err(bad(i, "end is not clamped"));
    }
    // interior multiplicity above the degree makes the surface discontinuous
    let mut run = 1;
    for i in degree + 1..last - degree {
        run = if knots[i] == knots[i - 1] { run + 1 } else { 1 };
        if run > degree {
            return Err(bad(i, "interior knot multiplicity exceeds degree"));
        }
    }
    Ok(())
}

/// Tensor-product B-spline surface on the unit parameter square.
///
/// Control points are stored row-major: `points[i * cols + j]` where `i`
/// follows `u` and `j` follows `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineSurface {
    degree_u: usize,
    degree_v: usize,
    knots_u: Vec<f64>,
    knots_v: Vec<f64>,
    rows: usize,
    cols: usize,
    points: Vec<Vector3<f64>>,
    tool_side: ToolSide,
}

impl BSplineSurface {
    pub fn new(
        degree_u: usize,
        degree_v: usize,
        knots_u: Vec<f64>,
        knots_v: Vec<f64>,
        rows: usize,
        cols: usize,
        points: Vec<Vector3<f64>>,
    ) -> Result<Self, SurfaceError> {
        if degree_u < 1 {
            return Err(SurfaceError::InvalidDegree { axis: 'u', degree: degree_u });
        }
        if degree_v < 1 {
            return Err(SurfaceError::InvalidDegree { axis: 'v', degree: degree_v });
        }
        validate_knots('u', &knots_u, degree_u)?;
        validate_knots('v', &knots_v, degree_v)?;
        if knots_u.len() != rows + degree_u + 1 || knots_v.len() != cols + degree_v + 1 || points.len() != rows * cols {
            return Err(SurfaceError::GridMismatch {
                rows,
                cols,
                knots_u: knots_u.len(),
                knots_v: knots_v.len(),
            });
        }
        let at = |i: usize, j: usize| points[i * cols + j];
        for i in 1..rows {
            if (0..cols).all(|j| at(i, j) == at(i - 1, j)) {
                return Err(SurfaceError::DuplicateRow(i, i - 1));
            }
        }
        for j in 1..cols {
            if (0..rows).all(|i| at(i, j) == at(i, j - 1)) {
                return Err(SurfaceError::DuplicateColumn(j, j - 1));
            }
        }
        Ok(Self {
            degree_u,
            degree_v,
            knots_u,
            knots_v,
            rows,
            cols,
            points,
            tool_side: ToolSide::Positive,
        })
    }

    /// Clamped uniform knots in both directions.
    pub fn uniform(
        degree_u: usize,
        degree_v: usize,
        rows: usize,
        cols: usize,
        points: Vec<Vector3<f64>>,
    ) -> Result<Self, SurfaceError> {
        if rows <= degree_u || cols <= degree_v {
            return Err(SurfaceError::GridMismatch {
                rows,
                cols,
                knots_u: 0,
                knots_v: 0,
            });
        }
        Self::new(
            degree_u,
            degree_v,
            clamped_uniform_knots(rows, degree_u),
            clamped_uniform_knots(cols, degree_v),
            rows,
            cols,
            points,
        )
    }

    pub fn with_tool_side(mut self, side: ToolSide) -> Self {
        self.tool_side = side;
        self
    }

    pub fn tool_side(&self) -> ToolSide {
        self.tool_side
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.degree_u, self.degree_v)
    }

    pub fn knots_u(&self) -> &[f64] {
        &self.knots_u
    }

    pub fn knots_v(&self) -> &[f64] {
        &self.knots_v
    }

    pub fn grid_size(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn control_points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn control_point(&self, i: usize, j: usize) -> Vector3<f64> {
        self.points[i * self.cols + j]
    }

    /// Basis values for `u` (`axis = 'u'`) or `v`: `(first index, N, N')`.
    pub fn basis(&self, axis: char, t: f64) -> (usize, Vec<f64>, Vec<f64>) {
        let (p, knots, n) = match axis {
            'u' => (self.degree_u, &self.knots_u, self.rows),
            _ => (self.degree_v, &self.knots_v, self.cols),
        };
        let t = t.clamp(0.0, 1.0);
        let span = find_span(n - 1, p, t, knots);
        let (vals, ders) = basis_with_derivative(span, t, p, knots);
        (span - p, vals, ders)
    }

    /// Point and both parameter tangents at `(u, v)` (clamped into the domain).
    pub fn derivatives(&self, u: f64, v: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (iu, nu, du) = self.basis('u', u);
        let (jv, nv, dv) = self.basis('v', v);
        let mut r = Vector3::zeros();
        let mut ru = Vector3::zeros();
        let mut rv = Vector3::zeros();
        for a in 0..=self.degree_u {
            let mut row = Vector3::zeros();
            let mut row_dv = Vector3::zeros();
            for b in 0..=self.degree_v {
                let p = self.points[(iu + a) * self.cols + jv + b];
                row += p * nv[b];
                row_dv += p * dv[b];
            }
            r += row * nu[a];
            ru += row * du[a];
            rv += row_dv * nu[a];
        }
        (r, ru, rv)
    }

    pub fn eval(&self, u: f64, v: f64) -> Vector3<f64> {
        let (iu, nu, _) = self.basis('u', u);
        let (jv, nv, _) = self.basis('v', v);
        let mut r = Vector3::zeros();
        for a in 0..=self.degree_u {
            for b in 0..=self.degree_v {
                r += self.points[(iu + a) * self.cols + jv + b] * (nu[a] * nv[b]);
            }
        }
        r
    }

    /// Unit normal `dr/du x dr/dv`, flipped toward the configured tool side.
    pub fn normal(&self, u: f64, v: f64) -> Result<Vector3<f64>, SurfaceError> {
        let (_, ru, rv) = self.derivatives(u, v);
        let n = ru.cross(&rv);
        let len = n.norm();
        if len < 1e-10 {
            return Err(SurfaceError::DegenerateParameterization { u, v });
        }
        Ok(n * (self.tool_side.sign() / len))
    }

    pub fn frame(&self, u: f64, v: f64) -> Result<SurfaceFrame, SurfaceError> {
        let (r, ru, rv) = self.derivatives(u, v);
        let n = ru.cross(&rv);
        let len = n.norm();
        if len < 1e-10 {
            return Err(SurfaceError::DegenerateParameterization { u, v });
        }
        Ok(SurfaceFrame {
            origin: r,
            normal: n * (self.tool_side.sign() / len),
            t_u: ru.normalize(),
            t_v: rv.normalize(),
        })
    }

    /// Axis-aligned bounding box of the control net.
    pub fn control_bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Approximate metric scale of one parameter unit along `u` and `v` at a point.
    pub fn param_scale(&self, u: f64, v: f64) -> (f64, f64) {
        let (_, ru, rv) = self.derivatives(u, v);
        (ru.norm(), rv.norm())
    }
}
