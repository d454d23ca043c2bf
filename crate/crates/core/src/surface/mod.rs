//! Tensor-product B-spline surfaces and the geometric queries the controller
//! needs: points, normals, hybrid-control frames, the input-mapping plane and
//! closest-point projection.

mod bspline;
mod fit;
pub mod nelder_mead;
mod plane;
mod project;
mod io;

pub use bspline::{clamp_params, clamped_uniform_knots, BSplineSurface, SurfaceFrame, ToolSide};
pub use fit::{fit_control_points, Parameterization, SampleGrid, SurfaceFit};
pub use io::{SurfaceDoc, SURFACE_SCHEMA_VERSION};
pub use plane::{best_fit_plane, best_fit_plane_from, plane_objective, svd_plane, PlaneFit, SvdPlane};
pub use project::{project_local, project_to_surface, Projection, PROJECTION_GRID};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("degree must be at least 1 (degree_{axis} = {degree})")]
    InvalidDegree { axis: char, degree: usize },
    #[error("knot vector {axis}: {reason} at index {index}")]
    InvalidKnots {
        axis: char,
        index: usize,
        reason: &'static str,
    },
    #[error("control grid {rows}x{cols} does not match knots ({knots_u} u-knots, {knots_v} v-knots)")]
    GridMismatch {
        rows: usize,
        cols: usize,
        knots_u: usize,
        knots_v: usize,
    },
    #[error("control net row {0} duplicates row {1}")]
    DuplicateRow(usize, usize),
    #[error("control net column {0} duplicates column {1}")]
    DuplicateColumn(usize, usize),
    #[error("degenerate parameterization at ({u}, {v})")]
    DegenerateParameterization { u: f64, v: f64 },
    #[error("insufficient sample coverage: {0}")]
    InsufficientCoverage(String),
    #[error("need at least 3 non-collinear control points for a plane")]
    CollinearPoints,
    #[error("plane fit stagnated after {iterations} iterations at w = ({wx}, {wy}), d = {d}, objective {objective}")]
    PlaneFitStagnated {
        iterations: usize,
        wx: f64,
        wy: f64,
        d: f64,
        objective: f64,
    },
    #[error("surface document: {0}")]
    Document(String),
}
