use super::{BSplineSurface, SurfaceError, ToolSide};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SURFACE_SCHEMA_VERSION: u32 = 1;

/// On-disk form of a surface (TOML). Control points are row-major, meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDoc {
    pub schema_version: u32,
    pub degree_u: usize,
    pub degree_v: usize,
    pub knots_u: Vec<f64>,
    pub knots_v: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub tool_side: ToolSide,
    pub control_points: Vec<[f64; 3]>,
}

impl SurfaceDoc {
    pub fn from_surface(s: &BSplineSurface) -> Self {
        let (degree_u, degree_v) = s.degrees();
        let (rows, cols) = s.grid_size();
        Self {
            schema_version: SURFACE_SCHEMA_VERSION,
            degree_u,
            degree_v,
            knots_u: s.knots_u().to_vec(),
            knots_v: s.knots_v().to_vec(),
            rows,
            cols,
            tool_side: s.tool_side(),
            control_points: s.control_points().iter().map(|p| [p.x, p.y, p.z]).collect(),
        }
    }

    pub fn build(&self) -> Result<BSplineSurface, SurfaceError> {
        if self.schema_version != SURFACE_SCHEMA_VERSION {
            return Err(SurfaceError::Document(format!(
                "unsupported surface schema version {} (expected {})",
                self.schema_version, SURFACE_SCHEMA_VERSION
            )));
        }
        if let Some(k) = self.control_points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(SurfaceError::Document(format!(
                "control point ({}, {}) is not finite",
                k / self.cols.max(1),
                k % self.cols.max(1)
            )));
        }
        let pts = self.control_points.iter().map(|p| Vector3::from(*p)).collect();
        Ok(BSplineSurface::new(
            self.degree_u,
            self.degree_v,
            self.knots_u.clone(),
            self.knots_v.clone(),
            self.rows,
            self.cols,
            pts,
        )?
        .with_tool_side(self.tool_side))
    }

    pub fn to_toml(&self) -> Result<String, SurfaceError> {
        toml::to_string(self).map_err(|e| SurfaceError::Document(e.to_string()))
    }

    pub fn parse(text: &str) -> Result<BSplineSurface, SurfaceError> {
        let doc: SurfaceDoc = toml::from_str(text).map_err(|e| SurfaceError::Document(e.to_string()))?;
        doc.build()
    }

    pub fn load(path: &Path) -> Result<BSplineSurface, SurfaceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SurfaceError::Document(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), SurfaceError> {
        std::fs::write(path, self.to_toml()?).map_err(|e| SurfaceError::Document(format!("{}: {e}", path.display())))
    }
}
