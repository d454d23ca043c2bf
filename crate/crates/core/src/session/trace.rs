use crate::correction::SaturationReport;
use crate::dmp::Direction;
use crate::plan::Mode;
use crate::plant::TaskSpec;
use crate::surface::{BSplineSurface, SurfaceDoc, SurfaceError};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("trace schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("trace has no header")]
    MissingHeader,
    #[error("trace surface '{id}': {source}")]
    Surface { id: String, source: SurfaceError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSurface {
    pub id: String,
    pub surface: SurfaceDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub id: String,
    pub mode: Mode,
    pub duration: f64,
    pub scaling: Vec<f64>,
}

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub scenario: String,
    /// SHA-256 of the scenario document the session ran.
    pub config_hash: String,
    pub dt: f64,
    /// Device displacement at full deflection (m); absent for traces without device data.
    pub device_range: Option<f64>,
    pub max_time: f64,
    pub segments: Vec<SegmentInfo>,
    /// Success criteria after error injection.
    pub task: Option<TaskSpec>,
    pub surfaces: Vec<TraceSurface>,
}

impl TraceHeader {
    pub fn build_surfaces(&self) -> Result<Vec<(String, BSplineSurface)>, TraceError> {
        self.surfaces
            .iter()
            .map(|s| {
                s.surface.build().map(|b| (s.id.clone(), b)).map_err(|source| TraceError::Surface {
                    id: s.id.clone(),
                    source,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantSnapshot {
    pub position: [f64; 3],
    /// `[w, x, y, z]`
    pub orientation: [f64; 4],
    pub velocity: [f64; 3],
    pub force: f64,
    pub contact: bool,
    pub uv: Option<[f64; 2]>,
}

/// One control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub tick: u64,
    pub segment: String,
    pub segment_index: usize,
    /// Phase of the forward variant (backward phases are mirrored).
    pub s: f64,
    /// Fraction of the segment's nominal duration covered, in [0, 1].
    pub progress: f64,
    /// Signed time constant; `None` while the phase is held.
    pub tau: Option<f64>,
    pub direction: Direction,
    pub hold: bool,
    pub x_n: Vec<f64>,
    /// Correction actually applied after validation.
    pub dy: Vec<f64>,
    pub x_cmd: Vec<f64>,
    /// Device deflection as received.
    pub u: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling_override: Option<f64>,
    /// Per-channel correction limit in effect.
    pub scaling: Vec<f64>,
    pub saturation: SaturationReport,
    pub plant: PlantSnapshot,
}

impl TraceRecord {
    /// Whether `x_cmd = x_n + dy` holds exactly on every channel.
    pub fn arbitration_exact(&self) -> bool {
        self.x_n.len() == self.dy.len()
            && self.x_n.len() == self.x_cmd.len()
            && self
                .x_n
                .iter()
                .zip(&self.dy)
                .zip(&self.x_cmd)
                .all(|((x, d), c)| x + d == *c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFooter {
    /// Every segment finished.
    pub completed: bool,
    pub fault: Option<String>,
    pub ticks: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Header(TraceHeader),
    Record(TraceRecord),
    Footer(TraceFooter),
}

/// A session recording: header, one record per tick, and a footer once the
/// session ended. A missing footer marks a truncated recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    pub footer: Option<TraceFooter>,
}

impl SessionTrace {
    pub fn is_complete(&self) -> bool {
        self.footer.as_ref().is_some_and(|f| f.completed)
    }

    pub fn is_truncated(&self) -> bool {
        self.footer.is_none()
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> Result<(), TraceError> {
        write_line(w, &TraceLine::Header(self.header.clone()))?;
        for r in &self.records {
            write_line(w, &TraceLine::Record(r.clone()))?;
        }
        if let Some(f) = &self.footer {
            write_line(w, &TraceLine::Footer(f.clone()))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Reads a trace. An unparseable final line is treated as a write cut
    /// short and dropped; the trace then has no footer.
    pub fn read_jsonl(r: impl BufRead) -> Result<Self, TraceError> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        let last = lines.iter().rposition(|l| !l.trim().is_empty());
        let mut header = None;
        let mut records = Vec::new();
        let mut footer = None;
        for (k, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| TraceError::Malformed { line: k + 1, reason };
            if header.is_none() {
                let version = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("schema_version").and_then(|s| s.as_u64()));
                match version {
                    Some(v) if v != TRACE_SCHEMA_VERSION as u64 => {
                        return Err(TraceError::VersionMismatch {
                            found: v as u32,
                            expected: TRACE_SCHEMA_VERSION,
                        })
                    }
                    Some(_) => {}
                    None => return Err(TraceError::MissingHeader),
                }
            }
            let parsed = match serde_json::from_str::<TraceLine>(line) {
                Ok(p) => p,
                Err(_) if Some(k) == last && header.is_some() => break,
                Err(e) => return Err(malformed(e.to_string())),
            };
            match (parsed, &header, &footer) {
                (TraceLine::Header(h), None, _) => header = Some(h),
                (TraceLine::Record(r), Some(_), None) => records.push(r),
                (TraceLine::Footer(f), Some(_), None) => footer = Some(f),
                (TraceLine::Header(_), Some(_), _) => return Err(malformed("second header".into())),
                (_, Some(_), Some(_)) => return Err(malformed("content after footer".into())),
                (_, None, _) => return Err(TraceError::MissingHeader),
            }
        }
        Ok(Self {
            header: header.ok_or(TraceError::MissingHeader)?,
            records,
            footer,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TraceError> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TraceError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn write_line(w: &mut impl Write, line: &TraceLine) -> Result<(), TraceError> {
    serde_json::to_writer(&mut *w, line).map_err(|e| TraceError::Io(e.into()))?;
    w.write_all(b"\n")?;
    Ok(())
}
