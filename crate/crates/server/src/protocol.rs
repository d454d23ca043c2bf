//! Messages exchanged with the operator UI. Every websocket text frame holds
//! exactly one JSON object tagged by `type`.

use corrective_core::correction::{InputMapping, Overrides, SaturationReport, UserInput};
use corrective_core::dmp::Direction;
use corrective_core::session::{SegmentInfo, TraceRecord};
use serde::{Deserialize, Serialize};

pub const WIRE_SCHEMA_VERSION: u32 = 1;

/// Decimated snapshot of one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub t: f64,
    pub tick: u64,
    pub segment: String,
    pub segment_index: usize,
    /// Forward phase.
    pub s: f64,
    pub progress: f64,
    /// `None` while the phase is held.
    pub tau: Option<f64>,
    pub direction: Direction,
    pub x_n: Vec<f64>,
    pub dy: Vec<f64>,
    pub x_cmd: Vec<f64>,
    /// Correction limit per channel in effect.
    pub scaling: Vec<f64>,
    pub saturation: SaturationReport,
    pub u: [f64; 3],
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    /// Measured contact force (N).
    pub force: f64,
    pub contact: bool,
    /// Columns are the device-frame directions of the three correction
    /// channels, so the UI can label its axes.
    pub frame: [[f64; 3]; 3],
}

impl StateMessage {
    pub fn from_record(r: &TraceRecord, mapping: &InputMapping) -> Self {
        let frame = match mapping {
            InputMapping::Identity => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            InputMapping::Frame(m) => [0, 1, 2].map(|c| [m[(0, c)], m[(1, c)], m[(2, c)]]),
        };
        Self {
            t: r.t,
            tick: r.tick,
            segment: r.segment.clone(),
            segment_index: r.segment_index,
            s: r.s,
            progress: r.progress,
            tau: r.tau,
            direction: r.direction,
            x_n: r.x_n.clone(),
            dy: r.dy.clone(),
            x_cmd: r.x_cmd.clone(),
            scaling: r.scaling.clone(),
            saturation: r.saturation,
            u: r.u,
            position: r.plant.position,
            orientation: r.plant.orientation,
            force: r.plant.force,
            contact: r.plant.contact,
            frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First frame on every connection.
    Hello {
        schema_version: u32,
        scenario: String,
        dt: f64,
        /// State frames per second of simulated time.
        state_rate: f64,
        device_range: f64,
        segments: Vec<SegmentInfo>,
    },
    State(Box<StateMessage>),
    /// Reply to a history request, oldest first.
    History { states: Vec<StateMessage> },
    /// A client frame was rejected; the session carries on.
    Error { message: String },
    Ended {
        completed: bool,
        fault: Option<String>,
        ticks: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Input {
        schema_version: u32,
        /// Client clock (s); later samples replace earlier ones.
        t_client: f64,
        u: [f64; 3],
        #[serde(default)]
        overrides: Overrides,
    },
    HistoryRequest {
        schema_version: u32,
        /// Only states from this tick on.
        #[serde(default)]
        since_tick: Option<u64>,
    },
}

impl ClientMessage {
    pub fn schema_version(&self) -> u32 {
        match self {
            ClientMessage::Input { schema_version, .. } | ClientMessage::HistoryRequest { schema_version, .. } => {
                *schema_version
            }
        }
    }

    /// Parses and version-checks a text frame.
    pub fn parse(text: &str) -> Result<Self, String> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
        if msg.schema_version() != WIRE_SCHEMA_VERSION {
            return Err(format!(
                "schema version {} not supported (server speaks {WIRE_SCHEMA_VERSION})",
                msg.schema_version()
            ));
        }
        if let ClientMessage::Input { t_client, u, .. } = &msg {
            if !t_client.is_finite() || u.iter().any(|x| !x.is_finite()) {
                return Err("input values must be finite".into());
            }
        }
        Ok(msg)
    }
}

/// Device sample for the mailbox; deflections are clamped to [-1, 1].
pub fn to_user_input(t_client: f64, u: [f64; 3], overrides: Overrides) -> UserInput {
    UserInput {
        overrides,
        ..UserInput::new(u, t_client)
    }
}
