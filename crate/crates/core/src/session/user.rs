use super::trace::SessionTrace;
use crate::correction::{InputMapping, Overrides, UserInput};
use crate::dmp::Direction;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::{Arc, Mutex};

/// What an input source may look at before a tick.
#[derive(Debug, Clone, Copy)]
pub struct TickContext<'a> {
    /// Time of the upcoming record.
    pub t: f64,
    pub tick: u64,
    pub segment: &'a str,
    pub segment_index: usize,
    pub progress: f64,
    pub direction: Direction,
    /// Device-to-channel mapping of the current segment.
    pub mapping: InputMapping,
}

pub trait InputSource {
    fn next_input(&mut self, ctx: &TickContext) -> UserInput;
}

/// Operator who never touches the device.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroInput;

impl InputSource for ZeroInput {
    fn next_input(&mut self, ctx: &TickContext) -> UserInput {
        UserInput::zero(ctx.t)
    }
}

/// Conditions under which a script step starts; all given fields must hold.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Trigger {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub after: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub progress_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub progress_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

impl Trigger {
    pub fn matches(&self, ctx: &TickContext) -> bool {
        self.after.is_none_or(|t| ctx.t >= t)
            && self.segment.as_deref().is_none_or(|s| s == ctx.segment)
            && self.progress_min.is_none_or(|p| ctx.progress >= p)
            && self.progress_max.is_none_or(|p| ctx.progress <= p)
            && self.direction.is_none_or(|d| d == ctx.direction)
    }
}

/// Frame the step's deflection is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFrame {
    /// Raw device axes.
    #[default]
    Device,
    /// The current segment's correction channels; converted to device axes.
    Channels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub when: Trigger,
    pub u: [f64; 3],
    #[serde(default)]
    pub frame: InputFrame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<f64>,
}

/// Deterministic stand-in for an operator: an ordered list of steps, each
/// holding its deflection until the next step's trigger fires.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScriptedUser {
    #[serde(default)]
    pub name: String,
    pub steps: Vec<ScriptStep>,
    #[serde(skip)]
    next: usize,
}

impl ScriptedUser {
    pub fn new(name: impl Into<String>, steps: Vec<ScriptStep>) -> Self {
        Self {
            name: name.into(),
            steps,
            next: 0,
        }
    }

    /// Index of the step currently driving the output.
    pub fn active(&self) -> Option<usize> {
        self.next.checked_sub(1)
    }

    pub fn reset(&mut self) {
        self.next = 0;
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }
}

impl InputSource for ScriptedUser {
    fn next_input(&mut self, ctx: &TickContext) -> UserInput {
        while self.next < self.steps.len() && self.steps[self.next].when.matches(ctx) {
            self.next += 1;
        }
        let Some(step) = self.active().map(|k| &self.steps[k]) else {
            return UserInput::zero(ctx.t);
        };
        let u = match step.frame {
            InputFrame::Device => step.u,
            InputFrame::Channels => ctx.mapping.to_device(step.u),
        };
        let mut input = UserInput::new(u, ctx.t);
        input.overrides.scaling = step.scaling;
        input
    }
}

/// Feeds back the inputs recorded in a trace, tick by tick.
#[derive(Debug, Clone)]
pub struct ReplayUser {
    inputs: Vec<([f64; 3], Option<f64>)>,
}

impl ReplayUser {
    pub fn from_trace(trace: &SessionTrace) -> Self {
        Self {
            inputs: trace.records.iter().map(|r| (r.u, r.scaling_override)).collect(),
        }
    }
}

impl InputSource for ReplayUser {
    fn next_input(&mut self, ctx: &TickContext) -> UserInput {
        match self.inputs.get(ctx.tick as usize) {
            Some(&(u, scaling)) => UserInput {
                u,
                timestamp: ctx.t,
                overrides: Overrides { scaling },
            },
            None => UserInput::zero(ctx.t),
        }
    }
}

/// Latest-value mailbox between network ingress and the control thread.
///
/// Writers replace the held sample unless it is newer than theirs; the
/// control thread copies the current sample every tick.
#[derive(Debug, Clone, Default)]
pub struct InputMailbox {
    slot: Arc<Mutex<Option<UserInput>>>,
}

impl InputMailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `input` unless a sample with a later timestamp is already held.
    /// Returns whether it was accepted.
    pub fn post(&self, input: UserInput) -> bool {
        let mut slot = self.slot.lock().unwrap_or_else(|e| e.into_inner());
        if slot.is_some_and(|held| held.timestamp > input.timestamp) {
            return false;
        }
        *slot = Some(input);
        true
    }

    /// Drops the held sample, e.g. when the client disconnects. Input reads
    /// as zero until the next post.
    pub fn clear(&self) {
        *self.slot.lock().unwrap_or_else(|e| e.into_inner()) = None;
    }

    pub fn snapshot(&self) -> Option<UserInput> {
        *self.slot.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl InputSource for InputMailbox {
    fn next_input(&mut self, ctx: &TickContext) -> UserInput {
        match self.snapshot() {
            Some(mut input) => {
                input.timestamp = ctx.t;
                input
            }
            None => UserInput::zero(ctx.t),
        }
    }
}
