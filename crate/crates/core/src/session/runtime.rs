use super::trace::{PlantSnapshot, SegmentInfo, SessionTrace, TraceFooter, TraceHeader, TraceRecord, TraceSurface, TRACE_SCHEMA_VERSION};
use super::user::{InputSource, TickContext};
use super::SessionError;
use crate::correction::{
    arbitrate, rate_heuristic, saturate_validate, step_correction, CorrectionState, RateState, SaturationReport,
    UserInput, ValidationContext,
};
use crate::dmp::{self, reverse_state, Direction, DmpSegmentModel, DmpState};
use crate::plan::{orientation_at, transition, BehaviorPlan, Mode, OrientationState, SegmentEnd, SegmentSpec};
use crate::plan::orientation::quat_to_array;
use crate::plant::{plant_step, PlantCommand, PlantState};
use crate::state::{ChannelKind, StateVector};
use crate::surface::{BSplineSurface, SurfaceDoc};
use nalgebra::{UnitQuaternion, Vector3};

/// Device travel at full deflection (m), used to turn scripted deflections
/// into device displacements for input-time metrics.
pub const DEFAULT_DEVICE_RANGE: f64 = 0.04;
/// Below this the nominal motion has no usable direction for rate modulation.
const MIN_RATE_NORM: f64 = 1e-12;

/// Runtime knobs that are not part of the scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionOptions {
    /// Hard stop; defaults to three times the nominal duration plus 10 s.
    pub max_time: Option<f64>,
    pub device_range: f64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            max_time: None,
            device_range: DEFAULT_DEVICE_RANGE,
        }
    }
}

/// Why a session stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionEnd {
    Completed,
    TimeLimit,
    Fault(String),
}

struct Cursor {
    index: usize,
    model: DmpSegmentModel,
    state: DmpState,
    direction: Direction,
    started: bool,
    orientation: OrientationState,
}

/// One execution of a plan. Owns all mutable state; advanced one fixed step
/// per [`Session::tick`].
pub struct Session {
    plan: BehaviorPlan,
    environment: Vec<BSplineSurface>,
    config_hash: String,
    options: SessionOptions,
    max_time: f64,
    cursor: Cursor,
    correction: CorrectionState,
    rate: RateState,
    plant: PlantState,
    tick: u64,
    end: Option<SessionEnd>,
    warnings: Vec<String>,
}

impl Session {
    pub fn new(plan: BehaviorPlan, config_hash: impl Into<String>, options: SessionOptions) -> Result<Self, SessionError> {
        let first = plan.segments.first().ok_or_else(|| SessionError::Config("plan has no segments".into()))?;
        let correction = CorrectionState::new(first.model.channel_count(), first.stiffness)
            .map_err(|e| SessionError::Config(e.to_string()))?;
        let environment: Vec<BSplineSurface> = plan.surfaces.iter().map(|s| s.surface.clone()).collect();
        let start = first.model.initial_state();
        let position = match (first.mode, plan.surface_of(first)) {
            (Mode::HybridSurface, Some(s)) => s.surface.eval(start.x[0], start.x[1]),
            _ => Vector3::new(start.x[0], start.x[1], start.x[2]),
        };
        let at = (first.mode == Mode::HybridSurface).then(|| (start.x[0], start.x[1]));
        let initial = UnitQuaternion::identity();
        let max_time = options.max_time.or(plan.max_time).unwrap_or(3.0 * plan.nominal_duration() + 10.0);
        let cursor = Cursor {
            index: 0,
            model: first.model.clone(),
            state: start,
            direction: Direction::Forward,
            started: false,
            orientation: OrientationState::new(initial),
        };
        let mut session = Self {
            plant: PlantState::at_rest(position, initial, environment.len()),
            environment,
            config_hash: config_hash.into(),
            options,
            max_time,
            cursor,
            correction,
            rate: RateState::default(),
            tick: 0,
            end: None,
            warnings: plan.warnings.clone(),
            plan,
        };
        // start with the tool already oriented as the first segment asks
        let q = session.orientation(0.0, &Vector3::zeros(), &at);
        session.plant.orientation = q;
        session.cursor.orientation = OrientationState::new(q);
        Ok(session)
    }

    pub fn plan(&self) -> &BehaviorPlan {
        &self.plan
    }

    pub fn dt(&self) -> f64 {
        self.plan.dt
    }

    pub fn max_time(&self) -> f64 {
        self.max_time
    }

    pub fn end(&self) -> Option<&SessionEnd> {
        self.end.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.end.is_some()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn segment(&self) -> &SegmentSpec {
        &self.plan.segments[self.cursor.index]
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            scenario: self.plan.name.clone(),
            config_hash: self.config_hash.clone(),
            dt: self.plan.dt,
            device_range: Some(self.options.device_range),
            max_time: self.max_time,
            segments: self
                .plan
                .segments
                .iter()
                .map(|s| SegmentInfo {
                    id: s.id.clone(),
                    mode: s.mode,
                    duration: s.model.duration,
                    scaling: s.scaling.effective(1.0),
                })
                .collect(),
            task: self.plan.task.clone(),
            surfaces: self
                .plan
                .surfaces
                .iter()
                .map(|s| TraceSurface {
                    id: s.id.clone(),
                    surface: SurfaceDoc::from_surface(&s.surface),
                })
                .collect(),
        }
    }

    pub fn footer(&self) -> TraceFooter {
        TraceFooter {
            completed: self.end == Some(SessionEnd::Completed),
            fault: match &self.end {
                Some(SessionEnd::Fault(f)) => Some(f.clone()),
                Some(SessionEnd::TimeLimit) => Some(format!("time limit of {:.3} s reached", self.max_time)),
                _ => None,
            },
            ticks: self.tick,
            warnings: self.warnings.clone(),
        }
    }

    fn progress(&self) -> f64 {
        let c = &self.cursor;
        let s = c.model.forward_phase(c.direction, c.state.s);
        c.model.canonical.progress(s).clamp(0.0, 1.0)
    }

    /// Context handed to the input source before the next tick.
    pub fn context(&self) -> TickContext<'_> {
        let seg = self.segment();
        TickContext {
            t: self.tick as f64 * self.plan.dt,
            tick: self.tick,
            segment: &seg.id,
            segment_index: self.cursor.index,
            progress: self.progress(),
            direction: self.cursor.direction,
            mapping: self.plan.input_mapping(seg),
        }
    }

    fn orientation(&mut self, progress: f64, motion: &Vector3<f64>, at: &Option<(f64, f64)>) -> UnitQuaternion<f64> {
        let seg = &self.plan.segments[self.cursor.index];
        let frame = match (self.plan.surface_of(seg), at) {
            (Some(s), Some((u, v))) => s.surface.frame(u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)).ok(),
            _ => None,
        };
        orientation_at(&seg.orientation, progress, frame.as_ref(), motion, &mut self.cursor.orientation, self.plan.dt)
    }

    /// Unit nominal direction of forward motion and the correction
    /// direction, both measured in units of each channel's correction limit.
    fn rate_inputs(&self, seg: &SegmentSpec, correction: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let sign = self.cursor.direction.sign();
        let channels = self.cursor.model.channels();
        let mut v_n = vec![0.0; correction.len()];
        let mut f_d = vec![0.0; correction.len()];
        for c in 0..correction.len() {
            let limit = seg.scaling.max[c];
            let used = seg.scaling.subspace[c]
                && limit > 0.0
                && (channels[c].kind != ChannelKind::Force || seg.rate.include_force);
            if used {
                v_n[c] = sign * self.cursor.state.z[c] / limit;
                f_d[c] = correction[c] / limit;
            }
        }
        let norm = v_n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > MIN_RATE_NORM {
            v_n.iter_mut().for_each(|x| *x /= norm);
        } else {
            v_n.iter_mut().for_each(|x| *x = 0.0);
        }
        let fd_norm = f_d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if fd_norm > 1.0 {
            f_d.iter_mut().for_each(|x| *x /= fd_norm);
        }
        (v_n, f_d)
    }

    /// Runs one control step with `input` and returns its record.
    ///
    /// Order: correction filter, execution rate, primitive step, arbitration,
    /// validation, plant, then the segment transition check. The first tick of
    /// a segment records its start without integrating.
    pub fn tick(&mut self, input: &UserInput) -> Result<TraceRecord, SessionError> {
        if self.end.is_some() {
            return Err(SessionError::Finished);
        }
        let dt = self.plan.dt;
        let index = self.cursor.index;
        let seg = self.plan.segments[index].clone();
        let input = UserInput {
            overrides: input.overrides,
            ..UserInput::new(input.u, input.timestamp)
        };
        let override_factor = input_override(&input);
        let factor = if seg.calibrated { 0.0 } else { override_factor.unwrap_or(1.0) };
        let mapping = self.plan.input_mapping(&seg);

        self.correction = step_correction(&self.correction, &mapping.to_channels(input.u), dt);
        let proposed = seg.scaling.apply(&self.correction, factor);

        if self.cursor.started {
            let (v_n, f_d) = self.rate_inputs(&seg, &proposed);
            let next = rate_heuristic(&self.rate, &v_n, &f_d, &seg.rate);
            if next.direction != self.cursor.direction {
                self.cursor.state = reverse_state(&self.cursor.model, &self.cursor.state);
                self.cursor.direction = next.direction;
            }
            self.rate = next;
            let end = self.cursor.model.canonical.end_threshold();
            // backtracking stops at the segment start
            let at_start = self.cursor.direction == Direction::Backward && self.cursor.state.s < end;
            if !self.rate.hold && !at_start {
                match dmp::step(&self.cursor.model, &self.cursor.state, self.rate.tau, dt, self.cursor.direction) {
                    Ok(s) => self.cursor.state = s,
                    Err(e) => return Err(self.fault(format!("segment '{}': {e}", seg.id))),
                }
            } else if at_start {
                self.rate.hold = true;
            }
        } else {
            self.cursor.started = true;
        }

        let x_n = StateVector(self.cursor.state.x.clone());
        let surface = seg.surface.map(|k| &self.environment[k]);
        let seed = self.plant.uv.unwrap_or((0.5, 0.5));
        let ctx = ValidationContext {
            mode: seg.validation_mode(),
            surface,
            edge_margin: seg.edge_margin,
            standoff_band: seg.standoff_band,
            seed,
        };
        let (dy, mut saturation) = saturate_validate(x_n.as_slice(), &proposed, &ctx);
        saturation.scaling_zeroed = factor == 0.0 && seg.scaling.max.iter().any(|&s| s > 0.0);
        let x_cmd = arbitrate(&x_n, &dy).map_err(|e| self.fault(e.to_string()))?;
        if x_cmd.iter().any(|x| !x.is_finite()) {
            return Err(self.fault(format!("segment '{}': non-finite command {x_cmd}", seg.id)));
        }

        let progress = self.progress();
        let velocity = self.plant.velocity;
        let cmd_uv = (seg.mode == Mode::HybridSurface).then(|| (x_cmd[0], x_cmd[1])).or(self.plant.uv);
        let q = self.orientation(progress, &velocity, &cmd_uv);
        let command = match (seg.mode, seg.surface) {
            (Mode::HybridSurface, Some(k)) => PlantCommand::Hybrid {
                surface: &self.environment[k],
                u: x_cmd[0].clamp(0.0, 1.0),
                v: x_cmd[1].clamp(0.0, 1.0),
                force: x_cmd[2],
                orientation: q,
            },
            _ => PlantCommand::Free {
                position: Vector3::new(x_cmd[0], x_cmd[1], x_cmd[2]),
                orientation: q,
            },
        };
        self.plant = plant_step(&self.plant, &command, &self.environment, &self.plan.plant, dt);

        let s_fwd = self.cursor.model.forward_phase(self.cursor.direction, self.cursor.state.s);
        let record = TraceRecord {
            t: self.tick as f64 * dt,
            tick: self.tick,
            segment: seg.id.clone(),
            segment_index: index,
            s: s_fwd,
            progress,
            tau: (!self.rate.hold).then_some(self.rate.tau),
            direction: self.cursor.direction,
            hold: self.rate.hold,
            x_n: x_n.0.clone(),
            dy: dy.clone(),
            x_cmd: x_cmd.0.clone(),
            u: input.u,
            scaling_override: override_factor,
            scaling: seg.scaling.effective(factor),
            saturation,
            plant: snapshot(&self.plant),
        };
        self.tick += 1;

        let done = self.cursor.direction == Direction::Forward
            && self.cursor.state.s < self.cursor.model.canonical.end_threshold();
        if done {
            self.advance(&seg, SegmentEnd { nominal: x_n, correction: dy });
        } else if self.tick as f64 * dt > self.max_time + 1e-9 {
            log::warn!("session '{}' hit its time limit", self.plan.name);
            self.end = Some(SessionEnd::TimeLimit);
        }
        Ok(record)
    }

    fn advance(&mut self, seg: &SegmentSpec, end: SegmentEnd) {
        let next_index = self.cursor.index + 1;
        let Some(next) = self.plan.segments.get(next_index) else {
            self.end = Some(SessionEnd::Completed);
            return;
        };
        let t = transition(seg, &end, next, &self.plan.surfaces);
        if let Some(w) = t.warning {
            self.warnings.push(w);
        }
        let state = t.model.initial_state();
        self.cursor = Cursor {
            index: next_index,
            model: t.model,
            state,
            direction: Direction::Forward,
            started: false,
            orientation: OrientationState::new(self.cursor.orientation.last),
        };
        self.correction = CorrectionState::new(next.model.channel_count(), next.stiffness).expect("validated at compile");
        self.rate = RateState::default();
    }

    fn fault(&mut self, message: String) -> SessionError {
        log::error!("{message}");
        self.end = Some(SessionEnd::Fault(message.clone()));
        SessionError::Fault(message)
    }

    /// Runs to the end, pulling one input per tick, and passes each record to `sink`.
    pub fn run_with(&mut self, source: &mut dyn InputSource, mut sink: impl FnMut(&TraceRecord)) {
        while !self.is_finished() {
            let input = source.next_input(&self.context());
            match self.tick(&input) {
                Ok(r) => sink(&r),
                Err(_) => break,
            }
        }
    }

    /// Runs to the end and returns the full trace.
    pub fn run(mut self, source: &mut dyn InputSource) -> SessionTrace {
        let header = self.header();
        let mut records = Vec::new();
        self.run_with(source, |r| records.push(r.clone()));
        SessionTrace {
            header,
            records,
            footer: Some(self.footer()),
        }
    }
}

fn input_override(input: &UserInput) -> Option<f64> {
    input.overrides.scaling.map(|s| if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 })
}

fn snapshot(p: &PlantState) -> PlantSnapshot {
    PlantSnapshot {
        position: p.position.into(),
        orientation: quat_to_array(&p.orientation),
        velocity: p.velocity.into(),
        force: p.force,
        contact: p.contact,
        uv: p.uv.map(|(u, v)| [u, v]),
    }
}

/// Saturation flag counts over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct SaturationCounts {
    pub param_clamped: u64,
    pub normal_scaled: u64,
    pub force_floored: u64,
    pub scaling_zeroed: u64,
}

impl SaturationCounts {
    pub fn add(&mut self, s: &SaturationReport) {
        self.param_clamped += s.param_clamped as u64;
        self.normal_scaled += s.normal_scaled as u64;
        self.force_floored += s.force_floored as u64;
        self.scaling_zeroed += s.scaling_zeroed as u64;
    }
}
