//! Corrective shared autonomy in simulation.
//!
//! A nominal task is a sequence of dynamic movement primitive segments. While
//! it runs, an operator adds bounded corrections to a small subspace of the
//! robot state (three Cartesian positions in free space, or two surface
//! coordinates plus the contact force when in contact). Pushing against the
//! direction of motion slows or reverses execution.
//!
//! Module map:
//! - [`dmp`]: primitive fitting and integration (forward and backward variants)
//! - [`surface`]: B-spline surfaces, normals, plane fit, projection
//! - [`correction`]: correction dynamics, arbitration, execution rate, input validation
//! - [`plan`]: scenario documents, segment plans, transitions, orientation
//! - [`plant`]: kinematic tool plant with admittance force loop, task errors, outcomes
//! - [`session`]: fixed-timestep loop, traces, scripted users, metrics

pub mod correction;
pub mod dmp;
pub mod plan;
pub mod plant;
pub mod session;
pub mod state;
pub mod surface;
pub mod tasks;

pub use state::{ChannelKind, ChannelSpec, StateVector};
