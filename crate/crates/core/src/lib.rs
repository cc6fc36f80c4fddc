//! Simulator for a human-selectable variable stiffness spring joint.
//!
//! The joint's stiffness is set by a pivot that a ratchet and pawl lock in
//! one of several detents. A hand shifter pulls the pivot toward higher
//! stiffness through a Bowden cable and a series spring, or slackens the
//! cable so the loaded spring pushes the pivot back down.
//!
//! * [`mechanism`]: stiffness law, torque, pivot reaction force, detents.
//! * [`motion`]: the prescribed leg swing.
//! * [`calibration`]: per-detent torque-angle tables.
//! * [`ratchet`]: cable tension, pawl hysteresis, pivot dynamics.
//! * [`sim`]: fixed-step hybrid simulation and traces; [`scenario`] holds
//!   the built-in runs.
//! * [`live`]: interactive sessions driven by a command stream.
//! * [`analysis`]: timing windows, stiffness tables, staircase metrics.
//! * [`io`], [`config`], [`protocol`], [`server`], [`sweep`]: files, run
//!   configuration, the live-session wire protocol and endpoint, sweeps.
//! * [`app`]: the `vss-sim` command line.

pub mod analysis;
pub mod app;
pub mod calibration;
pub mod config;
pub mod error;
pub mod io;
pub mod live;
pub mod mechanism;
pub mod motion;
pub mod protocol;
pub mod ratchet;
pub mod scenario;
pub mod server;
pub mod sim;
pub mod sweep;

pub use analysis::{staircase_metrics, timing_window, StaircaseReport, TimingWindow};
pub use calibration::CalibrationTable;
pub use error::{Error, Result};
pub use mechanism::MechanismParams;
pub use motion::{ConstantAngle, JointAngle, MotionProfile};
pub use ratchet::{Event, EventKind, PawlMode, PivotState, ShiftDirection};
pub use sim::{simulate, ShiftCommand, SimConfig, Simulator, Trace, TraceSample};
