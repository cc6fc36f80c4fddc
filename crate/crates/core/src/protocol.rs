//! Messages exchanged with a live session.
//!
//! Every message is one JSON object tagged by `type`. Clients send
//! `shift_up`, `shift_down`, `pause`, `resume`, `reset` and
//! `set_profile {amplitude_rad?, frequency_hz?}`. The server answers with
//! `hello` once per connection, `state` frames at the tick rate, `event`
//! frames for every mechanism event, and `error` frames.

use serde::{Deserialize, Serialize};

use crate::mechanism::MechanismParams;
use crate::ratchet::{Event, PawlMode};
use crate::sim::TraceSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    ShiftUp,
    ShiftDown,
    Pause,
    Resume,
    Reset,
    SetProfile {
        #[serde(default)]
        amplitude_rad: Option<f64>,
        #[serde(default)]
        frequency_hz: Option<f64>,
    },
}

impl ClientMessage {
    /// Parses one text frame; the error text is meant for an `error` frame.
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text.trim()).map_err(|e| format!("malformed message: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub x: f64,
    pub detent: usize,
    pub shifter_index: usize,
    pub k: f64,
    pub tau: f64,
    pub tension: f64,
    pub mode: PawlMode,
    pub paused: bool,
}

impl StateFrame {
    pub fn new(sample: &TraceSample, shifter_index: usize, paused: bool) -> Self {
        Self {
            t: sample.t,
            theta: sample.theta,
            theta_dot: sample.theta_dot,
            x: sample.x,
            detent: sample.detent,
            shifter_index,
            k: sample.k,
            tau: sample.tau,
            tension: sample.tension,
            mode: sample.mode,
            paused,
        }
    }
}

/// Detent geometry a client needs to draw the rack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub dt: f64,
    pub tick_hz: f64,
    pub n_detents: usize,
    pub detent_positions: Vec<f64>,
    pub detent_stiffness: Vec<f64>,
    pub tooth_clearance: f64,
}

impl Hello {
    pub fn new(params: &MechanismParams, dt: f64, tick_hz: f64) -> Self {
        let detent_positions = params.detent_positions();
        Self {
            dt,
            tick_hz,
            n_detents: params.n_detents,
            detent_stiffness: detent_positions
                .iter()
                .map(|&x| params.stiffness_unchecked(x))
                .collect(),
            detent_positions,
            tooth_clearance: params.tooth_clearance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(Hello),
    State(StateFrame),
    Event(Event),
    Error { message: String },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}
