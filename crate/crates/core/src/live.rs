//! Interactive sessions: the batch dynamics driven by a command stream.
//!
//! A [`LiveSession`] is a simulator that takes commands between steps and
//! produces protocol messages. It knows nothing about wall-clock time;
//! [`run_interactive`] adds pacing and a command queue on top.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::protocol::{ClientMessage, Hello, ServerMessage, StateFrame};
use crate::ratchet::{Event, ShiftDirection};
use crate::sim::{SimConfig, Simulator, Trace, TraceSample};

/// What a session can be asked to do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionCommand {
    Shift(ShiftDirection),
    Pause,
    Resume,
    Reset,
    SetProfile {
        amplitude_rad: Option<f64>,
        frequency_hz: Option<f64>,
    },
}

impl From<ClientMessage> for SessionCommand {
    fn from(msg: ClientMessage) -> Self {
        match msg {
            ClientMessage::ShiftUp => SessionCommand::Shift(ShiftDirection::Up),
            ClientMessage::ShiftDown => SessionCommand::Shift(ShiftDirection::Down),
            ClientMessage::Pause => SessionCommand::Pause,
            ClientMessage::Resume => SessionCommand::Resume,
            ClientMessage::Reset => SessionCommand::Reset,
            ClientMessage::SetProfile {
                amplitude_rad,
                frequency_hz,
            } => SessionCommand::SetProfile {
                amplitude_rad,
                frequency_hz,
            },
        }
    }
}

/// Input queue item for [`run_interactive`].
#[derive(Debug, Clone, PartialEq)]
pub enum SessionInput {
    Command(SessionCommand),
    /// A message that failed to parse; answered with an error frame.
    Malformed(String),
    Shutdown,
}

#[derive(Debug, Clone)]
pub struct LiveSession {
    config: SimConfig,
    tick_hz: f64,
    steps_per_tick: u64,
    sim: Simulator,
    paused: bool,
    clicks: VecDeque<ShiftDirection>,
    recording: Option<Trace>,
    scratch: Vec<Event>,
}

impl LiveSession {
    /// Session over `config` (its schedule is ignored) emitting state frames
    /// at `tick_hz`, which must divide the step rate `1 / dt`.
    pub fn new(config: &SimConfig, tick_hz: f64) -> Result<Self> {
        let mut config = config.clone();
        config.schedule.clear();
        config.validate()?;
        let ratio = 1.0 / (config.dt * tick_hz);
        let steps_per_tick = ratio.round();
        if !(tick_hz > 0.0 && steps_per_tick >= 1.0 && (ratio - steps_per_tick).abs() < 1e-6) {
            return Err(Error::config(
                "tick_hz",
                format!("{tick_hz} Hz does not divide the step rate {} Hz", 1.0 / config.dt),
            ));
        }
        let sim = Simulator::from_config(&config)?;
        Ok(Self {
            config,
            tick_hz,
            steps_per_tick: steps_per_tick as u64,
            sim,
            paused: false,
            clicks: VecDeque::new(),
            recording: None,
            scratch: Vec::new(),
        })
    }

    /// Keeps a trace of every step, as [`crate::simulate`] would record it.
    pub fn with_recording(mut self) -> Self {
        self.recording = Some(self.empty_trace());
        self
    }

    fn empty_trace(&self) -> Trace {
        Trace {
            params: self.config.params.clone(),
            dt: self.config.dt,
            samples: vec![self.sim.sample(Vec::new())],
            events: Vec::new(),
        }
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn time(&self) -> f64 {
        self.sim.time()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn tick_hz(&self) -> f64 {
        self.tick_hz
    }

    pub fn hello(&self) -> ServerMessage {
        ServerMessage::Hello(Hello::new(self.sim.params(), self.sim.dt(), self.tick_hz))
    }

    pub fn state_frame(&self) -> ServerMessage {
        let sample = self.sim.sample(Vec::new());
        ServerMessage::State(StateFrame::new(
            &sample,
            self.sim.state().shifter_index,
            self.paused,
        ))
    }

    pub fn recording(&self) -> Option<&Trace> {
        self.recording.as_ref()
    }

    pub fn into_recording(self) -> Option<Trace> {
        self.recording
    }

    /// Accepts a command. Clicks wait for the next step boundary and show
    /// up as event frames; everything else answers with a state frame right
    /// away, or an error frame if the command is rejected.
    pub fn handle(&mut self, command: SessionCommand) -> Vec<ServerMessage> {
        match command {
            SessionCommand::Shift(direction) => {
                self.clicks.push_back(direction);
                Vec::new()
            }
            SessionCommand::Pause => {
                self.paused = true;
                vec![self.state_frame()]
            }
            SessionCommand::Resume => {
                self.paused = false;
                vec![self.state_frame()]
            }
            SessionCommand::Reset => {
                self.sim = Simulator::from_config(&self.config).expect("config validated at construction");
                self.clicks.clear();
                if self.recording.is_some() {
                    self.recording = Some(self.empty_trace());
                }
                vec![self.state_frame()]
            }
            SessionCommand::SetProfile {
                amplitude_rad,
                frequency_hz,
            } => {
                let profile = *self.sim.profile();
                let theta_max = amplitude_rad.unwrap_or(profile.theta_max);
                let omega = frequency_hz.map_or(profile.omega, |f| TAU * f);
                match self.sim.retune(theta_max, omega) {
                    Ok(()) => vec![self.state_frame()],
                    Err(e) => vec![ServerMessage::Error {
                        message: e.to_string(),
                    }],
                }
            }
        }
    }

    /// Advances one step unless paused, returning event frames and, on tick
    /// boundaries, a state frame.
    pub fn step(&mut self) -> Result<Vec<ServerMessage>> {
        if self.paused {
            return Ok(Vec::new());
        }
        self.scratch.clear();
        while let Some(direction) = self.clicks.pop_front() {
            let event = self.sim.click(direction);
            self.scratch.push(event);
        }
        self.sim.step(&mut self.scratch)?;
        let mut out: Vec<ServerMessage> = self.scratch.iter().map(|&e| ServerMessage::Event(e)).collect();
        let sample = self.sim.sample(self.scratch.iter().map(|e| e.kind).collect());
        if self.sim.steps_taken() % self.steps_per_tick == 0 {
            out.push(ServerMessage::State(StateFrame::new(
                &sample,
                self.sim.state().shifter_index,
                false,
            )));
        }
        if let Some(trace) = &mut self.recording {
            trace.events.extend_from_slice(&self.scratch);
            trace.samples.push(sample);
        }
        Ok(out)
    }

    /// Last recorded sample, if recording.
    pub fn last_sample(&self) -> Option<&TraceSample> {
        self.recording.as_ref().and_then(|t| t.samples.last())
    }
}

/// How simulated time relates to wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Simulated seconds per wall second.
    Realtime { speed: f64 },
    /// As fast as possible.
    Unpaced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractiveOptions {
    pub tick_hz: f64,
    pub pacing: Pacing,
    /// Stop once simulated time reaches this many seconds.
    pub stop_after: Option<f64>,
    pub start_paused: bool,
    pub record: bool,
}

impl Default for InteractiveOptions {
    fn default() -> Self {
        Self {
            tick_hz: 50.0,
            pacing: Pacing::Realtime { speed: 1.0 },
            stop_after: None,
            start_paused: false,
            record: false,
        }
    }
}

/// Runs a session fed from `inputs`, passing every outgoing message to
/// `emit`. Stops on [`SessionInput::Shutdown`], when `emit` returns false,
/// at `stop_after`, or when the input side hangs up and no `stop_after` is
/// set. Returns the recorded trace when recording was requested.
pub fn run_interactive(
    config: &SimConfig,
    options: InteractiveOptions,
    inputs: Receiver<SessionInput>,
    mut emit: impl FnMut(ServerMessage) -> bool,
) -> Result<Option<Trace>> {
    let mut session = LiveSession::new(config, options.tick_hz)?;
    if options.record {
        session = session.with_recording();
    }
    if options.start_paused {
        session.handle(SessionCommand::Pause);
    }
    if !emit(session.hello()) {
        return Ok(session.into_recording());
    }
    let step_ticks = options.stop_after.map(|t| (t / config.dt).round() as u64);
    let mut hung_up = false;
    // Wall-clock anchor, moved on every resume so pauses only shift wall time.
    let mut anchor = (Instant::now(), session.time());

    let dispatch = |session: &mut LiveSession, input: SessionInput, emit: &mut dyn FnMut(ServerMessage) -> bool| -> bool {
        let replies = match input {
            SessionInput::Command(cmd) => session.handle(cmd),
            SessionInput::Malformed(message) => vec![ServerMessage::Error { message }],
            SessionInput::Shutdown => return false,
        };
        replies.into_iter().all(emit)
    };

    'run: loop {
        loop {
            match inputs.try_recv() {
                Ok(input) => {
                    let before = (session.is_paused(), session.time());
                    if !dispatch(&mut session, input, &mut emit) {
                        break 'run;
                    }
                    if (before.0 && !session.is_paused()) || session.time() < before.1 {
                        anchor = (Instant::now(), session.time());
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    hung_up = true;
                    break;
                }
            }
        }
        if step_ticks.is_some_and(|n| session.simulator().steps_taken() >= n) {
            break;
        }
        if hung_up && step_ticks.is_none() {
            break;
        }
        let wait = if session.is_paused() {
            Some(Duration::from_millis(20))
        } else if let Pacing::Realtime { speed } = options.pacing {
            let due = anchor.0 + Duration::from_secs_f64((session.time() - anchor.1) / speed);
            due.checked_duration_since(Instant::now())
        } else {
            None
        };
        if let Some(wait) = wait {
            if hung_up {
                std::thread::sleep(wait);
                continue;
            }
            match inputs.recv_timeout(wait) {
                Ok(input) => {
                    let before = (session.is_paused(), session.time());
                    if !dispatch(&mut session, input, &mut emit) {
                        break 'run;
                    }
                    if (before.0 && !session.is_paused()) || session.time() < before.1 {
                        anchor = (Instant::now(), session.time());
                    }
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => hung_up = true,
            }
            continue;
        }
        for msg in session.step()? {
            if !emit(msg) {
                break 'run;
            }
        }
    }
    Ok(session.into_recording())
}
