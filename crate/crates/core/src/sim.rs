//! Fixed-step hybrid simulation of the joint under prescribed leg motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::MechanismParams;
use crate::motion::MotionProfile;
use crate::ratchet::{
    apply_click, pivot_step_in_place, Event, EventKind, PawlMode, PivotState, ShiftDirection,
};

/// Largest supported outer step, s.
pub const MAX_DT: f64 = 0.005;

/// A timed shifter click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftCommand {
    pub t: f64,
    pub direction: ShiftDirection,
}

impl ShiftCommand {
    pub fn up(t: f64) -> Self {
        Self {
            t,
            direction: ShiftDirection::Up,
        }
    }

    pub fn down(t: f64) -> Self {
        Self {
            t,
            direction: ShiftDirection::Down,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub params: MechanismParams,
    pub profile: MotionProfile,
    pub schedule: Vec<ShiftCommand>,
    /// Outer step, s.
    pub dt: f64,
    /// Simulated time, s.
    pub duration: f64,
    pub initial_shifter_index: usize,
    /// Reserved; the dynamics are deterministic and draw no randomness.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: MechanismParams::default(),
            profile: MotionProfile::default(),
            schedule: Vec::new(),
            dt: 1e-3,
            duration: 10.0,
            initial_shifter_index: 1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.profile.validate()?;
        validate_dt(self.dt)?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config("duration", "must be finite and > 0"));
        }
        if self.initial_shifter_index < 1 || self.initial_shifter_index > self.params.n_detents {
            return Err(Error::config(
                "initial_shifter_index",
                format!("must lie in 1..={}", self.params.n_detents),
            ));
        }
        for (i, cmd) in self.schedule.iter().enumerate() {
            if !(cmd.t.is_finite() && cmd.t >= 0.0) {
                return Err(Error::config(format!("schedule[{i}].t"), "must be finite and >= 0"));
            }
            if i > 0 && cmd.t < self.schedule[i - 1].t {
                return Err(Error::config(format!("schedule[{i}].t"), "schedule must be sorted by t"));
            }
        }
        Ok(())
    }

    /// Number of outer steps covering `duration`.
    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }
}

pub(crate) fn validate_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 && dt <= MAX_DT {
        Ok(())
    } else {
        Err(Error::config("dt", format!("must lie in (0, {MAX_DT}], got {dt}")))
    }
}

/// One row of a trace, recorded at the end of each outer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub x: f64,
    pub detent: usize,
    /// Joint stiffness at `x`, Nm/rad.
    pub k: f64,
    /// Joint torque `k * theta`, Nm.
    pub tau: f64,
    pub tension: f64,
    pub mode: PawlMode,
    /// Kinds of the events that happened during the step ending at `t`.
    pub events: Vec<EventKind>,
}

/// Time series of a run plus its ordered event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub params: MechanismParams,
    pub dt: f64,
    pub samples: Vec<TraceSample>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn detent_sequence(&self) -> Vec<usize> {
        let mut seq: Vec<usize> = Vec::new();
        for s in &self.samples {
            if seq.last() != Some(&s.detent) {
                seq.push(s.detent);
            }
        }
        seq
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// Stepping engine shared by batch and live runs.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: MechanismParams,
    profile: MotionProfile,
    dt: f64,
    step: u64,
    state: PivotState,
}

impl Simulator {
    pub fn new(
        params: MechanismParams,
        profile: MotionProfile,
        dt: f64,
        initial_shifter_index: usize,
    ) -> Result<Self> {
        params.validate()?;
        profile.validate()?;
        validate_dt(dt)?;
        let state = PivotState::latched(&params, initial_shifter_index)
            .map_err(|_| Error::config("initial_shifter_index", format!("must lie in 1..={}", params.n_detents)))?;
        Ok(Self {
            params,
            profile,
            dt,
            step: 0,
            state,
        })
    }

    pub fn from_config(config: &SimConfig) -> Result<Self> {
        Self::new(
            config.params.clone(),
            config.profile,
            config.dt,
            config.initial_shifter_index,
        )
    }

    /// Current simulated time.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn state(&self) -> &PivotState {
        &self.state
    }

    pub fn params(&self) -> &MechanismParams {
        &self.params
    }

    pub fn profile(&self) -> &MotionProfile {
        &self.profile
    }

    /// Changes amplitude and frequency from now on, keeping the swing phase
    /// continuous.
    pub fn retune(&mut self, theta_max: f64, omega: f64) -> Result<()> {
        let next = self.profile.retuned_at(self.time(), theta_max, omega);
        next.validate()?;
        self.profile = next;
        Ok(())
    }

    /// Applies a shifter click at the current step boundary.
    pub fn click(&mut self, direction: ShiftDirection) -> Event {
        let t = self.time();
        let theta = self.profile.prescribed_theta(t).0;
        apply_click(&mut self.state, &self.params, direction, t, theta)
    }

    /// Advances one outer step, appending the step's events to `events`.
    pub fn step(&mut self, events: &mut Vec<Event>) -> Result<()> {
        let t0 = self.time();
        pivot_step_in_place(&mut self.state, &self.params, &self.profile, t0, self.dt, events)?;
        self.step += 1;
        Ok(())
    }

    /// Snapshot at the current time.
    pub fn sample(&self, events: Vec<EventKind>) -> TraceSample {
        let t = self.time();
        let (theta, theta_dot) = self.profile.prescribed_theta(t);
        let s = &self.state;
        let k = self.params.stiffness_unchecked(s.x);
        TraceSample {
            t,
            theta,
            theta_dot,
            x: s.x,
            detent: s.detent,
            k,
            tau: k * theta,
            tension: s.tension,
            mode: s.mode,
            events,
        }
    }
}

/// Runs `config` to completion.
///
/// Commands are applied at the first step boundary at or after their time.
/// Identical configurations give bit-identical traces.
pub fn simulate(config: &SimConfig) -> Result<Trace> {
    config.validate()?;
    let mut sim = Simulator::from_config(config)?;
    let steps = config.steps();
    let mut samples = Vec::with_capacity(steps as usize + 1);
    let mut events = Vec::new();
    samples.push(sim.sample(Vec::new()));
    let tolerance = 1e-9 * config.dt;
    let mut pending = config.schedule.iter().peekable();
    let mut step_events = Vec::new();
    for _ in 0..steps {
        let t = sim.time();
        step_events.clear();
        while let Some(cmd) = pending.next_if(|c| c.t <= t + tolerance) {
            step_events.push(sim.click(cmd.direction));
        }
        if let Err(err) = sim.step(&mut step_events) {
            let last = samples.last().expect("initial sample recorded");
            return Err(Error::Integration {
                t,
                message: format!("{err}; last good sample: {last:?}"),
            });
        }
        samples.push(sim.sample(step_events.iter().map(|e| e.kind).collect()));
        events.extend_from_slice(&step_events);
    }
    Ok(Trace {
        params: config.params.clone(),
        dt: config.dt,
        samples,
        events,
    })
}
