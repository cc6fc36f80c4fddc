//! The self-locking pivot: Bowden cable and series spring, pawl hysteresis,
//! ratchet directionality and the pivot equation of motion.
//!
//! The pivot obeys `m x'' = f_s - F(theta, x) - c x'` plus the constraints
//! the pawl imposes while engaged:
//!
//! * the tooth of the latched detent is a hard lower stop at its detent
//!   position, so the spring reaction cannot lower the stiffness;
//! * the pawl and rack resist motion with a holding force `f0`, so a latched
//!   pivot only moves when the net force exceeds it;
//! * the pawl clicks over the next tooth when the pivot reaches the next
//!   detent position while the cable still out-pulls `F + f0`.
//!
//! With the pawl lifted the pivot moves freely under cable tension and the
//! spring reaction until the slack is taken up and the pawl re-engages on the
//! highest tooth at or below the pivot.
//!
//! Discrete transitions are localised inside a step by bisection, so event
//! times do not depend on the outer step size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::MechanismParams;
use crate::motion::JointAngle;

/// Largest inner integration step for a moving pivot, s.
pub const MAX_SUBSTEP: f64 = 1e-4;
/// Width to which transition instants are bisected, s.
pub const EVENT_TIME_TOLERANCE: f64 = 1e-10;
const POSITION_EPS: f64 = 1e-12;
const MAX_TRANSITIONS_PER_STEP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PawlMode {
    Engaged,
    Disengaged,
}

impl PawlMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PawlMode::Engaged => "ENGAGED",
            PawlMode::Disengaged => "DISENGAGED",
        }
    }
}

impl std::str::FromStr for PawlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ENGAGED" => Ok(PawlMode::Engaged),
            "DISENGAGED" => Ok(PawlMode::Disengaged),
            other => Err(Error::Format(format!("unknown pawl mode {other:?}"))),
        }
    }
}

/// Hand shifter lever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShiftDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    DetentAdvance,
    DetentDrop,
    PawlEngage,
    PawlDisengage,
    Limit,
    RefusedClick,
    /// Accepted shifter click toward higher stiffness.
    ShiftUp,
    /// Accepted shifter click toward lower stiffness.
    ShiftDown,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DetentAdvance => "DETENT_ADVANCE",
            EventKind::DetentDrop => "DETENT_DROP",
            EventKind::PawlEngage => "PAWL_ENGAGE",
            EventKind::PawlDisengage => "PAWL_DISENGAGE",
            EventKind::Limit => "LIMIT",
            EventKind::RefusedClick => "REFUSED_CLICK",
            EventKind::ShiftUp => "SHIFT_UP",
            EventKind::ShiftDown => "SHIFT_DOWN",
        }
    }
}

impl std::str::FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "DETENT_ADVANCE" => EventKind::DetentAdvance,
            "DETENT_DROP" => EventKind::DetentDrop,
            "PAWL_ENGAGE" => EventKind::PawlEngage,
            "PAWL_DISENGAGE" => EventKind::PawlDisengage,
            "LIMIT" => EventKind::Limit,
            "REFUSED_CLICK" => EventKind::RefusedClick,
            "SHIFT_UP" => EventKind::ShiftUp,
            "SHIFT_DOWN" => EventKind::ShiftDown,
            other => return Err(Error::Format(format!("unknown event kind {other:?}"))),
        })
    }
}

/// A discrete transition of the mechanism.
///
/// `detent` is the latched detent after the transition; for shifter clicks
/// it is the shifter index after the click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub detent: usize,
    pub x: f64,
    pub theta: f64,
    pub tension: f64,
}

/// Instantaneous state of the pivot mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotState {
    /// Pivot position, m.
    pub x: f64,
    /// Pivot velocity, m/s.
    pub v: f64,
    /// Latched detent (1-based). While disengaged, the last latched detent.
    pub detent: usize,
    /// Commanded cable position, m.
    pub u: f64,
    pub shifter_index: usize,
    pub mode: PawlMode,
    /// Series spring tension, N.
    pub tension: f64,
}

impl PivotState {
    /// Pivot resting on the tooth of `shifter_index` with the cable commanded
    /// to that index and the pawl engaged.
    pub fn latched(params: &MechanismParams, shifter_index: usize) -> Result<Self> {
        let u = cable_command(shifter_index, params)?;
        let x = params.detent_position(shifter_index);
        Ok(Self {
            x,
            v: 0.0,
            detent: shifter_index,
            u,
            shifter_index,
            mode: PawlMode::Engaged,
            tension: cable_tension(params, u, x),
        })
    }
}

/// Cable position commanded by shifter index `shifter_index`.
pub fn cable_command(shifter_index: usize, params: &MechanismParams) -> Result<f64> {
    if shifter_index < 1 || shifter_index > params.n_detents {
        return Err(Error::Domain {
            quantity: "shifter index",
            value: shifter_index as f64,
            min: 1.0,
            max: params.n_detents as f64,
        });
    }
    Ok(params.detent_position(shifter_index) + 0.5 * params.tooth_clearance)
}

/// Series spring tension for cable position `u` and pivot position `x`.
/// The cable can only pull, and the human cannot pull harder than `f_max`.
pub fn cable_tension(params: &MechanismParams, u: f64, x: f64) -> f64 {
    let stretch = u - x;
    if stretch <= 0.0 {
        0.0
    } else {
        (params.series_stiffness * stretch).min(params.max_cable_force)
    }
}

/// Pawl hysteresis: engage at `f_s >= f_engage`, disengage at
/// `f_s < f_disengage`, hold in between.
pub fn pawl_transition(mode: PawlMode, tension: f64, params: &MechanismParams) -> PawlMode {
    match mode {
        PawlMode::Disengaged if tension >= params.engage_force => PawlMode::Engaged,
        PawlMode::Engaged if tension < params.disengage_force => PawlMode::Disengaged,
        unchanged => unchanged,
    }
}

/// Applies one shifter click at time `t`. A click past either end of the
/// shifter is refused and leaves the state untouched.
pub fn apply_click(
    state: &mut PivotState,
    params: &MechanismParams,
    direction: ShiftDirection,
    t: f64,
    theta: f64,
) -> Event {
    let target = match direction {
        ShiftDirection::Up => state.shifter_index.checked_add(1),
        ShiftDirection::Down => state.shifter_index.checked_sub(1),
    };
    let accepted = target.and_then(|i| cable_command(i, params).ok().map(|u| (i, u)));
    let kind = match accepted {
        Some((index, u)) => {
            state.shifter_index = index;
            state.u = u;
            state.tension = cable_tension(params, u, state.x);
            match direction {
                ShiftDirection::Up => EventKind::ShiftUp,
                ShiftDirection::Down => EventKind::ShiftDown,
            }
        }
        None => EventKind::RefusedClick,
    };
    Event {
        t,
        kind,
        detent: state.shifter_index,
        x: state.x,
        theta,
        tension: state.tension,
    }
}

/// Result of advancing the pivot by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: PivotState,
    pub events: Vec<Event>,
}

/// Advances the pivot from `t0` to `t0 + dt` under the joint motion `angle`.
pub fn pivot_step<A: JointAngle + ?Sized>(
    state: &PivotState,
    params: &MechanismParams,
    angle: &A,
    t0: f64,
    dt: f64,
) -> Result<StepOutcome> {
    let mut state = *state;
    let mut events = Vec::new();
    pivot_step_in_place(&mut state, params, angle, t0, dt, &mut events)?;
    Ok(StepOutcome { state, events })
}

/// In-place variant of [`pivot_step`] appending events to `events`.
pub fn pivot_step_in_place<A: JointAngle + ?Sized>(
    state: &mut PivotState,
    params: &MechanismParams,
    angle: &A,
    t0: f64,
    dt: f64,
    events: &mut Vec<Event>,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain {
            quantity: "dt",
            value: dt,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let mut stepper = Stepper {
        p: params,
        angle,
        state,
        events,
        scratch: Vec::new(),
    };
    stepper.run(t0, t0 + dt)
}

/// Which way an engaged pivot is sliding; sets the sign of the holding force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slide {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trigger {
    /// Reached the next tooth while sliding up.
    NextTooth,
    UpperLimit,
    LowerLimit,
    /// Engaged pivot came to rest on the latched tooth.
    ToothStop,
    /// Velocity reversed while sliding.
    Halt,
    Disengage,
    Engage,
}

struct Stepper<'a, A: JointAngle + ?Sized> {
    p: &'a MechanismParams,
    angle: &'a A,
    state: &'a mut PivotState,
    events: &'a mut Vec<Event>,
    scratch: Vec<f64>,
}

impl<A: JointAngle + ?Sized> Stepper<'_, A> {
    fn run(&mut self, t0: f64, t_end: f64) -> Result<()> {
        self.check_finite(t0)?;
        self.state.tension = cable_tension(self.p, self.state.u, self.state.x);
        self.update_mode(t0);

        let mut t = t0;
        let mut transitions = 0usize;
        while t < t_end {
            transitions += 1;
            if transitions > MAX_TRANSITIONS_PER_STEP {
                return Err(Error::Integration {
                    t,
                    message: "too many transitions within one step".into(),
                });
            }
            t = match self.state.mode {
                PawlMode::Engaged if self.state.v == 0.0 => match self.slip(t) {
                    Some(slide) => {
                        if slide == Slide::Up && self.at_next_tooth() {
                            self.advance(t);
                            continue;
                        }
                        self.integrate(t, t_end, Some(slide))?
                    }
                    None => self.find_slip_onset(t, t_end),
                },
                PawlMode::Engaged => {
                    let slide = if self.state.v > 0.0 { Slide::Up } else { Slide::Down };
                    self.integrate(t, t_end, Some(slide))?
                }
                PawlMode::Disengaged => self.integrate(t, t_end, None)?,
            };
        }
        self.state.tension = cable_tension(self.p, self.state.u, self.state.x);
        Ok(())
    }

    fn check_finite(&self, t: f64) -> Result<()> {
        let s = &self.state;
        if s.x.is_finite() && s.v.is_finite() && s.u.is_finite() {
            Ok(())
        } else {
            Err(Error::Integration {
                t,
                message: format!("non-finite pivot state x = {}, v = {}, u = {}", s.x, s.v, s.u),
            })
        }
    }

    fn push(&mut self, t: f64, kind: EventKind) {
        self.events.push(Event {
            t,
            kind,
            detent: self.state.detent,
            x: self.state.x,
            theta: self.angle.theta(t),
            tension: cable_tension(self.p, self.state.u, self.state.x),
        });
    }

    fn update_mode(&mut self, t: f64) {
        let tension = cable_tension(self.p, self.state.u, self.state.x);
        match (self.state.mode, pawl_transition(self.state.mode, tension, self.p)) {
            (PawlMode::Engaged, PawlMode::Disengaged) => self.disengage(t),
            (PawlMode::Disengaged, PawlMode::Engaged) => self.engage(t),
            _ => {}
        }
    }

    fn disengage(&mut self, t: f64) {
        self.state.mode = PawlMode::Disengaged;
        self.push(t, EventKind::PawlDisengage);
    }

    /// Re-latches on the highest tooth at or below the pivot, reporting every
    /// detent passed while the pawl was lifted.
    fn engage(&mut self, t: f64) {
        let latch = self.tooth_at_or_below(self.state.x);
        while self.state.detent > latch {
            self.state.detent -= 1;
            self.push(t, EventKind::DetentDrop);
        }
        while self.state.detent < latch {
            self.state.detent += 1;
            self.push(t, EventKind::DetentAdvance);
        }
        self.state.mode = PawlMode::Engaged;
        self.push(t, EventKind::PawlEngage);
    }

    fn advance(&mut self, t: f64) {
        self.state.detent += 1;
        self.push(t, EventKind::DetentAdvance);
    }

    fn tooth_at_or_below(&self, x: f64) -> usize {
        let p = self.p;
        let mut latch = 1;
        for i in 2..=p.n_detents {
            if p.detent_position(i) <= x + POSITION_EPS {
                latch = i;
            } else {
                break;
            }
        }
        latch
    }

    fn at_next_tooth(&self) -> bool {
        self.state.detent < self.p.n_detents
            && self.state.x >= self.p.detent_position(self.state.detent + 1) - POSITION_EPS
    }

    fn lower_stop(&self) -> f64 {
        self.p.detent_position(self.state.detent)
    }

    fn reaction(&self, t: f64, x: f64) -> f64 {
        let theta = self.angle.theta(t);
        self.p.reaction_force_unchecked(x, theta)
    }

    /// Direction an engaged pivot at rest starts to slide at time `t`, if any.
    fn slip(&self, t: f64) -> Option<Slide> {
        let s = &*self.state;
        let net = cable_tension(self.p, s.u, s.x) - self.reaction(t, s.x);
        // A pivot stalled on the top tooth sits at the travel limit but can
        // still click over it.
        if net > self.p.holding_force && (s.x < self.p.x_max - POSITION_EPS || self.at_next_tooth()) {
            Some(Slide::Up)
        } else if -net > self.p.holding_force && s.x > self.lower_stop() + POSITION_EPS {
            Some(Slide::Down)
        } else {
            None
        }
    }

    /// Earliest time in `(t, t_end]` at which a pivot at rest starts to slip,
    /// or `t_end` if it stays put. Between stationary points of `theta^2` the
    /// slip condition is monotone, so checking segment ends and bisecting the
    /// first segment that flips is exact.
    fn find_slip_onset(&mut self, t: f64, t_end: f64) -> f64 {
        let mut marks = std::mem::take(&mut self.scratch);
        marks.clear();
        self.angle.stationary_points(t, t_end, &mut marks);
        marks.push(t_end);
        let mut a = t;
        let mut onset = t_end;
        for &b in &marks {
            if self.slip(b).is_some() {
                let (mut lo, mut hi) = (a, b);
                while hi - lo > EVENT_TIME_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.slip(mid).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                onset = hi;
                break;
            }
            a = b;
        }
        self.scratch = marks;
        onset
    }

    fn acceleration(&self, t: f64, x: f64, v: f64, slide: Option<Slide>) -> f64 {
        let p = self.p;
        let holding = match slide {
            Some(Slide::Up) => p.holding_force,
            Some(Slide::Down) => -p.holding_force,
            None => 0.0,
        };
        let force = cable_tension(p, self.state.u, x) - self.reaction(t, x) - holding;
        (force - p.pivot_damping * v) / p.pivot_mass
    }

    fn rk4(&self, t: f64, x: f64, v: f64, h: f64, slide: Option<Slide>) -> (f64, f64) {
        let k1x = v;
        let k1v = self.acceleration(t, x, v, slide);
        let k2x = v + 0.5 * h * k1v;
        let k2v = self.acceleration(t + 0.5 * h, x + 0.5 * h * k1x, k2x, slide);
        let k3x = v + 0.5 * h * k2v;
        let k3v = self.acceleration(t + 0.5 * h, x + 0.5 * h * k2x, k3x, slide);
        let k4x = v + h * k3v;
        let k4v = self.acceleration(t + h, x + h * k3x, k4x, slide);
        (
            x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }

    fn trigger(&self, x: f64, v: f64, slide: Option<Slide>) -> Option<Trigger> {
        let p = self.p;
        let s = &*self.state;
        let tension = cable_tension(p, s.u, x);
        match slide {
            Some(Slide::Up) => {
                if s.detent < p.n_detents && x >= p.detent_position(s.detent + 1) {
                    Some(Trigger::NextTooth)
                } else if x >= p.x_max {
                    Some(Trigger::UpperLimit)
                } else if v <= 0.0 {
                    Some(Trigger::Halt)
                } else if tension < p.disengage_force {
                    Some(Trigger::Disengage)
                } else {
                    None
                }
            }
            Some(Slide::Down) => {
                if x <= self.lower_stop() {
                    Some(Trigger::ToothStop)
                } else if v >= 0.0 {
                    Some(Trigger::Halt)
                } else if tension < p.disengage_force {
                    Some(Trigger::Disengage)
                } else {
                    None
                }
            }
            None => {
                if tension >= p.engage_force {
                    Some(Trigger::Engage)
                } else if x <= p.x_min {
                    Some(Trigger::LowerLimit)
                } else if x >= p.x_max {
                    Some(Trigger::UpperLimit)
                } else {
                    None
                }
            }
        }
    }

    /// A free pivot pressed against a travel limit stays there.
    fn resting_on_limit(&self, t: f64) -> bool {
        let s = &*self.state;
        if s.v != 0.0 {
            return false;
        }
        let a = self.acceleration(t, s.x, 0.0, None);
        (s.x <= self.p.x_min && a <= 0.0) || (s.x >= self.p.x_max && a >= 0.0)
    }

    /// Integrates the moving pivot until the first transition or `t_end`.
    /// Returns the time reached.
    fn integrate(&mut self, mut t: f64, t_end: f64, slide: Option<Slide>) -> Result<f64> {
        while t < t_end {
            let h = (t_end - t).min(MAX_SUBSTEP);
            if slide.is_none() && self.resting_on_limit(t) {
                t = if t_end - t <= MAX_SUBSTEP { t_end } else { t + h };
                continue;
            }
            let (x0, v0) = (self.state.x, self.state.v);
            let (x1, v1) = self.rk4(t, x0, v0, h, slide);
            if !(x1.is_finite() && v1.is_finite()) {
                return Err(Error::Integration {
                    t,
                    message: format!("non-finite pivot state x = {x1}, v = {v1}"),
                });
            }
            if self.trigger(x1, v1, slide).is_none() {
                self.state.x = x1;
                self.state.v = v1;
                t = if h < MAX_SUBSTEP { t_end } else { t + h };
                continue;
            }
            let (mut lo, mut hi) = (0.0, h);
            let (mut xh, mut vh) = (x1, v1);
            while hi - lo > EVENT_TIME_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                let (xm, vm) = self.rk4(t, x0, v0, mid, slide);
                if self.trigger(xm, vm, slide).is_some() {
                    hi = mid;
                    xh = xm;
                    vh = vm;
                } else {
                    lo = mid;
                }
            }
            let trigger = self
                .trigger(xh, vh, slide)
                .expect("bisection keeps the triggered bracket end");
            let te = t + hi;
            self.state.x = xh;
            self.state.v = vh;
            self.apply(trigger, te);
            return Ok(te.min(t_end));
        }
        Ok(t_end)
    }

    fn apply(&mut self, trigger: Trigger, t: f64) {
        let p = self.p;
        match trigger {
            Trigger::NextTooth => {
                let net = cable_tension(p, self.state.u, self.state.x) - self.reaction(t, self.state.x);
                if net > p.holding_force {
                    self.advance(t);
                } else {
                    // The pawl cannot climb the tooth; the pivot stalls on it.
                    self.state.x = p.detent_position(self.state.detent + 1);
                    self.state.v = 0.0;
                }
                if self.state.x >= p.x_max {
                    self.state.x = p.x_max;
                    if self.state.v > 0.0 {
                        self.state.v = 0.0;
                        self.push(t, EventKind::Limit);
                    }
                }
            }
            Trigger::UpperLimit => {
                self.state.x = p.x_max;
                self.state.v = 0.0;
                self.push(t, EventKind::Limit);
            }
            Trigger::LowerLimit => {
                self.state.x = p.x_min;
                self.state.v = 0.0;
                self.push(t, EventKind::Limit);
            }
            Trigger::ToothStop => {
                self.state.x = self.lower_stop();
                self.state.v = 0.0;
            }
            Trigger::Halt => self.state.v = 0.0,
            Trigger::Disengage => self.disengage(t),
            Trigger::Engage => self.engage(t),
        }
    }
}
