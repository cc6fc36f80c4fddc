//! Closed-form shifting analyses and trace post-processing.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationTable;
use crate::error::{Error, Result};
use crate::mechanism::{MechanismParams, THETA_GUARD};
use crate::ratchet::{EventKind, PawlMode, ShiftDirection};
use crate::sim::Trace;

/// Fraction of average hip torque covered by the stiffest setting, for a
/// 75 kg person walking at 1.6 m/s. Quoted, not computed.
pub const HIP_ASSISTANCE_FRACTION: f64 = 0.35;

/// How the exact timing window is defined; carried in reports.
pub const TIMING_WINDOW_NOTE: &str = "exact_fraction is the contiguous interval around one \
equilibrium crossing in which F(theta(t), x) <= f_max, as a fraction of the period; \
bound_fraction is the closed-form upper bound (2/pi) sqrt(q)";

/// Peak reaction force over a swing of amplitude `theta_max`, N.
pub fn reaction_force_max(params: &MechanismParams, x: f64, theta_max: f64) -> Result<f64> {
    params.reaction_force(x, theta_max)
}

/// Share of the oscillation period during which a limited shifting force can
/// move the pivot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingWindow {
    /// `f_max / F_max`.
    pub q: f64,
    pub bound_fraction: f64,
    pub exact_fraction: f64,
}

/// Timing window for force ratio `q = f_max / F_max`. Ratios above one
/// saturate: the pivot can then be moved at any phase of the half cycle.
pub fn timing_window(q: f64) -> Result<TimingWindow> {
    if !(q >= 0.0) {
        return Err(Error::Domain {
            quantity: "force ratio q",
            value: q,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let z = q.min(1.0).sqrt();
    Ok(TimingWindow {
        q,
        bound_fraction: FRAC_2_PI * z,
        exact_fraction: z.asin() / PI,
    })
}

/// Timing window of the pivot at `x` under swing amplitude `theta_max`.
pub fn timing_window_at(params: &MechanismParams, x: f64, theta_max: f64) -> Result<TimingWindow> {
    let f_peak = reaction_force_max(params, x, theta_max)?;
    let q = if f_peak > 0.0 {
        params.max_cable_force / f_peak
    } else {
        f64::INFINITY
    };
    timing_window(q)
}

/// Largest `|theta|` at which a force `f_avail` still out-pulls the spring
/// reaction at `x`. Saturates at the angle guard when `dk/dx` vanishes.
pub fn shiftable_angle(params: &MechanismParams, x: f64, f_avail: f64) -> Result<f64> {
    if !(f_avail >= 0.0 && f_avail.is_finite()) {
        return Err(Error::Domain {
            quantity: "available force",
            value: f_avail,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    if !(x.is_finite() && x >= 0.0 && x < params.span()) {
        return Err(Error::Domain {
            quantity: "pivot position x",
            value: x,
            min: 0.0,
            max: params.span(),
        });
    }
    let slope = params.stiffness_derivative_unchecked(x);
    if slope <= 0.0 {
        return Ok(THETA_GUARD);
    }
    Ok((2.0 * f_avail / slope).sqrt().min(THETA_GUARD))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessRow {
    pub detent: usize,
    pub x: f64,
    pub k: f64,
    /// Torque at 30 degrees of deflection, Nm.
    pub torque_30deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessRangeReport {
    pub rows: Vec<StiffnessRow>,
    pub hip_assistance_fraction: f64,
    pub hip_assistance_note: String,
}

pub fn stiffness_range_report(params: &MechanismParams) -> Result<StiffnessRangeReport> {
    params.validate()?;
    let theta = 30f64.to_radians();
    let rows = params
        .detent_positions()
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let k = params.stiffness(x)?;
            Ok(StiffnessRow {
                detent: i + 1,
                x,
                k,
                torque_30deg: k * theta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StiffnessRangeReport {
        rows,
        hip_assistance_fraction: HIP_ASSISTANCE_FRACTION,
        hip_assistance_note: "maximum torque is about 35% of average hip torque for a 75 kg \
                              person walking at 1.6 m/s (quoted, not computed)"
            .to_string(),
    })
}

impl fmt::Display for StiffnessRangeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>10} {:>10} {:>12}", "detent", "x [mm]", "k [Nm/rad]", "tau@30 [Nm]")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6} {:>10.4} {:>10.3} {:>12.3}",
                r.detent,
                r.x * 1e3,
                r.k,
                r.torque_30deg
            )?;
        }
        write!(f, "note: {}", self.hip_assistance_note)
    }
}

/// Torque estimated per sample from the trace's detent and joint angle, the
/// way measured curves would be used on the bench.
pub fn estimate_torque_trace(trace: &Trace, table: &CalibrationTable) -> Result<Vec<f64>> {
    let have: BTreeSet<usize> = table.detents().collect();
    let missing: BTreeSet<usize> = trace
        .samples
        .iter()
        .map(|s| s.detent)
        .filter(|d| !have.contains(d))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingDetent {
            missing: missing.into_iter().collect(),
        });
    }
    trace
        .samples
        .iter()
        .map(|s| table.torque(s.detent, s.theta))
        .collect()
}

/// Time spent on one detent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dwell {
    pub detent: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub peak_torque: f64,
    /// Largest `|x - detent position|` while the pawl held the commanded
    /// detent; `None` if it never settled there.
    pub float_amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetentPeak {
    pub detent: usize,
    pub peak_torque: f64,
}

/// Delay between an accepted click and the pivot reaching its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftLatency {
    pub t_command: f64,
    pub direction: ShiftDirection,
    pub target: usize,
    pub t_realized: Option<f64>,
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseReport {
    pub detent_sequence: Vec<usize>,
    pub dwells: Vec<Dwell>,
    pub peak_torque_by_detent: Vec<DetentPeak>,
    pub max_float: Option<f64>,
    pub latencies: Vec<ShiftLatency>,
    pub refused_clicks: usize,
}

impl StaircaseReport {
    pub fn peak_torque(&self, detent: usize) -> Option<f64> {
        self.peak_torque_by_detent
            .iter()
            .find(|p| p.detent == detent)
            .map(|p| p.peak_torque)
    }

    pub fn max_latency(&self, direction: ShiftDirection) -> Option<f64> {
        self.latencies
            .iter()
            .filter(|l| l.direction == direction)
            .filter_map(|l| l.latency)
            .reduce(f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let seq: Vec<String> = self.detent_sequence.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "detent sequence: {}", seq.join(" "));
        let _ = writeln!(
            out,
            "{:>6} {:>9} {:>9} {:>10} {:>10}",
            "detent", "start [s]", "end [s]", "|tau| [Nm]", "float [mm]"
        );
        for d in &self.dwells {
            let float = d
                .float_amplitude
                .map_or_else(|| "-".to_string(), |f| format!("{:.3}", f * 1e3));
            let _ = writeln!(
                out,
                "{:>6} {:>9.3} {:>9.3} {:>10.3} {:>10}",
                d.detent, d.t_start, d.t_end, d.peak_torque, float
            );
        }
        for l in &self.latencies {
            let lat = l
                .latency
                .map_or_else(|| "not realized".to_string(), |v| format!("{v:.4} s"));
            let _ = writeln!(
                out,
                "shift {:?} at {:.3} s -> detent {}: {}",
                l.direction, l.t_command, l.target, lat
            );
        }
        let _ = write!(out, "refused clicks: {}", self.refused_clicks);
        out
    }
}

/// Summarises the detent staircase of a trace.
///
/// Float is measured only on samples where the pawl holds the detent the
/// shifter currently commands, so the transit between detents is excluded.
/// The event log must be the one recorded with the samples.
pub fn staircase_metrics(trace: &Trace) -> StaircaseReport {
    let params = &trace.params;
    let samples = &trace.samples;
    let mut dwells: Vec<Dwell> = Vec::new();
    let mut peaks: Vec<DetentPeak> = Vec::new();
    let mut commanded = samples.first().map_or(1, |s| s.detent);
    let mut cursor = 0;

    for s in samples {
        let end = (cursor + s.events.len()).min(trace.events.len());
        for e in &trace.events[cursor..end] {
            if matches!(e.kind, EventKind::ShiftUp | EventKind::ShiftDown) {
                commanded = e.detent;
            }
        }
        cursor = end;

        match dwells.last_mut() {
            Some(d) if d.detent == s.detent => d.t_end = s.t,
            last => {
                if let Some(d) = last {
                    d.t_end = s.t;
                }
                dwells.push(Dwell {
                    detent: s.detent,
                    t_start: s.t,
                    t_end: s.t,
                    peak_torque: 0.0,
                    float_amplitude: None,
                });
            }
        }
        let dwell = dwells.last_mut().expect("pushed above");
        dwell.peak_torque = dwell.peak_torque.max(s.tau.abs());
        if s.mode == PawlMode::Engaged && s.detent == commanded {
            let dev = (s.x - params.detent_position(s.detent)).abs();
            dwell.float_amplitude = Some(dwell.float_amplitude.map_or(dev, |f| f.max(dev)));
        }

        match peaks.iter_mut().find(|p| p.detent == s.detent) {
            Some(p) => p.peak_torque = p.peak_torque.max(s.tau.abs()),
            None => peaks.push(DetentPeak {
                detent: s.detent,
                peak_torque: s.tau.abs(),
            }),
        }
    }
    peaks.sort_by_key(|p| p.detent);

    let max_float = dwells
        .iter()
        .filter_map(|d| d.float_amplitude)
        .reduce(f64::max);

    let mut latencies = Vec::new();
    for (i, cmd) in trace.events.iter().enumerate() {
        let (direction, reached) = match cmd.kind {
            EventKind::ShiftUp => (ShiftDirection::Up, EventKind::DetentAdvance),
            EventKind::ShiftDown => (ShiftDirection::Down, EventKind::DetentDrop),
            _ => continue,
        };
        let opposite = match direction {
            ShiftDirection::Up => EventKind::ShiftDown,
            ShiftDirection::Down => EventKind::ShiftUp,
        };
        let t_realized = trace.events[i + 1..]
            .iter()
            .take_while(|e| e.kind != opposite)
            .find(|e| e.kind == reached && e.detent == cmd.detent)
            .map(|e| e.t);
        latencies.push(ShiftLatency {
            t_command: cmd.t,
            direction,
            target: cmd.detent,
            t_realized,
            latency: t_realized.map(|t| t - cmd.t),
        });
    }

    StaircaseReport {
        detent_sequence: trace.detent_sequence(),
        dwells,
        peak_torque_by_detent: peaks,
        max_float,
        latencies,
        refused_clicks: trace.events_of(EventKind::RefusedClick).count(),
    }
}
