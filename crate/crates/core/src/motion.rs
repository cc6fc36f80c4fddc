//! Prescribed joint motion.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A joint angle known as a function of time.
///
/// The pivot integrator needs more than point samples: to decide whether a
/// latched pivot can start moving during a step it must know where `theta^2`
/// peaks or vanishes inside the step. `stationary_points` reports those
/// instants.
pub trait JointAngle {
    /// `(theta, theta_dot)` at time `t`.
    fn at(&self, t: f64) -> (f64, f64);

    /// Times strictly inside `(t0, t1)` where `theta^2` is stationary, in
    /// increasing order.
    fn stationary_points(&self, t0: f64, t1: f64, out: &mut Vec<f64>);

    fn theta(&self, t: f64) -> f64 {
        self.at(t).0
    }
}

/// A joint held at a fixed angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantAngle(pub f64);

impl JointAngle for ConstantAngle {
    fn at(&self, _t: f64) -> (f64, f64) {
        (self.0, 0.0)
    }

    fn stationary_points(&self, _t0: f64, _t1: f64, _out: &mut Vec<f64>) {}
}

/// Sinusoidal leg swing `theta = theta_max * sin(omega * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionProfile {
    /// Amplitude, rad.
    pub theta_max: f64,
    /// Angular frequency, rad/s.
    pub omega: f64,
    /// Phase offset, rad.
    #[serde(default)]
    pub phase: f64,
}

impl Default for MotionProfile {
    /// Leg swing of +-20 degrees at 0.8 Hz.
    fn default() -> Self {
        Self::from_frequency(20f64.to_radians(), 0.8)
    }
}

impl MotionProfile {
    pub fn from_frequency(theta_max: f64, frequency_hz: f64) -> Self {
        Self {
            theta_max,
            omega: TAU * frequency_hz,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_max.is_finite() && self.theta_max >= 0.0) {
            return Err(Error::config("profile.theta_max", "must be finite and >= 0"));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::config("profile.omega", "must be finite and > 0"));
        }
        if !self.phase.is_finite() {
            return Err(Error::config("profile.phase", "must be finite"));
        }
        Ok(())
    }

    /// Oscillation period `2 pi / omega`, s.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn frequency_hz(&self) -> f64 {
        self.omega / TAU
    }

    /// `(theta, theta_dot)` at time `t >= 0`.
    pub fn prescribed_theta(&self, t: f64) -> (f64, f64) {
        let arg = self.omega * t + self.phase;
        let (s, c) = arg.sin_cos();
        (self.theta_max * s, self.theta_max * self.omega * c)
    }

    /// Same motion re-expressed with a new amplitude and frequency, keeping
    /// the oscillation phase continuous at time `t`.
    pub fn retuned_at(&self, t: f64, theta_max: f64, omega: f64) -> Self {
        let arg = (self.omega * t + self.phase).rem_euclid(TAU);
        Self {
            theta_max,
            omega,
            phase: arg - omega * t,
        }
    }
}

impl JointAngle for MotionProfile {
    fn at(&self, t: f64) -> (f64, f64) {
        self.prescribed_theta(t)
    }

    fn stationary_points(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        if self.theta_max == 0.0 {
            return;
        }
        // theta^2 is stationary where sin or cos of the argument vanishes,
        // i.e. at multiples of pi/2.
        let a0 = self.omega * t0 + self.phase;
        let a1 = self.omega * t1 + self.phase;
        let mut n = (a0 / FRAC_PI_2).floor() + 1.0;
        loop {
            let arg = n * FRAC_PI_2;
            if arg >= a1 {
                break;
            }
            let t = (arg - self.phase) / self.omega;
            if t > t0 && t < t1 {
                out.push(t);
            }
            n += 1.0;
        }
    }
}

/// Half of the oscillation period, the longest wait until the next
/// equilibrium crossing.
pub fn half_period(profile: &MotionProfile) -> f64 {
    PI / profile.omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn start_of_swing() {
        let p = MotionProfile::from_frequency(0.349, 0.8);
        let (theta, rate) = p.prescribed_theta(0.0);
        assert_eq!(theta, 0.0);
        assert_relative_eq!(rate, 0.349 * TAU * 0.8);
    }

    #[test]
    fn quarter_period_peak() {
        let p = MotionProfile::from_frequency(0.349, 0.8);
        let (theta, rate) = p.prescribed_theta(p.period() / 4.0);
        assert_relative_eq!(theta, 0.349, max_relative = 1e-12);
        assert!(rate.abs() < 1e-12);
    }

    #[test]
    fn default_amplitude_is_twenty_degrees() {
        let p = MotionProfile::default();
        assert_relative_eq!(p.theta_max.to_degrees(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn stationary_points_found() {
        let p = MotionProfile::from_frequency(0.3, 1.0);
        let mut out = Vec::new();
        p.stationary_points(0.0, 1.0, &mut out);
        let expect = [0.25, 0.5, 0.75];
        assert_eq!(out.len(), 3);
        for (a, b) in out.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        out.clear();
        p.stationary_points(0.26, 0.49, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn retune_keeps_phase() {
        let p = MotionProfile::from_frequency(0.3, 1.0);
        let t = 3.37;
        let q = p.retuned_at(t, 0.3, TAU * 2.0);
        assert_relative_eq!(p.theta(t), q.theta(t), epsilon = 1e-12);
    }
}
