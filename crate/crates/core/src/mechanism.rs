//! Static relations of the adjustable pivot-point spring joint.
//!
//! The joint couples a torsional spring of stiffness `k_S` to the joint shaft
//! through a lever whose fulcrum (the pivot) sits at position `x` along a
//! linkage of total length `l + d`. Moving the pivot changes the mechanical
//! advantage, giving the joint stiffness
//!
//! ```text
//! k(x) = k_S * (x / (l + d - x))^2
//! ```
//!
//! and a back-driving force on the pivot `F = 1/2 * k'(x) * theta^2` that
//! always pushes the pivot toward lower stiffness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest joint deflection for which the linear torque model is evaluated.
pub const THETA_GUARD: f64 = std::f64::consts::FRAC_PI_2;

/// Stiffness range of the prototype joint, Nm/rad.
pub const PROTOTYPE_K_MIN: f64 = 6.0;
pub const PROTOTYPE_K_MAX: f64 = 70.0;

/// Physical constants of the joint, springs, ratchet and cable. SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanismParams {
    /// Torsional spring stiffness `k_S`, Nm/rad.
    pub torsion_stiffness: f64,
    /// Spring-side linkage length `l`, m.
    pub spring_link: f64,
    /// Shaft-side linkage length `d`, m.
    pub shaft_link: f64,
    /// Lower pivot travel limit, m.
    pub x_min: f64,
    /// Upper pivot travel limit, m.
    pub x_max: f64,
    /// Number of ratchet detents (shifter indices).
    pub n_detents: usize,
    /// Free play of the pivot within an engaged detent, m.
    pub tooth_clearance: f64,
    /// Mass of the stiffness modulating mechanism, kg.
    pub pivot_mass: f64,
    /// Viscous damping on pivot motion, N s/m.
    pub pivot_damping: f64,
    /// Series spring stiffness `k_s` between cable and pawl, N/m.
    pub series_stiffness: f64,
    /// Parallel (pawl-return) spring stiffness `k_p`, N/m. Its effect on the
    /// pawl enters the model through `engage_force` / `disengage_force`.
    pub parallel_stiffness: f64,
    /// Series-spring tension at or above which the pawl engages, N.
    pub engage_force: f64,
    /// Series-spring tension below which the pawl disengages, N.
    pub disengage_force: f64,
    /// Holding / friction threshold `f0` the net force must exceed to move
    /// an engaged pivot, N.
    pub holding_force: f64,
    /// Largest tension the human can produce through the shifter, N.
    pub max_cable_force: f64,
}

impl Default for MechanismParams {
    fn default() -> Self {
        let torsion_stiffness = 24.0;
        let spring_link = 0.080;
        let shaft_link = 0.020;
        let span = spring_link + shaft_link;
        let x_min = pivot_for_stiffness(torsion_stiffness, span, PROTOTYPE_K_MIN);
        let x_max = pivot_for_stiffness(torsion_stiffness, span, PROTOTYPE_K_MAX);
        Self {
            torsion_stiffness,
            spring_link,
            shaft_link,
            x_min,
            x_max,
            n_detents: 10,
            tooth_clearance: 0.002,
            pivot_mass: 0.05,
            pivot_damping: 20.0,
            series_stiffness: 6000.0,
            parallel_stiffness: 485.0,
            engage_force: 5.5,
            disengage_force: 3.0,
            holding_force: 5.0,
            max_cable_force: 50.0,
        }
    }
}

fn pivot_for_stiffness(torsion_stiffness: f64, span: f64, k: f64) -> f64 {
    let r = (k / torsion_stiffness).sqrt();
    span * r / (1.0 + r)
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and > 0, got {value}")))
    }
}

impl MechanismParams {
    /// Checks every structural invariant, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        positive("torsion_stiffness", self.torsion_stiffness)?;
        positive("spring_link", self.spring_link)?;
        positive("shaft_link", self.shaft_link)?;
        positive("series_stiffness", self.series_stiffness)?;
        positive("parallel_stiffness", self.parallel_stiffness)?;
        positive("pivot_mass", self.pivot_mass)?;
        if !(self.pivot_damping.is_finite() && self.pivot_damping >= 0.0) {
            return Err(Error::config("pivot_damping", "must be finite and >= 0"));
        }
        if !(self.x_min.is_finite() && self.x_min > 0.0) {
            return Err(Error::config("x_min", "must be > 0"));
        }
        if !(self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::config("x_max", "must be > x_min"));
        }
        if self.x_max >= self.span() {
            return Err(Error::config(
                "x_max",
                format!("must be < spring_link + shaft_link = {}", self.span()),
            ));
        }
        if self.n_detents < 2 {
            return Err(Error::config("n_detents", "must be >= 2"));
        }
        if !(self.tooth_clearance.is_finite()
            && self.tooth_clearance >= 0.0
            && self.tooth_clearance < self.detent_pitch())
        {
            return Err(Error::config(
                "tooth_clearance",
                format!("must lie in [0, detent pitch = {})", self.detent_pitch()),
            ));
        }
        if !(self.disengage_force.is_finite() && self.disengage_force > 0.0) {
            return Err(Error::config("disengage_force", "must be > 0"));
        }
        if !(self.engage_force.is_finite() && self.engage_force > self.disengage_force) {
            return Err(Error::config("engage_force", "must be > disengage_force"));
        }
        if !(self.max_cable_force.is_finite() && self.max_cable_force >= self.engage_force) {
            return Err(Error::config("max_cable_force", "must be >= engage_force"));
        }
        if !(self.holding_force.is_finite() && self.holding_force >= 0.0) {
            return Err(Error::config("holding_force", "must be >= 0"));
        }
        Ok(())
    }

    /// Total linkage length `l + d`.
    pub fn span(&self) -> f64 {
        self.spring_link + self.shaft_link
    }

    fn check_pivot(&self, x: f64) -> Result<()> {
        if x.is_finite() && x >= self.x_min && x <= self.x_max {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity: "pivot position x",
                value: x,
                min: self.x_min,
                max: self.x_max,
            })
        }
    }

    fn check_theta(theta: f64) -> Result<()> {
        if theta.is_finite() && theta.abs() <= THETA_GUARD {
            Ok(())
        } else {
            Err(Error::Domain {
                quantity: "joint angle theta",
                value: theta,
                min: -THETA_GUARD,
                max: THETA_GUARD,
            })
        }
    }

    /// Joint stiffness at pivot position `x`, Nm/rad.
    pub fn stiffness(&self, x: f64) -> Result<f64> {
        self.check_pivot(x)?;
        Ok(self.stiffness_unchecked(x))
    }

    /// `dk/dx` at pivot position `x`, Nm/rad/m.
    pub fn stiffness_derivative(&self, x: f64) -> Result<f64> {
        self.check_pivot(x)?;
        Ok(self.stiffness_derivative_unchecked(x))
    }

    /// Joint torque under the linear model `k(x) * theta`, Nm.
    pub fn torque_linear(&self, x: f64, theta: f64) -> Result<f64> {
        self.check_pivot(x)?;
        Self::check_theta(theta)?;
        Ok(self.stiffness_unchecked(x) * theta)
    }

    /// Spring force back-driving the pivot toward lower stiffness, N.
    pub fn reaction_force(&self, x: f64, theta: f64) -> Result<f64> {
        self.check_pivot(x)?;
        if !theta.is_finite() {
            return Err(Error::Domain {
                quantity: "joint angle theta",
                value: theta,
                min: f64::NEG_INFINITY,
                max: f64::INFINITY,
            });
        }
        Ok(self.reaction_force_unchecked(x, theta))
    }

    /// Pivot position producing stiffness `k_target`.
    pub fn invert_stiffness(&self, k_target: f64) -> Result<f64> {
        let k_min = self.stiffness_unchecked(self.x_min);
        let k_max = self.stiffness_unchecked(self.x_max);
        // Endpoints come from round-tripped floats; allow a few ulps of slack.
        let slack = 1e-12 * k_max;
        if !(k_target.is_finite() && k_target >= k_min - slack && k_target <= k_max + slack) {
            return Err(Error::Unreachable {
                quantity: "stiffness",
                value: k_target,
                min: k_min,
                max: k_max,
            });
        }
        let x = pivot_for_stiffness(self.torsion_stiffness, self.span(), k_target);
        Ok(x.clamp(self.x_min, self.x_max))
    }

    /// Distance between adjacent detents, m. Also the cable travel of one
    /// shifter click.
    pub fn detent_pitch(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_detents.max(2) - 1) as f64
    }

    /// Cable shortening produced by one shifter click, m.
    pub fn click_travel(&self) -> f64 {
        self.detent_pitch()
    }

    /// Pivot positions of all detents, index 1 first. The last entry is
    /// exactly `x_max`.
    pub fn detent_positions(&self) -> Vec<f64> {
        (1..=self.n_detents).map(|i| self.detent_position(i)).collect()
    }

    /// Pivot position of the 1-based detent `index`, clamped to the rack.
    pub fn detent_position(&self, index: usize) -> f64 {
        let index = index.clamp(1, self.n_detents);
        if index == self.n_detents {
            self.x_max
        } else {
            self.x_min + (index - 1) as f64 * self.detent_pitch()
        }
    }

    pub(crate) fn stiffness_unchecked(&self, x: f64) -> f64 {
        let ratio = x / (self.span() - x);
        self.torsion_stiffness * ratio * ratio
    }

    pub(crate) fn stiffness_derivative_unchecked(&self, x: f64) -> f64 {
        let span = self.span();
        let rest = span - x;
        2.0 * self.torsion_stiffness * x * span / (rest * rest * rest)
    }

    pub(crate) fn reaction_force_unchecked(&self, x: f64, theta: f64) -> f64 {
        0.5 * self.stiffness_derivative_unchecked(x) * theta * theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn central_difference(p: &MechanismParams, x: f64) -> f64 {
        let h = 1e-6;
        (p.stiffness_unchecked(x + h) - p.stiffness_unchecked(x - h)) / (2.0 * h)
    }

    fn bisect_stiffness(p: &MechanismParams, k: f64) -> f64 {
        let (mut lo, mut hi) = (p.x_min, p.x_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p.stiffness_unchecked(mid) < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Defaults with travel widened so rounded example positions at the
    /// ends of the rack are in range.
    fn wide() -> MechanismParams {
        MechanismParams {
            x_min: 0.03,
            x_max: 0.065,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_valid() {
        MechanismParams::default().validate().unwrap();
    }

    #[test]
    fn stiffness_examples() {
        let p = wide();
        assert_relative_eq!(p.stiffness(p.span() / 2.0).unwrap(), 24.0, max_relative = 1e-12);
        assert_relative_eq!(p.stiffness(0.0333333).unwrap(), 6.0, epsilon = 1e-4);
        assert_relative_eq!(p.stiffness(0.063072).unwrap(), 70.0, epsilon = 0.1);
    }

    #[test]
    fn stiffness_out_of_range_names_bound() {
        let p = MechanismParams::default();
        let err = p.stiffness(0.01).unwrap_err().to_string();
        assert!(err.contains("pivot position"), "{err}");
        assert!(p.stiffness(0.07).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = wide();
        let d = p.stiffness_derivative(0.050).unwrap();
        assert_relative_eq!(d, 1920.0, max_relative = 1e-12);
        assert_relative_eq!(d, central_difference(&p, 0.050), max_relative = 1e-6);
        let top = p.stiffness_derivative(0.063072).unwrap();
        assert!((top - 6011.0).abs() < 1.0, "{top}");
        assert_relative_eq!(top, central_difference(&p, 0.063072), max_relative = 1e-6);
        assert_eq!(p.stiffness_derivative_unchecked(0.0), 0.0);
    }

    #[test]
    fn torque_examples() {
        let p = MechanismParams::default();
        let deg30 = 30f64.to_radians();
        assert_eq!(p.torque_linear(0.05, 0.0).unwrap(), 0.0);
        let top = p.torque_linear(p.x_max, deg30).unwrap();
        assert!((top - 36.65).abs() < 0.01, "{top}");
        assert!((top - 36.0).abs() / 36.0 < 0.02);
        let bottom = p.torque_linear(p.x_min, deg30).unwrap();
        assert!((bottom - 3.14).abs() < 0.01, "{bottom}");
        assert!(p.torque_linear(0.05, 2.0).is_err());
    }

    #[test]
    fn reaction_force_examples() {
        let p = wide();
        assert_eq!(p.reaction_force(0.05, 0.0).unwrap(), 0.0);
        assert!((p.reaction_force(0.050, 0.349).unwrap() - 116.93).abs() < 0.01);
        assert!((p.reaction_force(0.063072, 0.349).unwrap() - 366.0).abs() < 0.5);
    }

    #[test]
    fn invert_examples() {
        let p = MechanismParams::default();
        assert_relative_eq!(p.invert_stiffness(24.0).unwrap(), 0.05, max_relative = 1e-12);
        for k in [6.0, 70.0, 33.3] {
            let x = p.invert_stiffness(k).unwrap();
            assert_relative_eq!(x, bisect_stiffness(&p, k), max_relative = 1e-12);
        }
        assert!((p.invert_stiffness(6.0).unwrap() - 0.0333333).abs() < 1e-7);
        assert!((p.invert_stiffness(70.0).unwrap() - 0.063072).abs() < 5e-6);
        match p.invert_stiffness(100.0) {
            Err(Error::Unreachable { min, max, .. }) => {
                assert_relative_eq!(min, 6.0, max_relative = 1e-9);
                assert_relative_eq!(max, 70.0, max_relative = 1e-9);
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn detent_geometry() {
        let p = MechanismParams::default();
        let xs = p.detent_positions();
        assert_eq!(xs.len(), 10);
        assert!((p.detent_pitch() - 3.304e-3).abs() < 1e-6);
        assert_relative_eq!(p.stiffness(xs[0]).unwrap(), 6.0, max_relative = 1e-9);
        assert_relative_eq!(p.stiffness(xs[9]).unwrap(), 70.0, max_relative = 1e-9);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));

        let two = MechanismParams {
            n_detents: 2,
            tooth_clearance: 0.001,
            ..p.clone()
        };
        assert_eq!(two.detent_positions(), vec![p.x_min, p.x_max]);
    }

    #[test]
    fn validation_names_fields() {
        let bad = MechanismParams {
            disengage_force: 9.0,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().field(), Some("engage_force"));
        let bad = MechanismParams {
            tooth_clearance: 0.004,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().field(), Some("tooth_clearance"));
        let bad = MechanismParams {
            x_max: 0.2,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().field(), Some("x_max"));
    }

    #[test]
    fn derivative_matches_finite_differences_everywhere() {
        let p = MechanismParams::default();
        for i in 0..100 {
            let x = p.x_min + (p.x_max - p.x_min) * i as f64 / 99.0;
            let analytic = p.stiffness_derivative(x).unwrap();
            assert_relative_eq!(analytic, central_difference(&p, x), max_relative = 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn stiffness_is_strictly_increasing(a in 0.0f64..1.0, b in 0.0f64..1.0) {
                prop_assume!((a - b).abs() > 1e-9);
                let p = MechanismParams::default();
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let xa = p.x_min + lo * (p.x_max - p.x_min);
                let xb = p.x_min + hi * (p.x_max - p.x_min);
                prop_assert!(p.stiffness(xa).unwrap() < p.stiffness(xb).unwrap());
            }

            #[test]
            fn inversion_round_trips(s in 0.0f64..=1.0) {
                let p = MechanismParams::default();
                let x = p.x_min + s * (p.x_max - p.x_min);
                let back = p.invert_stiffness(p.stiffness(x).unwrap()).unwrap();
                prop_assert!(((back - x) / x).abs() < 1e-9);
            }

            #[test]
            fn reaction_force_nonnegative(s in 0.0f64..=1.0, theta in -1.5f64..1.5) {
                let p = MechanismParams::default();
                let x = p.x_min + s * (p.x_max - p.x_min);
                let f = p.reaction_force(x, theta).unwrap();
                prop_assert!(f >= 0.0);
                prop_assert_eq!(f == 0.0, theta == 0.0);
            }

            #[test]
            fn torque_is_odd(s in 0.0f64..=1.0, theta in 0.0f64..1.5) {
                let p = MechanismParams::default();
                let x = p.x_min + s * (p.x_max - p.x_min);
                prop_assert_eq!(p.torque_linear(x, theta).unwrap(), -p.torque_linear(x, -theta).unwrap());
            }
        }
    }
}
