//! Per-detent torque-angle tables.
//!
//! A table holds one curve per detent, sampled at strictly increasing
//! angles. Lookups interpolate linearly between knots and never extrapolate.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::MechanismParams;

/// Largest torque a curve may show at zero deflection, Nm.
pub const ORIGIN_TOLERANCE: f64 = 0.1;
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    curves: BTreeMap<usize, Vec<(f64, f64)>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    detent: usize,
    angle_rad: f64,
    torque_nm: f64,
}

impl CalibrationTable {
    /// Builds a table from `(angle rad, torque Nm)` curves keyed by detent.
    pub fn new(curves: BTreeMap<usize, Vec<(f64, f64)>>) -> Result<Self> {
        let table = Self { curves };
        table.validate()?;
        Ok(table)
    }

    pub fn detents(&self) -> impl Iterator<Item = usize> + '_ {
        self.curves.keys().copied()
    }

    pub fn curve(&self, detent: usize) -> Option<&[(f64, f64)]> {
        self.curves.get(&detent).map(Vec::as_slice)
    }

    /// Checks knot ordering, the zero crossing of every curve, and that a
    /// higher detent never gives less torque magnitude at the same angle.
    pub fn validate(&self) -> Result<()> {
        for (&detent, curve) in &self.curves {
            if curve.is_empty() {
                return Err(Error::Format(format!("detent {detent}: empty curve")));
            }
            if curve.iter().any(|(a, t)| !a.is_finite() || !t.is_finite()) {
                return Err(Error::Format(format!("detent {detent}: non-finite knot")));
            }
            if curve.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Format(format!(
                    "detent {detent}: angles must be strictly increasing"
                )));
            }
            match interpolate(curve, 0.0) {
                Some(t0) if t0.abs() <= ORIGIN_TOLERANCE => {}
                Some(t0) => {
                    return Err(Error::Format(format!(
                        "detent {detent}: torque at zero angle is {t0} Nm"
                    )))
                }
                None => {
                    return Err(Error::Format(format!(
                        "detent {detent}: curve does not span zero angle"
                    )))
                }
            }
        }
        for ((&lo, softer), (&hi, stiffer)) in self.curves.iter().zip(self.curves.iter().skip(1)) {
            for &(angle, torque) in stiffer {
                if let Some(soft) = interpolate(softer, angle) {
                    if angle.signum() * (torque - soft) < -MONOTONE_SLACK {
                        return Err(Error::Format(format!(
                            "detent {hi} is softer than detent {lo} at {angle} rad"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Torque of `detent` at `theta` by linear interpolation.
    pub fn torque(&self, detent: usize, theta: f64) -> Result<f64> {
        let curve = self
            .curves
            .get(&detent)
            .ok_or_else(|| Error::MissingDetent { missing: vec![detent] })?;
        interpolate(curve, theta).ok_or_else(|| Error::Domain {
            quantity: "calibration angle",
            value: theta,
            min: curve[0].0,
            max: curve[curve.len() - 1].0,
        })
    }

    /// Synthetic table sampled from the linear torque model at every detent,
    /// with knots at multiples of `angle_step` across `[-theta_span, theta_span]`.
    pub fn synthetic(params: &MechanismParams, angle_step: f64, theta_span: f64) -> Result<Self> {
        if !(angle_step.is_finite() && angle_step > 0.0) {
            return Err(Error::Domain {
                quantity: "angle_step",
                value: angle_step,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if !(theta_span.is_finite() && theta_span >= 0.0) {
            return Err(Error::Domain {
                quantity: "theta_span",
                value: theta_span,
                min: 0.0,
                max: crate::mechanism::THETA_GUARD,
            });
        }
        let mut angles = vec![0.0];
        let mut i = 1u32;
        loop {
            let a = f64::from(i) * angle_step;
            if a >= theta_span * (1.0 - 1e-12) {
                break;
            }
            angles.push(a);
            i += 1;
        }
        if theta_span > 0.0 {
            angles.push(theta_span);
        }
        let mut full: Vec<f64> = angles.iter().skip(1).rev().map(|a| -a).collect();
        full.extend_from_slice(&angles);

        let mut curves = BTreeMap::new();
        for (index, x) in params.detent_positions().into_iter().enumerate() {
            let curve = full
                .iter()
                .map(|&a| Ok((a, params.torque_linear(x, a)?)))
                .collect::<Result<Vec<_>>>()?;
            curves.insert(index + 1, curve);
        }
        Self::new(curves)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (&detent, curve) in &self.curves {
            for &(angle_rad, torque_nm) in curve {
                w.serialize(Row {
                    detent,
                    angle_rad,
                    torque_nm,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["detent", "angle_rad", "torque_nm"] {
            return Err(Error::Format(format!(
                "calibration header must be `detent,angle_rad,torque_nm`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut curves: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for row in r.deserialize() {
            let row: Row = row?;
            curves.entry(row.detent).or_default().push((row.angle_rad, row.torque_nm));
        }
        Self::new(curves)
    }
}

fn interpolate(curve: &[(f64, f64)], theta: f64) -> Option<f64> {
    let first = curve.first()?;
    let last = curve.last()?;
    if !(theta >= first.0 && theta <= last.0) {
        return None;
    }
    let i = curve.partition_point(|&(a, _)| a < theta);
    if curve[i].0 == theta {
        return Some(curve[i].1);
    }
    let (a0, t0) = curve[i - 1];
    let (a1, t1) = curve[i];
    Some(t0 + (t1 - t0) * (theta - a0) / (a1 - a0))
}
