//! Parameter sweeps over a simulation.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::staircase_metrics;
use crate::error::{Error, Result};
use crate::mechanism::MechanismParams;
use crate::ratchet::ShiftDirection;
use crate::sim::{simulate, SimConfig};

/// One swept parameter and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    /// Field of [`MechanismParams`], or a short alias such as `f_max`.
    pub name: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Parses `name=v1,v2,...` or `name=start:stop:count`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec
            .split_once('=')
            .ok_or_else(|| Error::config("param", format!("expected NAME=VALUES, got {spec:?}")))?;
        let name = name.trim().to_string();
        field_name(&name)?;
        let bad = |v: &str| Error::config(name.clone(), format!("bad value {v:?}"));
        let values = if let [a, b, n] = rest.split(':').collect::<Vec<_>>()[..] {
            let start: f64 = a.trim().parse().map_err(|_| bad(a))?;
            let stop: f64 = b.trim().parse().map_err(|_| bad(b))?;
            let n: usize = n.trim().parse().map_err(|_| bad(n))?;
            match n {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            }
        } else {
            rest.split(',')
                .map(|v| v.trim().parse().map_err(|_| bad(v)))
                .collect::<Result<Vec<f64>>>()?
        };
        if values.is_empty() {
            return Err(Error::config(name, "no values"));
        }
        Ok(Self { name, values })
    }
}

const ALIASES: &[(&str, &str)] = &[
    ("k_S", "torsion_stiffness"),
    ("l", "spring_link"),
    ("d", "shaft_link"),
    ("m_pivot", "pivot_mass"),
    ("c_pivot", "pivot_damping"),
    ("k_s", "series_stiffness"),
    ("k_p", "parallel_stiffness"),
    ("f_engage", "engage_force"),
    ("f_disengage", "disengage_force"),
    ("f0", "holding_force"),
    ("f_max", "max_cable_force"),
];

const FIELDS: &[&str] = &[
    "torsion_stiffness",
    "spring_link",
    "shaft_link",
    "x_min",
    "x_max",
    "n_detents",
    "tooth_clearance",
    "pivot_mass",
    "pivot_damping",
    "series_stiffness",
    "parallel_stiffness",
    "engage_force",
    "disengage_force",
    "holding_force",
    "max_cable_force",
];

fn field_name(name: &str) -> Result<&'static str> {
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map(|(_, field)| *field)
        .or_else(|| FIELDS.iter().find(|f| **f == name).copied())
        .ok_or_else(|| Error::config(name, "not a mechanism parameter"))
}

/// `base` with one parameter replaced, validated.
pub fn with_param(base: &MechanismParams, name: &str, value: f64) -> Result<MechanismParams> {
    let field = field_name(name)?;
    let mut json = serde_json::to_value(base)?;
    let slot = json
        .get_mut(field)
        .ok_or_else(|| Error::config(name, "not a mechanism parameter"))?;
    *slot = if field == "n_detents" {
        if value.fract() != 0.0 || value < 0.0 {
            return Err(Error::config(name, "must be a whole number"));
        }
        serde_json::json!(value as u64)
    } else {
        serde_json::json!(value)
    };
    let params: MechanismParams = serde_json::from_value(json)?;
    params.validate()?;
    Ok(params)
}

/// Outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub settings: Vec<(String, f64)>,
    pub error: Option<String>,
    pub detent_sequence: Vec<usize>,
    pub max_detent: Option<usize>,
    pub final_detent: Option<usize>,
    pub max_float: Option<f64>,
    pub max_up_latency: Option<f64>,
    pub max_down_latency: Option<f64>,
    pub unrealized_shifts: usize,
    pub refused_clicks: usize,
    pub peak_torque: Option<f64>,
}

/// Runs `base` at every point of the grid spanned by `axes`, in parallel.
/// Rows come back in grid order, first axis slowest.
pub fn sweep(base: &SimConfig, axes: &[SweepAxis]) -> Result<Vec<SweepRow>> {
    for axis in axes {
        field_name(&axis.name)?;
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let points: Vec<Vec<(String, f64)>> = (0..total)
        .map(|mut i| {
            let mut point = vec![(String::new(), 0.0); axes.len()];
            for (slot, axis) in point.iter_mut().zip(axes).rev() {
                let n = axis.values.len();
                *slot = (axis.name.clone(), axis.values[i % n]);
                i /= n;
            }
            point
        })
        .collect();
    Ok(points.into_par_iter().map(|point| run_point(base, point)).collect())
}

fn run_point(base: &SimConfig, settings: Vec<(String, f64)>) -> SweepRow {
    let mut row = SweepRow {
        settings,
        error: None,
        detent_sequence: Vec::new(),
        max_detent: None,
        final_detent: None,
        max_float: None,
        max_up_latency: None,
        max_down_latency: None,
        unrealized_shifts: 0,
        refused_clicks: 0,
        peak_torque: None,
    };
    let outcome = row
        .settings
        .iter()
        .try_fold(base.params.clone(), |p, (name, v)| with_param(&p, name, *v))
        .and_then(|params| {
            simulate(&SimConfig {
                params,
                ..base.clone()
            })
        });
    match outcome {
        Ok(trace) => {
            let report = staircase_metrics(&trace);
            row.max_detent = report.detent_sequence.iter().copied().max();
            row.final_detent = report.detent_sequence.last().copied();
            row.max_float = report.max_float;
            row.max_up_latency = report.max_latency(ShiftDirection::Up);
            row.max_down_latency = report.max_latency(ShiftDirection::Down);
            row.unrealized_shifts = report.latencies.iter().filter(|l| l.latency.is_none()).count();
            row.refused_clicks = report.refused_clicks;
            row.peak_torque = report
                .peak_torque_by_detent
                .iter()
                .map(|p| p.peak_torque)
                .reduce(f64::max);
            row.detent_sequence = report.detent_sequence;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Summary CSV: one column per axis, then the metrics.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], axes: &[SweepAxis], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    header.extend(
        [
            "status",
            "detent_sequence",
            "max_detent",
            "final_detent",
            "max_float_m",
            "max_up_latency_s",
            "max_down_latency_s",
            "unrealized_shifts",
            "refused_clicks",
            "peak_torque_nm",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let opt_u = |v: Option<usize>| v.map_or_else(String::new, |v| v.to_string());
    for row in rows {
        let mut rec: Vec<String> = row.settings.iter().map(|(_, v)| v.to_string()).collect();
        let seq: Vec<String> = row.detent_sequence.iter().map(usize::to_string).collect();
        rec.extend([
            if row.error.is_some() { "error" } else { "ok" }.to_string(),
            seq.join(" "),
            opt_u(row.max_detent),
            opt_u(row.final_detent),
            opt(row.max_float),
            opt(row.max_up_latency),
            opt(row.max_down_latency),
            row.unrealized_shifts.to_string(),
            row.refused_clicks.to_string(),
            opt(row.peak_torque),
            row.error.clone().unwrap_or_default(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
