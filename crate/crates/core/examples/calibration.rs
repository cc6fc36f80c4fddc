//! Torque estimation from a calibration table.
//!
//! A real device would be calibrated on a test bench; here the table is
//! synthesised from the linear model, written to CSV, read back and used to
//! estimate the joint torque along a simulated run.
//!
//! ```text
//! cargo run --release --example calibration
//! ```

use vss_sim::analysis::estimate_torque_trace;
use vss_sim::scenario::replication;
use vss_sim::{simulate, CalibrationTable, MechanismParams};

fn main() -> vss_sim::Result<()> {
    let params = MechanismParams::default();
    let table = CalibrationTable::synthetic(&params, 1f64.to_radians(), 30f64.to_radians())?;

    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let table = CalibrationTable::read_csv(csv.as_slice())?;
    println!("table: {} detents, {} bytes of CSV", table.detents().count(), csv.len());
    println!("detent 10 at 12.5 deg: {:.3} Nm", table.torque(10, 12.5f64.to_radians())?);

    let trace = simulate(&replication())?;
    let estimate = estimate_torque_trace(&trace, &table)?;
    let worst = trace
        .samples
        .iter()
        .zip(&estimate)
        .map(|(s, e)| (s.tau - e).abs())
        .fold(0.0, f64::max);
    // The table is tabulated at the detent positions; the simulated pivot
    // floats above its tooth, which accounts for most of this difference.
    println!("max |model - estimate| over the run: {worst:.3} Nm");
    Ok(())
}
