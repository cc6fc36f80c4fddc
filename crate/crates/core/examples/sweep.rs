//! Sweeping the series spring and cable force limit over the replication
//! run, in parallel.
//!
//! ```text
//! cargo run --release --example sweep
//! ```

use vss_sim::scenario::replication;
use vss_sim::sweep::{sweep, write_sweep_csv, SweepAxis};

fn main() -> vss_sim::Result<()> {
    let axes = vec![SweepAxis::parse("k_s=3000:6000:4")?, SweepAxis::parse("f_max=20,35,50")?];
    let rows = sweep(&replication(), &axes)?;
    for row in &rows {
        let settings: Vec<String> = row.settings.iter().map(|(n, v)| format!("{n}={v}")).collect();
        match &row.error {
            Some(e) => println!("{:<22} error: {e}", settings.join(" ")),
            None => println!(
                "{:<22} top {}, final {}, worst up latency {:.3} s, {} shifts unrealised",
                settings.join(" "),
                row.max_detent.unwrap_or(0),
                row.final_detent.unwrap_or(0),
                row.max_up_latency.unwrap_or(f64::NAN),
                row.unrealized_shifts
            ),
        }
    }
    write_sweep_csv(&rows, &axes, std::io::stdout().lock())
}
