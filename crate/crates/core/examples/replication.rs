//! The leg-swing replication run: ten clicks up, ten clicks down, with the
//! staircase metrics printed and the trace written to `target/replication/`.
//!
//! ```text
//! cargo run --release --example replication
//! ```

use std::path::Path;

use vss_sim::scenario::replication;
use vss_sim::{io, simulate, staircase_metrics};

fn main() -> vss_sim::Result<()> {
    let config = replication();
    let trace = simulate(&config)?;
    let report = staircase_metrics(&trace);
    println!("{}", report.to_text());

    let k_max = trace.params.stiffness(trace.params.x_max)?;
    println!(
        "model peak at the top detent: k_max * theta_max = {:.2} Nm",
        k_max * config.profile.theta_max
    );

    let dir = Path::new("target/replication");
    io::write_trace_csv(&trace, io::create(&dir.join("trace.csv"))?, None)?;
    io::write_events_jsonl(&trace.events, io::create(&dir.join("events.jsonl"))?)?;
    println!("wrote {} samples and {} events to {}", trace.samples.len(), trace.events.len(), dir.display());
    Ok(())
}
