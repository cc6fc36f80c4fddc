//! Stiffness and 30-degree torque at every detent of the default mechanism.
//!
//! ```text
//! cargo run --example stiffness_range
//! ```

use vss_sim::analysis::stiffness_range_report;
use vss_sim::MechanismParams;

fn main() -> vss_sim::Result<()> {
    let params = MechanismParams::default();
    println!(
        "pivot travel {:.4} .. {:.4} m, pitch {:.3} mm",
        params.x_min,
        params.x_max,
        params.detent_pitch() * 1e3
    );
    println!("{}", stiffness_range_report(&params)?);

    // The stiffness law is invertible, so a target stiffness maps back to a
    // pivot position.
    for k in [6.0, 24.0, 70.0] {
        println!("k = {k:>4} Nm/rad at x = {:.5} m", params.invert_stiffness(k)?);
    }
    Ok(())
}
