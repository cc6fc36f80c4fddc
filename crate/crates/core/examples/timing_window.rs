//! How much of each swing is available for shifting.
//!
//! The pivot can only advance while the spring reaction `F(theta, x)` stays
//! below the cable force. For a sinusoidal swing that is a window around
//! each equilibrium crossing whose width depends on `q = f_max / F_peak`.
//!
//! ```text
//! cargo run --example timing_window
//! ```

use vss_sim::analysis::{reaction_force_max, shiftable_angle, timing_window, timing_window_at};
use vss_sim::MechanismParams;

fn main() -> vss_sim::Result<()> {
    println!("{:>8} {:>8} {:>8}", "q", "bound", "exact");
    for q in [1e-4, 0.01, 0.04, 0.25, 1.0] {
        let w = timing_window(q)?;
        println!("{q:>8} {:>8.4} {:>8.4}", w.bound_fraction, w.exact_fraction);
    }

    let params = MechanismParams::default();
    let theta_max = 20f64.to_radians();
    println!("\nswing +-20 deg, f_max = {} N", params.max_cable_force);
    for (i, x) in params.detent_positions().into_iter().enumerate() {
        let w = timing_window_at(&params, x, theta_max)?;
        println!(
            "detent {:>2}: F_peak {:>6.1} N, window {:.3} of T, shiftable below {:.2} deg",
            i + 1,
            reaction_force_max(&params, x, theta_max)?,
            w.exact_fraction,
            shiftable_angle(&params, x, params.max_cable_force)?.to_degrees()
        );
    }
    Ok(())
}
