//! The pivot lock on its own: a latched pivot under a constant joint
//! deflection, before and after the cable is pulled.
//!
//! ```text
//! cargo run --example pivot_step
//! ```

use vss_sim::ratchet::{apply_click, pivot_step};
use vss_sim::{ConstantAngle, MechanismParams, PivotState, ShiftDirection};

fn main() -> vss_sim::Result<()> {
    let params = MechanismParams::default();
    let mut state = PivotState::latched(&params, 3)?;
    let dt = 1e-3;

    // With the leg deflected the spring pushes the pivot down onto its tooth;
    // a click tensions the cable but the pivot holds until the load drops.
    let loaded = ConstantAngle(25f64.to_radians());
    let click = apply_click(&mut state, &params, ShiftDirection::Up, 0.0, loaded.0);
    println!("{} at t = 0, cable tension {:.1} N", click.kind.as_str(), click.tension);
    for k in 0..200 {
        let out = pivot_step(&state, &params, &loaded, k as f64 * dt, dt)?;
        state = out.state;
    }
    println!(
        "after 0.2 s at 25 deg: detent {}, x = {:.5} m, reaction {:.1} N",
        state.detent,
        state.x,
        params.reaction_force(state.x, loaded.0)?
    );

    // Near upright the reaction is small enough for the pawl to climb onto
    // the next tooth. At exactly zero deflection the pivot would overshoot
    // the cable end with nothing to push it back, leaving the pawl lifted.
    let upright = ConstantAngle(2f64.to_radians());
    for k in 200..400 {
        let out = pivot_step(&state, &params, &upright, k as f64 * dt, dt)?;
        for e in &out.events {
            println!("t = {:.4} s  {} -> detent {}", e.t, e.kind.as_str(), e.detent);
        }
        state = out.state;
    }
    println!("after release: detent {}, x = {:.5} m", state.detent, state.x);
    Ok(())
}
