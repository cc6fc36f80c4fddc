//! Built-in scenarios.

use crate::motion::MotionProfile;
use crate::sim::{ShiftCommand, SimConfig};

/// Leg-swing replication: +-20 degrees at 0.8 Hz for 60 s, starting on the
/// softest detent. Ten up-clicks every 1.5 s from t = 2 s, then ten
/// down-clicks every 1.5 s from t = 20 s. The last click of each run hits the
/// end of the shifter and is refused.
pub fn replication() -> SimConfig {
    let mut schedule: Vec<ShiftCommand> = (0..10)
        .map(|i| ShiftCommand::up(2.0 + 1.5 * i as f64))
        .collect();
    schedule.extend((0..10).map(|i| ShiftCommand::down(20.0 + 1.5 * i as f64)));
    SimConfig {
        profile: MotionProfile::from_frequency(20f64.to_radians(), 0.8),
        schedule,
        dt: 1e-3,
        duration: 60.0,
        initial_shifter_index: 1,
        ..Default::default()
    }
}

/// Looks up a scenario by name.
pub fn by_name(name: &str) -> Option<SimConfig> {
    match name {
        "replication" => Some(replication()),
        _ => None,
    }
}
