//! Trajectory-level properties of the hybrid simulation.

use proptest::prelude::*;
use vss_sim::analysis::{shiftable_angle, staircase_metrics};
use vss_sim::live::{run_interactive, InteractiveOptions, Pacing, SessionCommand, SessionInput};
use vss_sim::scenario::replication;
use vss_sim::{
    EventKind, MechanismParams, MotionProfile, PawlMode, ShiftCommand, SimConfig,
    Trace,
};

fn random_config() -> impl Strategy<Value = SimConfig> {
    let click = (0.2f64..29.5, any::<bool>()).prop_map(|(t, up)| {
        // Commands land on the 1 ms grid so dt = 1 ms and 0.5 ms see them at
        // the same instant.
        let t = (t * 1000.0).round() / 1000.0;
        if up {
            ShiftCommand::up(t)
        } else {
            ShiftCommand::down(t)
        }
    });
    (
        prop::collection::vec(click, 0..25),
        1usize..=10,
        5.0f64..30.0,
        0.4f64..1.5,
        0.0f64..std::f64::consts::TAU,
    )
        .prop_map(|(mut schedule, start, amp_deg, hz, phase)| {
            schedule.sort_by(|a, b| a.t.total_cmp(&b.t));
            let mut profile = MotionProfile::from_frequency(amp_deg.to_radians(), hz);
            profile.phase = phase;
            SimConfig {
                profile,
                schedule,
                duration: 30.0,
                initial_shifter_index: start,
                ..Default::default()
            }
        })
}

/// Pawl mode in force just before each event, reconstructed from the log.
fn modes_before(trace: &Trace) -> Vec<PawlMode> {
    let mut mode = trace.samples[0].mode;
    trace
        .events
        .iter()
        .map(|e| {
            let before = mode;
            match e.kind {
                EventKind::PawlEngage => mode = PawlMode::Engaged,
                EventKind::PawlDisengage => mode = PawlMode::Disengaged,
                _ => {}
            }
            before
        })
        .collect()
}

fn check_ratchet_and_cable(trace: &Trace) -> Result<(), TestCaseError> {
    let p = &trace.params;
    for pair in trace.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.mode == PawlMode::Engaged && b.mode == PawlMode::Engaged && !b.events.contains(&EventKind::PawlDisengage) {
            prop_assert!(b.detent >= a.detent, "engaged detent fell at t = {}", b.t);
        }
    }
    for s in &trace.samples {
        prop_assert!(s.tension >= 0.0 && s.tension <= p.max_cable_force, "tension {} at t = {}", s.tension, s.t);
    }
    for e in &trace.events {
        prop_assert!(e.tension >= 0.0 && e.tension <= p.max_cable_force);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ratchet_safety_and_unilateral_cable(config in random_config()) {
        let trace = vss_sim::simulate(&config).unwrap();
        check_ratchet_and_cable(&trace)?;
    }

    #[test]
    fn drops_happen_only_with_pawl_lifted_and_spring_loaded(config in random_config()) {
        let trace = vss_sim::simulate(&config).unwrap();
        let p = &trace.params;
        for (e, mode) in trace.events.iter().zip(modes_before(&trace)) {
            if e.kind == EventKind::DetentDrop {
                prop_assert_eq!(mode, PawlMode::Disengaged);
                prop_assert!(p.reaction_force(e.x, e.theta).unwrap() > 0.0, "drop with theta = 0 at t = {}", e.t);
            }
        }
    }

    #[test]
    fn advances_respect_the_shift_condition(config in random_config()) {
        let trace = vss_sim::simulate(&config).unwrap();
        let p = &trace.params;
        for e in trace.events_of(EventKind::DetentAdvance) {
            let window = shiftable_angle(p, e.x.min(p.x_max), e.tension).unwrap();
            prop_assert!(e.theta.abs() <= window + 1e-3, "advance at t = {} outside the shiftable window", e.t);
        }
    }

    #[test]
    fn pawl_mode_alternates_without_chatter(config in random_config()) {
        let trace = vss_sim::simulate(&config).unwrap();
        let p = &trace.params;
        let mut mode = trace.samples[0].mode;
        for e in &trace.events {
            match e.kind {
                EventKind::PawlEngage => {
                    prop_assert_eq!(mode, PawlMode::Disengaged);
                    prop_assert!(e.tension >= p.engage_force - 1e-6);
                    mode = PawlMode::Engaged;
                }
                EventKind::PawlDisengage => {
                    prop_assert_eq!(mode, PawlMode::Engaged);
                    prop_assert!(e.tension <= p.disengage_force + 1e-6);
                    mode = PawlMode::Disengaged;
                }
                _ => {}
            }
        }
    }

    #[test]
    fn settled_float_stays_within_clearance(config in random_config()) {
        let trace = vss_sim::simulate(&config).unwrap();
        if let Some(float) = staircase_metrics(&trace).max_float {
            prop_assert!(float <= trace.params.tooth_clearance + 1e-9, "float {float}");
        }
    }

    #[test]
    fn deterministic_replay(config in random_config()) {
        let a = vss_sim::simulate(&config).unwrap();
        let b = vss_sim::simulate(&config).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn halving_dt_keeps_event_times(config in random_config()) {
        let coarse = vss_sim::simulate(&config).unwrap();
        let fine = vss_sim::simulate(&SimConfig { dt: config.dt / 2.0, ..config.clone() }).unwrap();
        let kinds = |t: &Trace| t.events.iter().map(|e| e.kind).collect::<Vec<_>>();
        prop_assert_eq!(kinds(&coarse), kinds(&fine));
        for (a, b) in coarse.events.iter().zip(&fine.events) {
            prop_assert!((a.t - b.t).abs() < 1e-4, "{:?} at {} vs {}", a.kind, a.t, b.t);
        }
    }

    /// A single up-click from a settled detent is realised within half a
    /// period, whatever the phase of the swing.
    #[test]
    fn deferred_shift_within_half_period(
        start in 1usize..10,
        t_click in 1.0f64..3.0,
        amp_deg in 5.0f64..25.0,
        hz in 0.4f64..1.0,
    ) {
        let profile = MotionProfile::from_frequency(amp_deg.to_radians(), hz);
        let (shift, advance) = single_click_latency(profile, start, t_click);
        prop_assert!(advance - shift <= profile.period() / 2.0, "latency {}", advance - shift);
    }

    /// Over the whole range the shift is realised no later than the first
    /// equilibrium crossing at or after half a period.
    #[test]
    fn deferred_shift_by_following_crossing(
        start in 1usize..10,
        t_click in 1.0f64..3.0,
        amp_deg in 5.0f64..30.0,
        hz in 0.4f64..1.5,
    ) {
        let profile = MotionProfile::from_frequency(amp_deg.to_radians(), hz);
        let (shift, advance) = single_click_latency(profile, start, t_click);
        let half = profile.period() / 2.0;
        prop_assert!(advance <= (shift + half).max(next_crossing(&profile, shift + half)) + 1e-9);
    }

    #[test]
    fn interactive_feed_matches_batch_schedule(config in random_config()) {
        let batch = vss_sim::simulate(&config).unwrap();
        let (tx, rx) = std::sync::mpsc::channel();
        let mut pending = config.schedule.clone().into_iter().peekable();
        let dt = config.dt;
        let options = InteractiveOptions {
            tick_hz: 1.0 / dt,
            pacing: Pacing::Unpaced,
            stop_after: Some(config.duration),
            start_paused: false,
            record: true,
        };
        let live_config = SimConfig { schedule: Vec::new(), ..config.clone() };
        let live = run_interactive(&live_config, options, rx, |msg| {
            // Feed every command due at this step boundary when its state
            // frame arrives.
            if let vss_sim::protocol::ServerMessage::State(s) = msg {
                while let Some(cmd) = pending.next_if(|c| c.t <= s.t + 1e-9 * dt) {
                    tx.send(SessionInput::Command(SessionCommand::Shift(cmd.direction))).unwrap();
                }
            }
            true
        })
        .unwrap()
        .unwrap();
        prop_assert_eq!(batch.samples.len(), live.samples.len());
        prop_assert_eq!(&batch.events, &live.events);
        prop_assert_eq!(&batch.samples, &live.samples);
    }
}

fn single_click_latency(profile: MotionProfile, start: usize, t_click: f64) -> (f64, f64) {
    let config = SimConfig {
        profile,
        schedule: vec![ShiftCommand::up(t_click)],
        duration: t_click + 2.0 * profile.period(),
        initial_shifter_index: start,
        ..Default::default()
    };
    let trace = vss_sim::simulate(&config).unwrap();
    let shift = trace.events_of(EventKind::ShiftUp).next().unwrap().t;
    let advance = trace
        .events_of(EventKind::DetentAdvance)
        .find(|e| e.t >= shift && e.detent == start + 1)
        .expect("shift realised");
    (shift, advance.t)
}

fn next_crossing(profile: &MotionProfile, t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let k = ((profile.omega * t + profile.phase) / pi).ceil();
    (k * pi - profile.phase) / profile.omega
}

/// When the low-force window around a crossing is shorter than the pivot's
/// travel over one pitch, a click just ahead of the crossing misses it and
/// the shift completes at the next one, slightly beyond half a period.
#[test]
fn short_crossing_window_can_outlast_half_period() {
    let profile = MotionProfile::from_frequency(30f64.to_radians(), 1.5);
    let (shift, advance) = single_click_latency(profile, 9, 1.33);
    let half = profile.period() / 2.0;
    let latency = advance - shift;
    assert!(latency > half, "latency {latency}");
    assert!(latency < 1.01 * half, "latency {latency}");
    assert!(advance <= next_crossing(&profile, shift + half));
}

#[test]
fn engaged_spring_is_conservative_over_a_cycle() {
    // With holding force above the resting tension the pivot never slips,
    // so x and k stay constant and the torque is a linear spring.
    let params = MechanismParams {
        holding_force: 8.0,
        ..Default::default()
    };
    for start in [1, 5, 10] {
        let profile = MotionProfile::from_frequency(25f64.to_radians(), 1.0);
        let trace = vss_sim::simulate(&SimConfig {
            params: params.clone(),
            profile,
            duration: 3.0,
            initial_shifter_index: start,
            ..Default::default()
        })
        .unwrap();
        let per_cycle = (profile.period() / trace.dt).round() as usize;
        let cycle = &trace.samples[..=per_cycle];
        assert!(cycle.iter().all(|s| s.mode == PawlMode::Engaged && s.detent == start));
        assert!(cycle.iter().all(|s| s.x == cycle[0].x));
        let work: f64 = cycle
            .windows(2)
            .map(|w| 0.5 * (w[0].tau + w[1].tau) * (w[1].theta - w[0].theta))
            .sum();
        let scale = cycle.iter().map(|s| s.tau.abs() * s.theta.abs()).fold(0.0, f64::max);
        assert!(work.abs() <= 1e-9 * scale.max(1.0), "detent {start}: work {work}");
    }
}

#[test]
fn replication_is_robust_to_step_size() {
    let coarse = vss_sim::simulate(&replication()).unwrap();
    let fine = vss_sim::simulate(&SimConfig {
        dt: 5e-4,
        ..replication()
    })
    .unwrap();
    assert_eq!(coarse.events.len(), fine.events.len());
    for (a, b) in coarse.events.iter().zip(&fine.events) {
        assert_eq!(a.kind, b.kind);
        assert!((a.t - b.t).abs() < 1e-4);
    }
}

#[test]
fn saturated_clicks_are_refused_not_queued() {
    let trace = vss_sim::simulate(&SimConfig {
        schedule: vec![ShiftCommand::down(0.5), ShiftCommand::up(1.0)],
        duration: 3.0,
        initial_shifter_index: 1,
        ..Default::default()
    })
    .unwrap();
    let kinds: Vec<_> = trace
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::RefusedClick | EventKind::ShiftUp))
        .map(|e| (e.kind, e.detent))
        .collect();
    assert_eq!(kinds, vec![(EventKind::RefusedClick, 1), (EventKind::ShiftUp, 2)]);
    assert_eq!(trace.samples.last().unwrap().detent, 2);
}
