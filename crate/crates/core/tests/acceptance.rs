//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::cell::Cell;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use vss_sim::analysis::timing_window;
use vss_sim::mechanism::{PROTOTYPE_K_MAX, PROTOTYPE_K_MIN};
use vss_sim::scenario::replication;
use vss_sim::{
    staircase_metrics, EventKind, MechanismParams, MotionProfile, PawlMode, ShiftCommand, ShiftDirection,
    SimConfig,
};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "stiffness range",
            limit: Some(Duration::from_secs(1)),
            check: stiffness_range,
        },
        Criterion {
            name: "torque endpoints",
            limit: Some(Duration::from_secs(1)),
            check: torque_endpoints,
        },
        Criterion {
            name: "midpoint identity",
            limit: None,
            check: midpoint_identity,
        },
        Criterion {
            name: "timing window",
            limit: Some(Duration::from_secs(5)),
            check: timing_window_oracle,
        },
        Criterion {
            name: "replication scenario",
            limit: Some(Duration::from_secs(5)),
            check: replication_scenario,
        },
        Criterion {
            name: "ratchet safety",
            limit: Some(Duration::from_secs(120)),
            check: ratchet_safety,
        },
        Criterion {
            name: "determinism",
            limit: None,
            check: determinism,
        },
        Criterion {
            name: "step-size robustness",
            limit: None,
            check: step_size_robustness,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let mut outcome = (c.check)();
        let elapsed = started.elapsed();
        if let (Ok(detail), Some(limit)) = (&outcome, c.limit) {
            if elapsed > limit {
                outcome = Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS {} ({elapsed:.2?}): {detail}", c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} ({elapsed:.2?}): {detail}", c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn stiffness_range() -> Outcome {
    let p = MechanismParams::default();
    let k1 = p.stiffness(p.detent_position(1)).map_err(|e| e.to_string())?;
    let k10 = p.stiffness(p.detent_position(p.n_detents)).map_err(|e| e.to_string())?;
    ensure(
        rel(k1, PROTOTYPE_K_MIN) <= 0.01 && rel(k10, PROTOTYPE_K_MAX) <= 0.01,
        format!("k(detent 1) = {k1:.4} Nm/rad, k(detent 10) = {k10:.4} Nm/rad"),
    )
}

fn torque_endpoints() -> Outcome {
    let p = MechanismParams::default();
    let theta = 30f64.to_radians();
    let lo = p.torque_linear(p.detent_position(1), theta).map_err(|e| e.to_string())?;
    let hi = p
        .torque_linear(p.detent_position(p.n_detents), theta)
        .map_err(|e| e.to_string())?;
    ensure(
        rel(lo, 3.0) <= 0.05 && rel(hi, 36.0) <= 0.05,
        format!("tau(30 deg) = {lo:.3} Nm at detent 1, {hi:.3} Nm at detent 10"),
    )
}

fn midpoint_identity() -> Outcome {
    let p = MechanismParams::default();
    let mid = 0.5 * (p.spring_link + p.shaft_link);
    let k = p.stiffness(mid).map_err(|e| e.to_string())?;
    let err = rel(k, p.torsion_stiffness);
    ensure(err <= 1e-12, format!("k((l + d)/2) = {k}, relative error {err:.1e}"))
}

/// Fraction of a period spent inside the contiguous window about one
/// equilibrium crossing where `sin^2(wt) <= q`, from a scan with
/// `samples` points per period.
fn scanned_window(q: f64, samples: usize) -> f64 {
    let h = 1.0 / samples as f64;
    let g = |s: f64| (2.0 * PI * s).sin().powi(2) - q;
    // The window is symmetric about the crossing at s = 0 and bounded by the
    // neighbouring peaks at s = +-1/4.
    let quarter = samples / 4;
    let mut prev = 0.0;
    for i in 1..=quarter {
        let s = i as f64 * h;
        if g(s) > 0.0 {
            let edge = prev + h * (-g(prev)) / (g(s) - g(prev));
            return 2.0 * edge;
        }
        prev = s;
    }
    0.5
}

fn timing_window_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for q in [1e-4, 0.01, 0.04, 0.25, 1.0] {
        let w = timing_window(q).map_err(|e| e.to_string())?;
        let scan = scanned_window(q, 1_000_000);
        let err = (w.exact_fraction - scan).abs();
        worst = worst.max(err);
        if w.exact_fraction > w.bound_fraction {
            return Err(format!("exact {} above bound {} at q = {q}", w.exact_fraction, w.bound_fraction));
        }
        details.push(format!("q={q}: {:.6}", w.exact_fraction));
    }
    for i in 0..=10_000 {
        let q = i as f64 / 10_000.0;
        let w = timing_window(q).map_err(|e| e.to_string())?;
        if w.exact_fraction > w.bound_fraction {
            return Err(format!("exact {} above bound {} at q = {q}", w.exact_fraction, w.bound_fraction));
        }
    }
    ensure(
        worst <= 1e-6,
        format!("{}; max |exact - scan| = {worst:.1e}; exact <= bound on [0, 1]", details.join(", ")),
    )
}

fn replication_scenario() -> Outcome {
    let config = replication();
    let trace = vss_sim::simulate(&config).map_err(|e| e.to_string())?;
    let report = staircase_metrics(&trace);
    let p = &trace.params;

    let expected: Vec<usize> = (1..=10).chain((1..10).rev()).collect();
    if report.detent_sequence != expected {
        return Err(format!("(a) detent sequence {:?}", report.detent_sequence));
    }
    let k_max = p.stiffness(p.detent_position(p.n_detents)).map_err(|e| e.to_string())?;
    let predicted = k_max * config.profile.theta_max;
    let peak = report.peak_torque(p.n_detents).ok_or("(b) no dwell at detent 10")?;
    let ratio = peak / predicted;
    if !(0.95..=1.05).contains(&ratio) {
        return Err(format!("(b) peak {peak:.3} Nm = {ratio:.4} x k_max theta_max"));
    }
    let float = report.max_float.ok_or("(c) no settled samples")?;
    if float > p.tooth_clearance {
        return Err(format!("(c) float {:.3} mm", float * 1e3));
    }
    let half = config.profile.period() / 2.0;
    let ups: Vec<_> = report
        .latencies
        .iter()
        .filter(|l| l.direction == ShiftDirection::Up)
        .collect();
    let worst_up = ups
        .iter()
        .map(|l| l.latency.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    if ups.is_empty() || worst_up > half {
        return Err(format!("(d) worst up latency {worst_up:.3} s, T/2 = {half:.3} s"));
    }
    Ok(format!(
        "1->10->1; peak {peak:.2} Nm = {ratio:.4} x {predicted:.2} Nm; float {:.3} mm <= {:.1} mm; \
         worst of {} up latencies {worst_up:.3} s <= T/2 = {half:.3} s",
        float * 1e3,
        p.tooth_clearance * 1e3,
        ups.len()
    ))
}

fn fuzz_config() -> impl Strategy<Value = SimConfig> {
    let click = (0.0f64..30.0, any::<bool>()).prop_map(|(t, up)| {
        if up {
            ShiftCommand::up(t)
        } else {
            ShiftCommand::down(t)
        }
    });
    (
        prop::collection::vec(click, 0..40),
        1usize..=10,
        2.0f64..35.0,
        0.3f64..2.0,
        0.0f64..2.0 * PI,
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

fn ratchet_safety() -> Outcome {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let runs = Cell::new(0usize);
    let clicks = Cell::new(0usize);
    let result = runner.run(&fuzz_config(), |config| {
        runs.set(runs.get() + 1);
        clicks.set(clicks.get() + config.schedule.len());
        let trace = vss_sim::simulate(&config).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let f_max = trace.params.max_cable_force;
        for pair in trace.samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let engaged_throughout = a.mode == PawlMode::Engaged
                && b.mode == PawlMode::Engaged
                && !b.events.contains(&EventKind::PawlDisengage);
            if engaged_throughout && b.detent < a.detent {
                return Err(TestCaseError::fail(format!("engaged detent fell at t = {}", b.t)));
            }
        }
        let tensions = trace
            .samples
            .iter()
            .map(|s| (s.t, s.tension))
            .chain(trace.events.iter().map(|e| (e.t, e.tension)));
        for (t, f) in tensions {
            if !(0.0..=f_max).contains(&f) {
                return Err(TestCaseError::fail(format!("tension {f} at t = {t}")));
            }
        }
        Ok(())
    });
    match result {
        Ok(()) => Ok(format!(
            "{} runs x 30 s, {} clicks: detent never fell while engaged, tension in [0, f_max]",
            runs.get(),
            clicks.get()
        )),
        Err(e) => Err(e.to_string()),
    }
}

fn run_cli(dir: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_vss-sim"))
        .args(["run", "--scenario", "replication", "--no-meta", "--out"])
        .arg(dir)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("vss-sim run exited with {status}"))
    }
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(a.path())?;
    run_cli(b.path())?;
    let mut bytes = 0;
    for name in ["trace.csv", "events.jsonl", "report.json"] {
        let x = std::fs::read(a.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
        bytes += x.len();
    }
    Ok(format!("trace.csv, events.jsonl, report.json identical ({bytes} bytes)"))
}

fn step_size_robustness() -> Outcome {
    let coarse = vss_sim::simulate(&replication()).map_err(|e| e.to_string())?;
    let fine = vss_sim::simulate(&SimConfig {
        dt: 5e-4,
        ..replication()
    })
    .map_err(|e| e.to_string())?;
    if coarse.events.len() != fine.events.len() {
        return Err(format!("{} events at 1 ms, {} at 0.5 ms", coarse.events.len(), fine.events.len()));
    }
    let mut worst = 0.0f64;
    for (a, b) in coarse.events.iter().zip(&fine.events) {
        if a.kind != b.kind {
            return Err(format!("{:?} at 1 ms vs {:?} at 0.5 ms near t = {}", a.kind, b.kind, a.t));
        }
        worst = worst.max((a.t - b.t).abs());
    }
    ensure(
        worst < 1e-4,
        format!("{} events, max timestamp difference {worst:.1e} s", coarse.events.len()),
    )
}
