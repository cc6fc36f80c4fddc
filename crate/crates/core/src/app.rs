//! The `vss-sim` command line.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use crate::analysis::{
    estimate_torque_trace, shiftable_angle, staircase_metrics, stiffness_range_report, timing_window,
    timing_window_at, StaircaseReport, StiffnessRangeReport, TimingWindow, TIMING_WINDOW_NOTE,
};
use crate::calibration::CalibrationTable;
use crate::config::RunConfigFile;
use crate::error::{Error, Result};
use crate::io;
use crate::scenario;
use crate::server::{self, ServerConfig};
use crate::sim::simulate;
use crate::sweep::{sweep, write_sweep_csv, SweepAxis};

#[derive(Debug, Parser)]
#[command(name = "vss-sim", version, about = "Variable stiffness spring joint simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a run and write trace, events and staircase report.
    Run(RunArgs),
    /// Run a scenario over a grid of mechanism parameters.
    Sweep(SweepArgs),
    /// Timing-window and stiffness tables, or metrics of a recorded trace.
    Analyze(AnalyzeArgs),
    /// Serve a live session over WebSocket or newline-delimited JSON.
    Serve(ServeArgs),
    /// Write a synthetic calibration table.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct Source {
    /// Run configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in scenario, used instead of --config.
    #[arg(long, conflicts_with = "config")]
    pub scenario: Option<String>,
}

impl Source {
    fn load(&self) -> Result<RunConfigFile> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => RunConfigFile::load(path),
            (None, Some(name)) => scenario::by_name(name)
                .map(RunConfigFile::from_sim)
                .ok_or_else(|| Error::config("scenario", format!("unknown scenario {name:?}"))),
            (None, None) => Ok(RunConfigFile::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Output directory; overrides the one in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave out the timestamped comment line of the trace CSV.
    #[arg(long)]
    pub no_meta: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
    /// Swept parameter, `NAME=v1,v2,...` or `NAME=start:stop:count`. Repeatable.
    #[arg(long = "param", required = true)]
    pub params: Vec<String>,
    /// Directory for `sweep.csv`; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run configuration JSON providing the mechanism parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trace CSV to summarise.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Event log of the trace; defaults to `events.jsonl` beside it if present.
    #[arg(long, requires = "trace")]
    pub events: Option<PathBuf>,
    /// Calibration CSV for torque estimation of the trace.
    #[arg(long, requires = "trace")]
    pub calibration: Option<PathBuf>,
    /// Force ratios for the timing-window table.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 0.01, 0.04, 0.25, 1.0])]
    pub q: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Directory for `analysis.json` and plot-ready CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 50.0)]
    pub tick_hz: f64,
    /// Simulated seconds per wall second.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Knot spacing, degrees.
    #[arg(long, default_value_t = 1.0)]
    pub step_deg: f64,
    /// Largest deflection tabulated, degrees.
    #[arg(long, default_value_t = 30.0)]
    pub span_deg: f64,
    /// Output CSV file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        "addr_in_use" => 3,
        "config" => 2,
        _ => 1,
    }
}

/// Error report printed on standard error.
pub fn error_json(err: &Error) -> String {
    let mut obj = serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
    });
    if let Some(field) = err.field() {
        obj["field"] = field.into();
    }
    obj.to_string()
}

/// Writes a line to standard output; a closed pipe is not an error.
fn print_out(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Analyze(args) => analyze(args),
        Command::Serve(args) => serve(args),
        Command::Calibrate(args) => calibrate(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let file = args.source.load()?;
    let config = file.sim_config();
    let trace = simulate(&config)?;
    let report = staircase_metrics(&trace);
    let [trace_path, events_path, report_path] = file.output.resolve(args.out.as_deref());
    let meta = (!args.no_meta).then(io::meta_line);
    io::write_trace_csv(&trace, io::create(&trace_path)?, meta.as_deref())?;
    io::write_events_jsonl(&trace.events, io::create(&events_path)?)?;
    io::write_json(&report, io::create(&report_path)?)?;
    info!(
        "wrote {}, {}, {}",
        trace_path.display(),
        events_path.display(),
        report_path.display()
    );
    print_out(&report.to_text())?;
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let file = args.source.load()?;
    let axes = args
        .params
        .iter()
        .map(|p| SweepAxis::parse(p))
        .collect::<Result<Vec<_>>>()?;
    let rows = sweep(&file.sim_config(), &axes)?;
    match args.out {
        Some(dir) => write_sweep_csv(&rows, &axes, io::create(&dir.join("sweep.csv"))?),
        None => write_sweep_csv(&rows, &axes, std::io::stdout().lock()),
    }
}

#[derive(Debug, Serialize)]
struct DetentWindow {
    detent: usize,
    x: f64,
    reaction_force_peak: f64,
    window: TimingWindow,
    shiftable_angle: f64,
}

#[derive(Debug, Serialize)]
struct TimingReport {
    note: &'static str,
    by_ratio: Vec<TimingWindow>,
    theta_max: f64,
    by_detent: Vec<DetentWindow>,
}

#[derive(Debug, Serialize)]
struct Analysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_window: Option<TimingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stiffness: Option<StiffnessRangeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    staircase: Option<StaircaseReport>,
}

fn timing_report(file: &RunConfigFile, ratios: &[f64]) -> Result<TimingReport> {
    let params = &file.params;
    let theta_max = file.profile.theta_max;
    let by_ratio = ratios.iter().map(|&q| timing_window(q)).collect::<Result<Vec<_>>>()?;
    let by_detent = params
        .detent_positions()
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            Ok(DetentWindow {
                detent: i + 1,
                x,
                reaction_force_peak: params.reaction_force(x, theta_max)?,
                window: timing_window_at(params, x, theta_max)?,
                shiftable_angle: shiftable_angle(params, x, params.max_cable_force)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimingReport {
        note: TIMING_WINDOW_NOTE,
        by_ratio,
        theta_max,
        by_detent,
    })
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    let mut analysis = Analysis {
        timing_window: None,
        stiffness: None,
        staircase: None,
    };
    let mut estimate = None;
    if let Some(trace_path) = &args.trace {
        let events = args.events.clone().or_else(|| {
            let sibling = trace_path.with_file_name("events.jsonl");
            sibling.exists().then_some(sibling)
        });
        let trace = io::load_trace(trace_path, events.as_deref(), file.params.clone())?;
        if let Some(cal) = &args.calibration {
            let table = CalibrationTable::read_csv(std::fs::File::open(cal)?)?;
            estimate = Some((estimate_torque_trace(&trace, &table)?, trace.clone()));
        }
        analysis.staircase = Some(staircase_metrics(&trace));
    } else {
        analysis.timing_window = Some(timing_report(&file, &args.q)?);
        analysis.stiffness = Some(stiffness_range_report(&file.params)?);
    }

    match args.format {
        Format::Json => print_out(&serde_json::to_string_pretty(&analysis)?)?,
        Format::Text => print_out(&analysis_text(&analysis))?,
    }

    if let Some(dir) = &args.out {
        io::write_json(&analysis, io::create(&dir.join("analysis.json"))?)?;
        if analysis.timing_window.is_some() {
            write_plot_csvs(dir, &file)?;
        }
        if let Some((tau_hat, trace)) = estimate {
            let mut w = csv::Writer::from_writer(io::create(&dir.join("torque_estimate.csv"))?);
            w.write_record(["t", "detent", "theta", "tau_model", "tau_estimated"])?;
            for (s, e) in trace.samples.iter().zip(tau_hat) {
                w.write_record([
                    s.t.to_string(),
                    s.detent.to_string(),
                    s.theta.to_string(),
                    s.tau.to_string(),
                    e.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn write_plot_csvs(dir: &Path, file: &RunConfigFile) -> Result<()> {
    let mut w = csv::Writer::from_writer(io::create(&dir.join("timing_window.csv"))?);
    w.write_record(["q", "bound_fraction", "exact_fraction"])?;
    for i in 0..=200 {
        let tw = timing_window(i as f64 / 200.0)?;
        w.write_record([tw.q, tw.bound_fraction, tw.exact_fraction].map(|v| v.to_string()))?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(io::create(&dir.join("stiffness.csv"))?);
    w.write_record(["detent", "x", "k", "torque_30deg"])?;
    for r in stiffness_range_report(&file.params)?.rows {
        w.write_record([r.detent.to_string(), r.x.to_string(), r.k.to_string(), r.torque_30deg.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn analysis_text(a: &Analysis) -> String {
    let mut parts = Vec::new();
    if let Some(tw) = &a.timing_window {
        let mut s = format!("{:>10} {:>10} {:>10}\n", "q", "bound", "exact");
        for w in &tw.by_ratio {
            s += &format!("{:>10.4e} {:>10.4} {:>10.4}\n", w.q, w.bound_fraction, w.exact_fraction);
        }
        s += &format!(
            "\nper detent at theta_max = {:.2} deg\n{:>6} {:>9} {:>8} {:>8} {:>8} {:>12}\n",
            tw.theta_max.to_degrees(),
            "detent",
            "F_max [N]",
            "q",
            "bound",
            "exact",
            "theta_w [deg]"
        );
        for d in &tw.by_detent {
            s += &format!(
                "{:>6} {:>9.1} {:>8.4} {:>8.4} {:>8.4} {:>12.2}\n",
                d.detent,
                d.reaction_force_peak,
                d.window.q,
                d.window.bound_fraction,
                d.window.exact_fraction,
                d.shiftable_angle.to_degrees()
            );
        }
        s += &format!("note: {}", tw.note);
        parts.push(s);
    }
    if let Some(st) = &a.stiffness {
        parts.push(st.to_string());
    }
    if let Some(sc) = &a.staircase {
        parts.push(sc.to_text());
    }
    parts.join("\n\n")
}

fn serve(args: ServeArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    let mut config = ServerConfig::new(SocketAddr::new(args.host, args.port), file.sim_config());
    config.tick_hz = args.tick_hz;
    if !(args.speed.is_finite() && args.speed > 0.0) {
        return Err(Error::config("speed", "must be finite and > 0"));
    }
    config.speed = args.speed;
    let handle = server::start(config)?;
    eprintln!("serving on {}", handle.local_addr());
    handle.wait()
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => RunConfigFile::load(path)?,
        None => RunConfigFile::default(),
    };
    let table = CalibrationTable::synthetic(
        &file.params,
        args.step_deg.to_radians(),
        args.span_deg.to_radians(),
    )?;
    match args.out {
        Some(path) => table.write_csv(io::create(&path)?),
        None => table.write_csv(std::io::stdout().lock()),
    }
}
