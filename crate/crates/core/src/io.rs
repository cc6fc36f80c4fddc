//! Trace CSV, event JSON lines and report files.
//!
//! Trace rows carry the kinds of the events of their step in the `event`
//! column, joined with `|`. The JSON lines file holds the full event records
//! with exact timestamps; when it is missing, events are rebuilt from the CSV
//! with the row time as timestamp.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::MechanismParams;
use crate::ratchet::{Event, EventKind, PawlMode};
use crate::sim::{Trace, TraceSample};

pub const TRACE_HEADER: [&str; 10] = [
    "t", "theta", "theta_dot", "x", "detent", "k", "tau", "tension", "mode", "event",
];

/// Comment line written above the header unless disabled.
pub fn meta_line() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("vss-sim {} generated_unix={secs}", env!("CARGO_PKG_VERSION"))
}

/// Writes `trace` as CSV. `meta`, when given, becomes a leading `#` line.
pub fn write_trace_csv<W: Write>(trace: &Trace, writer: W, meta: Option<&str>) -> Result<()> {
    let mut writer = writer;
    if let Some(meta) = meta {
        writeln!(writer, "# {meta}")?;
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    let mut kinds = String::new();
    for s in &trace.samples {
        kinds.clear();
        for (i, k) in s.events.iter().enumerate() {
            if i > 0 {
                kinds.push('|');
            }
            kinds.push_str(k.as_str());
        }
        w.write_record([
            s.t.to_string(),
            s.theta.to_string(),
            s.theta_dot.to_string(),
            s.x.to_string(),
            s.detent.to_string(),
            s.k.to_string(),
            s.tau.to_string(),
            s.tension.to_string(),
            s.mode.as_str().to_string(),
            kinds.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = record.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Format(format!("line {line}: bad `{}` value {raw:?}", TRACE_HEADER[i])))
}

/// Reads a trace CSV. `events`, when given, replaces the events rebuilt from
/// the `event` column and must agree with it kind for kind.
pub fn read_trace_csv<R: Read>(
    reader: R,
    params: MechanismParams,
    events: Option<Vec<Event>>,
) -> Result<Trace> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::Format(format!(
            "trace header must be `{}`",
            TRACE_HEADER.join(",")
        )));
    }
    let mut samples = Vec::new();
    let mut rebuilt = Vec::new();
    let mut shifter: Option<usize> = None;
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let kinds = record
            .get(9)
            .unwrap_or("")
            .split('|')
            .filter(|k| !k.is_empty())
            .map(str::parse::<EventKind>)
            .collect::<Result<Vec<_>>>()?;
        let sample = TraceSample {
            t: field(&record, 0, line)?,
            theta: field(&record, 1, line)?,
            theta_dot: field(&record, 2, line)?,
            x: field(&record, 3, line)?,
            detent: field(&record, 4, line)?,
            k: field(&record, 5, line)?,
            tau: field(&record, 6, line)?,
            tension: field(&record, 7, line)?,
            mode: field::<PawlMode>(&record, 8, line)?,
            events: kinds,
        };
        let shifter = shifter.get_or_insert(sample.detent);
        // Clicks are applied at the start of the step whose sample lists
        // them; other transitions are known only to lie within the step and
        // are stamped at its end.
        let step_start = samples.last().unwrap_or(&sample);
        for &kind in &sample.events {
            // Click records carry the shifter index, which the CSV only
            // implies; count it from the starting detent.
            let (detent, at) = match kind {
                EventKind::ShiftUp => {
                    *shifter += 1;
                    (*shifter, step_start)
                }
                EventKind::ShiftDown => {
                    *shifter = shifter.saturating_sub(1);
                    (*shifter, step_start)
                }
                EventKind::RefusedClick => (*shifter, step_start),
                _ => (sample.detent, &sample),
            };
            rebuilt.push(Event {
                t: at.t,
                kind,
                detent,
                x: at.x,
                theta: at.theta,
                tension: sample.tension,
            });
        }
        samples.push(sample);
    }
    let events = match events {
        Some(events) => {
            if events.iter().map(|e| e.kind).ne(rebuilt.iter().map(|e| e.kind)) {
                return Err(Error::Format(
                    "event log does not match the trace's event column".into(),
                ));
            }
            events
        }
        None => rebuilt,
    };
    let dt = match samples.as_slice() {
        [a, b, ..] => b.t - a.t,
        _ => 0.0,
    };
    Ok(Trace {
        params,
        dt,
        samples,
        events,
    })
}

pub fn write_events_jsonl<W: Write>(events: &[Event], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_jsonl<R: Read>(reader: R) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str(&line)?);
        }
    }
    Ok(events)
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Loads a trace CSV, with its JSON lines event log when one is given.
pub fn load_trace(
    csv_path: &Path,
    events_path: Option<&Path>,
    params: MechanismParams,
) -> Result<Trace> {
    let events = events_path
        .map(|p| read_events_jsonl(File::open(p)?))
        .transpose()?;
    read_trace_csv(File::open(csv_path)?, params, events)
}
