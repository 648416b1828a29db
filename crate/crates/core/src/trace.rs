//! Gaze trace and telemetry CSV files.
//!
//! A trace has the header `t_ms,x,y` and one sample per row with strictly
//! increasing timestamps. Errors carry the 1-based line number in the file.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autocal::{Autocalibrator, ReadingContext, TelemetryRecord};
use crate::fixation::FixationFilter;
use crate::sim::{SessionTelemetry, UserMode};
use crate::types::{AutocalConfig, GazeSample, Millis, SampleError, ScreenConfig};

pub const TRACE_HEADER: [&str; 3] = ["t_ms", "x", "y"];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected header `t_ms,x,y`, found `{found}`")]
    Header { line: u64, found: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: timestamp {t} does not increase (previous {prev})")]
    NonMonotonic { line: u64, prev: Millis, t: Millis },
    #[error("{0}")]
    Csv(String),
}

impl TraceError {
    /// Line in the input the error refers to, if any.
    pub fn line(&self) -> Option<u64> {
        match self {
            TraceError::Header { line, .. } | TraceError::Row { line, .. } | TraceError::NonMonotonic { line, .. } => {
                Some(*line)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    t_ms: Millis,
    x: f64,
    y: f64,
}

/// Parses a trace. An empty input, or a header alone, yields no samples.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<GazeSample>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut samples: Vec<GazeSample> = Vec::new();
    let mut header_seen = false;
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| match e.position() {
            Some(pos) => TraceError::Row { line: pos.line(), message: e.to_string() },
            None => TraceError::Csv(e.to_string()),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if !header_seen {
            if record.iter().ne(TRACE_HEADER) {
                return Err(TraceError::Header { line, found: record.iter().collect::<Vec<_>>().join(",") });
            }
            header_seen = true;
            continue;
        }
        let row: TraceRow = record
            .deserialize(None)
            .map_err(|e| TraceError::Row { line, message: format!("malformed row: {e}") })?;
        let sample = GazeSample::new(row.t_ms, row.x, row.y)
            .map_err(|e| TraceError::Row { line, message: e.to_string() })?;
        if let Some(prev) = samples.last() {
            if sample.t <= prev.t {
                return Err(TraceError::NonMonotonic { line, prev: prev.t, t: sample.t });
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<GazeSample>, TraceError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io { path: path.display().to_string(), source })?;
    read_trace(std::io::BufReader::new(file))
}

pub fn write_trace<W: Write>(out: W, samples: &[GazeSample]) -> Result<(), TraceError> {
    #[derive(Serialize)]
    struct Row {
        t_ms: Millis,
        x: f64,
        y: f64,
    }
    write_rows(out, samples.iter().map(|s| Row { t_ms: s.t, x: s.x, y: s.y }), &TRACE_HEADER)
}

/// Runs the fixation filter and calibrator over `samples` against a fixed
/// reading context.
pub fn calibrate_trace(
    samples: &[GazeSample],
    cfg: &AutocalConfig,
    screen: &ScreenConfig,
    ctx: &ReadingContext,
) -> Result<Vec<TelemetryRecord>, SampleError> {
    let mut filter = FixationFilter::new(cfg, screen);
    let mut autocal = Autocalibrator::new(*cfg);
    samples
        .iter()
        .map(|&s| {
            let event = filter.push(s)?;
            let cal = autocal.process(&event, ctx);
            Ok(TelemetryRecord::new(&event, &cal))
        })
        .collect()
}

pub const TELEMETRY_HEADER: [&str; 9] =
    ["t_ms", "raw_x", "raw_y", "cal_x", "cal_y", "eps_x", "eps_y", "zone_hit", "updated"];

/// Writes telemetry rows. The header is written even when there are no rows.
pub fn write_telemetry<W: Write>(out: W, records: &[TelemetryRecord]) -> Result<(), TraceError> {
    write_rows(out, records.iter(), &TELEMETRY_HEADER)
}

/// Writes a simulated session log: telemetry columns followed by what the
/// simulated user was doing.
pub fn write_session_log<W: Write>(out: W, log: &[SessionTelemetry]) -> Result<(), TraceError> {
    #[derive(Serialize)]
    struct Row {
        t_ms: Millis,
        raw_x: f64,
        raw_y: f64,
        cal_x: f64,
        cal_y: f64,
        eps_x: f64,
        eps_y: f64,
        zone_hit: bool,
        updated: bool,
        mode: UserMode,
        activation: String,
        intent_x: f64,
        intent_y: f64,
        true_x: f64,
        true_y: f64,
    }
    let rows = log.iter().map(|e| {
        let c = &e.calib;
        Row {
            t_ms: c.t_ms,
            raw_x: c.raw_x,
            raw_y: c.raw_y,
            cal_x: c.cal_x,
            cal_y: c.cal_y,
            eps_x: c.eps_x,
            eps_y: c.eps_y,
            zone_hit: c.zone_hit,
            updated: c.updated,
            mode: e.mode,
            activation: e.activation.map(|l| l.to_string()).unwrap_or_default(),
            intent_x: e.intent_x,
            intent_y: e.intent_y,
            true_x: e.true_x,
            true_y: e.true_y,
        }
    });
    write_rows(out, rows, &SESSION_LOG_HEADER)
}

pub const SESSION_LOG_HEADER: [&str; 15] = [
    "t_ms", "raw_x", "raw_y", "cal_x", "cal_y", "eps_x", "eps_y", "zone_hit", "updated", "mode", "activation",
    "intent_x", "intent_y", "true_x", "true_y",
];

fn write_rows<W: Write, T: Serialize>(
    out: W,
    rows: impl Iterator<Item = T>,
    header: &[&str],
) -> Result<(), TraceError> {
    let csv_err = |e: csv::Error| TraceError::Csv(e.to_string());
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wtr.serialize(row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| TraceError::Csv(e.to_string()))
}
