//! Line-delimited JSON service exposing the live engine.
//!
//! Every message is one JSON object on its own line with a `kind` field.
//! Each connection owns an independent engine; timestamps come from the
//! client, so replaying a client transcript reproduces the server transcript
//! byte for byte. See `PROTOCOL.md` for the schema.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::autocal::{Autocalibrator, ReadingContext, TelemetryRecord};
use crate::config::Settings;
use crate::fixation::FixationFilter;
use crate::keyboard::{DwellPhase, DwellTiming, KeyLabel, KeyboardEngine, KeyboardLayout};
use crate::types::{validate_config, AutocalConfig, GazeSample, Millis, Offset2D, Point, ScreenConfig};

/// Longest accepted message line, in bytes.
pub const MAX_LINE_BYTES: usize = 1 << 20;

const POLL_INTERVAL: Duration = Duration::from_millis(25);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellView {
    pub key: Option<KeyLabel>,
    pub progress: f64,
    pub phase: DwellPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum WireMessage {
    /// Client: opens (or reopens) a session, optionally overriding settings.
    /// Server: acknowledges with the effective settings and key layout.
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        screen: Option<ScreenConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<AutocalConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dwell: Option<DwellTiming>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<KeyboardLayout>,
    },
    Sample {
        t_ms: Millis,
        x: f64,
        y: f64,
    },
    State {
        t_ms: Millis,
        raw_x: f64,
        raw_y: f64,
        cal_x: f64,
        cal_y: f64,
        eps_x: f64,
        eps_y: f64,
        dwell: DwellView,
        text: String,
        zone_hit: bool,
    },
    Activation {
        t_ms: Millis,
        label: KeyLabel,
    },
    Calibration {
        t_ms: Millis,
        eps_x: f64,
        eps_y: f64,
        updated: bool,
    },
    Reset,
    ToggleAutocal {
        enabled: bool,
    },
    SetOffset {
        dx: f64,
        dy: f64,
    },
    Error {
        message: String,
    },
}

impl WireMessage {
    pub fn error(message: impl Into<String>) -> Self {
        WireMessage::Error { message: message.into() }
    }

    /// Serializes to one line without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    /// Parses one line. Failures come back as the ERROR reply to send.
    pub fn parse_line(line: &str) -> Result<Self, WireMessage> {
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| WireMessage::error(format!("malformed message: {e}")))?;
        let kind = match value.get("kind") {
            Some(serde_json::Value::String(k)) => k.clone(),
            Some(_) => return Err(WireMessage::error("field `kind` must be a string")),
            None => return Err(WireMessage::error("missing field `kind`")),
        };
        serde_json::from_value(value).map_err(|e| {
            if KNOWN_KINDS.contains(&kind.as_str()) {
                WireMessage::error(format!("invalid {kind} message: {e}"))
            } else {
                WireMessage::error(format!("unknown kind {kind:?}"))
            }
        })
    }
}

const KNOWN_KINDS: [&str; 9] =
    ["HELLO", "SAMPLE", "STATE", "ACTIVATION", "CALIBRATION", "RESET", "TOGGLE_AUTOCAL", "SET_OFFSET", "ERROR"];

struct Pipeline {
    screen: ScreenConfig,
    autocal_cfg: AutocalConfig,
    filter: FixationFilter,
    autocal: Autocalibrator,
    keyboard: KeyboardEngine,
}

impl Pipeline {
    fn new(screen: ScreenConfig, autocal_cfg: AutocalConfig, dwell: DwellTiming, layout: KeyboardLayout) -> Self {
        Self {
            filter: FixationFilter::new(&autocal_cfg, &screen),
            autocal: Autocalibrator::new(autocal_cfg),
            keyboard: KeyboardEngine::new(layout, dwell),
            screen,
            autocal_cfg,
        }
    }
}

/// One connection's engine: filter, calibrator and keyboard behind the wire
/// protocol.
pub struct Session {
    defaults: Settings,
    layout: KeyboardLayout,
    pipeline: Option<Pipeline>,
    offset: Offset2D,
    autocal_enabled: bool,
    telemetry: Vec<TelemetryRecord>,
}

impl Session {
    pub fn new(defaults: Settings, layout: KeyboardLayout) -> Self {
        Self { defaults, layout, pipeline: None, offset: Offset2D::ZERO, autocal_enabled: true, telemetry: Vec::new() }
    }

    pub fn is_initialized(&self) -> bool {
        self.pipeline.is_some()
    }

    pub fn offset(&self) -> Offset2D {
        self.offset
    }

    pub fn eps(&self) -> Offset2D {
        self.pipeline.as_ref().map_or(Offset2D::ZERO, |p| p.autocal.eps())
    }

    /// Takes the telemetry recorded since the last call.
    pub fn drain_telemetry(&mut self) -> Vec<TelemetryRecord> {
        std::mem::take(&mut self.telemetry)
    }

    /// Handles one raw line and returns the reply lines.
    pub fn handle_line(&mut self, line: &str) -> Vec<WireMessage> {
        match WireMessage::parse_line(line) {
            Ok(msg) => self.handle(msg),
            Err(err) => vec![err],
        }
    }

    pub fn handle(&mut self, msg: WireMessage) -> Vec<WireMessage> {
        match msg {
            WireMessage::Hello { screen, config, dwell, layout } => self.hello(screen, config, dwell, layout),
            WireMessage::Sample { t_ms, x, y } => self.sample(t_ms, x, y),
            WireMessage::Reset => match &mut self.pipeline {
                None => vec![WireMessage::error("not initialized")],
                Some(p) => {
                    let before = p.autocal.eps();
                    *p = Pipeline::new(p.screen, p.autocal_cfg, *p.keyboard.dwell_timing(), self.layout.clone());
                    p.autocal.set_enabled(self.autocal_enabled);
                    let mut out = vec![WireMessage::Reset];
                    if before != Offset2D::ZERO {
                        out.push(WireMessage::Calibration { t_ms: 0, eps_x: 0.0, eps_y: 0.0, updated: false });
                    }
                    out
                }
            },
            WireMessage::ToggleAutocal { enabled } => {
                self.autocal_enabled = enabled;
                if let Some(p) = &mut self.pipeline {
                    p.autocal.set_enabled(enabled);
                }
                vec![WireMessage::ToggleAutocal { enabled }]
            }
            WireMessage::SetOffset { dx, dy } => {
                let o = Offset2D::new(dx, dy);
                if !o.is_finite() {
                    return vec![WireMessage::error("offset must be finite")];
                }
                self.offset = o;
                vec![WireMessage::SetOffset { dx, dy }]
            }
            WireMessage::State { .. }
            | WireMessage::Activation { .. }
            | WireMessage::Calibration { .. }
            | WireMessage::Error { .. } => vec![WireMessage::error("server-only message kind")],
        }
    }

    fn hello(
        &mut self,
        screen: Option<ScreenConfig>,
        config: Option<AutocalConfig>,
        dwell: Option<DwellTiming>,
        layout: Option<KeyboardLayout>,
    ) -> Vec<WireMessage> {
        if layout.is_some() {
            return vec![WireMessage::error("layout is chosen by the server")];
        }
        let (config, screen) = match validate_config(
            config.unwrap_or(self.defaults.autocal),
            screen.unwrap_or(self.defaults.screen),
        ) {
            Ok(v) => v,
            Err(e) => return vec![WireMessage::error(e.to_string())],
        };
        let dwell = dwell.unwrap_or(self.defaults.dwell);
        if dwell.arm_ms < 0 || dwell.dwell_ms <= 0 || dwell.flash_ms < 0 {
            return vec![WireMessage::error("dwell timings must be non-negative with dwell_ms > 0")];
        }
        let mut p = Pipeline::new(screen, config, dwell, self.layout.clone());
        p.autocal.set_enabled(self.autocal_enabled);
        self.pipeline = Some(p);
        vec![WireMessage::Hello {
            screen: Some(screen),
            config: Some(config),
            dwell: Some(dwell),
            layout: Some(self.layout.clone()),
        }]
    }

    fn sample(&mut self, t_ms: Millis, x: f64, y: f64) -> Vec<WireMessage> {
        let Some(p) = &mut self.pipeline else {
            return vec![WireMessage::error("not initialized")];
        };
        // The tracker reports the true gaze shifted by minus the offset.
        let raw = Point::new(x, y).offset_by(-self.offset);
        let sample = match GazeSample::new(t_ms, raw.x, raw.y) {
            Ok(s) => s,
            Err(e) => return vec![WireMessage::error(e.to_string())],
        };
        let event = match p.filter.push(sample) {
            Ok(e) => e,
            Err(e) => return vec![WireMessage::error(e.to_string())],
        };
        let ctx: ReadingContext = p.keyboard.reading_context();
        let before = p.autocal.eps();
        let cal = p.autocal.process(&event, &ctx);
        let act = match p.keyboard.tick(cal.point, t_ms) {
            Ok(a) => a,
            Err(e) => return vec![WireMessage::error(e.to_string())],
        };
        let record = TelemetryRecord::new(&event, &cal);
        self.telemetry.push(record);

        let snap = p.keyboard.snapshot();
        let mut out = vec![WireMessage::State {
            t_ms,
            raw_x: raw.x,
            raw_y: raw.y,
            cal_x: cal.point.x,
            cal_y: cal.point.y,
            eps_x: cal.eps.dx,
            eps_y: cal.eps.dy,
            dwell: DwellView { key: snap.key, progress: snap.progress, phase: snap.phase },
            text: snap.text,
            zone_hit: cal.zone_hit,
        }];
        if let Some(a) = act {
            out.push(WireMessage::Activation { t_ms, label: a.label });
        }
        if cal.updated || cal.eps != before {
            out.push(WireMessage::Calibration { t_ms, eps_x: cal.eps.dx, eps_y: cal.eps.dy, updated: cal.updated });
        }
        out
    }
}

/// Telemetry CSV shared by all connections of a server.
struct TelemetrySink {
    writer: csv::Writer<BufWriter<File>>,
}

#[derive(Serialize)]
struct ServiceTelemetryRow {
    conn: u64,
    t_ms: Millis,
    raw_x: f64,
    raw_y: f64,
    cal_x: f64,
    cal_y: f64,
    eps_x: f64,
    eps_y: f64,
    zone_hit: bool,
    updated: bool,
}

impl TelemetrySink {
    fn create(path: &Path) -> io::Result<Self> {
        Ok(Self { writer: csv::Writer::from_writer(BufWriter::new(File::create(path)?)) })
    }

    fn write(&mut self, conn: u64, records: &[TelemetryRecord]) {
        for r in records {
            let row = ServiceTelemetryRow {
                conn,
                t_ms: r.t_ms,
                raw_x: r.raw_x,
                raw_y: r.raw_y,
                cal_x: r.cal_x,
                cal_y: r.cal_y,
                eps_x: r.eps_x,
                eps_y: r.eps_y,
                zone_hit: r.zone_hit,
                updated: r.updated,
            };
            if let Err(e) = self.writer.serialize(row) {
                tracing::warn!("telemetry write failed: {e}");
                return;
            }
        }
    }

    fn flush(&mut self) {
        if let Err(e) = self.writer.flush() {
            tracing::warn!("telemetry flush failed: {e}");
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub settings: Settings,
    pub layout: KeyboardLayout,
    /// CSV file receiving per-sample telemetry from every connection.
    pub telemetry_path: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { settings: Settings::default(), layout: KeyboardLayout::qwerty(), telemetry_path: None }
    }
}

/// Blocking TCP server with one thread per connection.
pub struct Server {
    listener: TcpListener,
    config: ServerConfig,
    shutdown: Arc<AtomicBool>,
    telemetry: Option<Arc<Mutex<TelemetrySink>>>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, config: ServerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let telemetry = match &config.telemetry_path {
            Some(path) => Some(Arc::new(Mutex::new(TelemetrySink::create(path).map_err(|e| {
                io::Error::new(e.kind(), format!("{}: {e}", path.display()))
            })?))),
            None => None,
        };
        Ok(Self { listener, config, shutdown: Arc::new(AtomicBool::new(false)), telemetry })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Flag that stops the server when set.
    pub fn shutdown_handle(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shutdown)
    }

    /// Serves until the shutdown flag is set, then waits for every
    /// connection to close and flushes telemetry.
    pub fn run(self) -> io::Result<()> {
        let next_id = AtomicU64::new(0);
        let mut workers = Vec::new();
        while !self.shutdown.load(Ordering::SeqCst) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    let id = next_id.fetch_add(1, Ordering::SeqCst);
                    tracing::info!(conn = id, %peer, "client connected");
                    let session = Session::new(self.config.settings, self.config.layout.clone());
                    let shutdown = Arc::clone(&self.shutdown);
                    let telemetry = self.telemetry.clone();
                    workers.push(thread::spawn(move || {
                        if let Err(e) = serve_connection(stream, session, id, &shutdown, telemetry.as_deref()) {
                            tracing::warn!(conn = id, "connection error: {e}");
                        }
                        tracing::info!(conn = id, "client disconnected");
                    }));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL_INTERVAL),
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
            workers.retain(|w| !w.is_finished());
        }
        for w in workers {
            let _ = w.join();
        }
        if let Some(sink) = &self.telemetry {
            sink.lock().expect("telemetry lock").flush();
        }
        tracing::info!("server stopped");
        Ok(())
    }
}

fn serve_connection(
    stream: TcpStream,
    mut session: Session,
    id: u64,
    shutdown: &AtomicBool,
    telemetry: Option<&Mutex<TelemetrySink>>,
) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL_INTERVAL))?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut buf = Vec::new();
    // Set while skipping the rest of an over-long line.
    let mut discarding = false;
    let result = loop {
        if shutdown.load(Ordering::SeqCst) {
            break Ok(());
        }
        let room = (MAX_LINE_BYTES + 1).saturating_sub(buf.len()) as u64;
        match reader.by_ref().take(room).read_until(b'\n', &mut buf) {
            Ok(0) => {
                if !buf.is_empty() && !discarding {
                    respond(&mut session, &buf, &mut writer)?;
                }
                break Ok(());
            }
            Ok(_) if buf.ends_with(b"\n") => {
                if !discarding {
                    respond(&mut session, &buf, &mut writer)?;
                }
                discarding = false;
                buf.clear();
            }
            Ok(_) => {}
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => {}
            Err(e) => break Err(e),
        }
        if buf.len() > MAX_LINE_BYTES {
            if !discarding {
                write_line(&mut writer, &WireMessage::error("message too long"))?;
                writer.flush()?;
                discarding = true;
            }
            buf.clear();
        }
        if let Some(sink) = telemetry {
            let records = session.drain_telemetry();
            if !records.is_empty() {
                sink.lock().expect("telemetry lock").write(id, &records);
            }
        }
    };
    if let Some(sink) = telemetry {
        let mut sink = sink.lock().expect("telemetry lock");
        sink.write(id, &session.drain_telemetry());
        sink.flush();
    }
    result
}

fn respond<W: Write>(session: &mut Session, raw: &[u8], out: &mut W) -> io::Result<()> {
    let replies = match std::str::from_utf8(raw) {
        Ok(s) => {
            let line = s.trim();
            if line.is_empty() {
                return Ok(());
            }
            session.handle_line(line)
        }
        Err(_) => vec![WireMessage::error("message is not valid UTF-8")],
    };
    for r in &replies {
        write_line(out, r)?;
    }
    out.flush()
}

fn write_line<W: Write>(out: &mut W, msg: &WireMessage) -> io::Result<()> {
    out.write_all(msg.to_line().as_bytes())?;
    out.write_all(b"\n")
}

/// Runs a transcript of client lines through a fresh session and returns the
/// server lines it produces, exactly as they would be sent over the socket.
pub fn replay_transcript<'a>(
    settings: Settings,
    layout: KeyboardLayout,
    lines: impl IntoIterator<Item = &'a str>,
) -> Vec<String> {
    let mut session = Session::new(settings, layout);
    let mut out = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.extend(session.handle_line(line).iter().map(WireMessage::to_line));
    }
    out
}
