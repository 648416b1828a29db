use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gaze_autocal::metrics::{aggregate, typing_speed, AbortedSpeed, TestKind};
use gaze_autocal::service::{Server, ServerConfig};
use gaze_autocal::sim::{bundled_phrases, load_phrases, run_experiment, ExperimentSpec, SessionRunner, SessionSpec, System};
use gaze_autocal::trace::{calibrate_trace, load_trace, write_session_log, write_telemetry};
use gaze_autocal::{KeyboardLayout, Offset2D, Point, ReadingContext, Settings};
use tracing_subscriber::EnvFilter;

/// Gaze typing with seamless autocalibration: trace replay, simulation and a
/// live JSON service.
#[derive(Debug, Parser)]
#[command(name = "gaze-autocal", version)]
struct Cli {
    /// Settings file (TOML); missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Keyboard layout file (TOML); defaults to the built-in QWERTY layout.
    #[arg(long, global = true, value_name = "PATH")]
    layout: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the fixation filter and calibrator over a `t_ms,x,y` trace.
    Replay(ReplayArgs),
    /// Simulate one typing session.
    Session(SessionArgs),
    /// Simulate the counterbalanced two-system experiment and compare systems.
    Experiment(ExperimentArgs),
    /// Serve the line-delimited JSON protocol over TCP.
    Serve(ServeArgs),
    /// Check a settings file and print the effective settings.
    ValidateConfig(ValidateArgs),
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Trace CSV with header `t_ms,x,y`.
    trace: PathBuf,
    /// Centre of the last typed character.
    #[arg(long, allow_negative_numbers = true)]
    char_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    char_y: Option<f64>,
    /// Bottom edge of the text box; defaults to the layout's.
    #[arg(long, allow_negative_numbers = true)]
    textbox_bottom: Option<f64>,
    /// Number of characters already typed.
    #[arg(long, default_value_t = 1)]
    nchar: usize,
    /// Telemetry CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SessionArgs {
    #[arg(long, default_value = "hello world")]
    phrase: String,
    /// Injected tracker offset; the tracker reports true gaze minus this.
    #[arg(long, value_parser = parse_offset, default_value = "0,0", allow_hyphen_values = true)]
    offset: Offset2D,
    #[arg(long, default_value = "eyeo")]
    system: System,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the probability of reading back after each activation.
    #[arg(long)]
    p_read: Option<f64>,
    /// Per-sample session log CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 19)]
    participants: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for sessions.csv, report.txt and summary.csv.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// How aborted sessions enter the speed metric: partial or exclude.
    #[arg(long, default_value = "partial")]
    aborted_speed: AbortedSpeed,
    /// Override the probability of reading back after each activation.
    #[arg(long)]
    p_read: Option<f64>,
    /// Between-system test: welch or paired.
    #[arg(long, default_value = "welch")]
    test: TestKind,
    /// Phrase corpus, one phrase per line; defaults to the bundled corpus.
    #[arg(long)]
    phrases: Option<PathBuf>,
    /// Start odd participants with EYEO instead of even ones.
    #[arg(long)]
    flip_order: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// TCP port; 0 picks a free one.
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Per-sample telemetry CSV, flushed on shutdown.
    #[arg(long)]
    telemetry: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Settings file to check; `--config` is used when omitted.
    path: Option<PathBuf>,
}

fn parse_offset(s: &str) -> Result<Offset2D, String> {
    let (dx, dy) = s.split_once(',').ok_or_else(|| format!("expected dx,dy, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad offset component {v:?}: {e}"));
    let o = Offset2D::new(parse(dx)?, parse(dy)?);
    if !o.is_finite() {
        return Err("offset must be finite".into());
    }
    Ok(o)
}

fn main() {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("GAZE_AUTOCAL_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Command::ValidateConfig(args) = &cli.command {
        return validate_config(args.path.as_deref().or(cli.config.as_deref()));
    }
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let layout = match &cli.layout {
        Some(path) => KeyboardLayout::load(path).with_context(|| format!("layout {}", path.display()))?,
        None => KeyboardLayout::qwerty(),
    };
    match cli.command {
        Command::Replay(args) => replay(args, &settings, &layout),
        Command::Session(args) => session(args, settings, &layout),
        Command::Experiment(args) => experiment(args, settings, &layout),
        Command::Serve(args) => serve(args, settings, layout),
        Command::ValidateConfig(_) => unreachable!(),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn replay(args: ReplayArgs, settings: &Settings, layout: &KeyboardLayout) -> Result<()> {
    let samples = load_trace(&args.trace).with_context(|| format!("trace {}", args.trace.display()))?;
    let last_char_center = match (args.char_x, args.char_y) {
        (Some(x), Some(y)) => Some(Point::new(x, y)),
        (None, None) if args.nchar == 0 => None,
        (None, None) => bail!("--char-x and --char-y are required when --nchar > 0"),
        _ => bail!("--char-x and --char-y must be given together"),
    };
    let ctx = ReadingContext {
        last_char_center,
        n_char: args.nchar,
        text_box_bottom: args.textbox_bottom.unwrap_or(layout.text_box_bottom()),
    };
    let records = calibrate_trace(&samples, &settings.autocal, &settings.screen, &ctx)?;
    tracing::info!(samples = samples.len(), updates = records.iter().filter(|r| r.updated).count(), "replayed");
    let mut out = output(args.out.as_deref())?;
    write_telemetry(&mut out, &records)?;
    out.flush()?;
    Ok(())
}

fn session(args: SessionArgs, mut settings: Settings, layout: &KeyboardLayout) -> Result<()> {
    if let Some(p) = args.p_read {
        settings.user.p_read = p;
    }
    let settings = settings.validate()?;
    let spec = SessionSpec {
        phrase: args.phrase,
        injected_offset: args.offset,
        system: args.system,
        timeout_ms: settings.session.timeout_ms,
        seed: args.seed,
    };
    let mut runner = SessionRunner::new(&settings, layout);
    runner.record_log = args.out.is_some();
    let r = runner.run(&spec, &settings.user)?;
    if let Some(path) = &args.out {
        let mut out = output(Some(path))?;
        write_session_log(&mut out, &r.event_log)?;
        out.flush()?;
    }
    println!("system: {}", spec.system);
    println!("phrase: {}", spec.phrase);
    println!("typed: {}", r.typed);
    println!("duration_ms: {}", r.duration_ms);
    println!("chars_per_min: {:.3}", typing_speed(r.correct_chars, r.duration_ms));
    println!("backspaces: {}", r.backspaces);
    println!("aborted: {}", r.aborted);
    println!("updates_applied: {}", r.updates_applied);
    println!("final_eps: {:.3},{:.3}", r.final_eps.dx, r.final_eps.dy);
    Ok(())
}

fn experiment(args: ExperimentArgs, mut settings: Settings, layout: &KeyboardLayout) -> Result<()> {
    if let Some(p) = args.p_read {
        settings.user.p_read = p;
    }
    let settings = settings.validate()?;
    let phrases = match &args.phrases {
        Some(path) => load_phrases(path, layout)?,
        None => bundled_phrases(layout)?,
    };
    let spec = ExperimentSpec { participants: args.participants, seed: args.seed, flip_system_order: args.flip_order };
    let table = run_experiment(&spec, &settings, layout, &phrases)?;
    let report = aggregate(&table, args.test, args.aborted_speed)?;

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let write = |name: &str, contents: &[u8]| -> Result<()> {
        let path = args.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    };
    write("sessions.csv", table.to_csv_string().as_bytes())?;
    let text = report.to_text();
    write("report.txt", text.as_bytes())?;
    write("summary.csv", report.to_csv().as_bytes())?;
    print!("{text}");
    Ok(())
}

fn serve(args: ServeArgs, settings: Settings, layout: KeyboardLayout) -> Result<()> {
    let addr = format!("{}:{}", args.host, args.port);
    let server = Server::bind(&addr, ServerConfig { settings, layout, telemetry_path: args.telemetry })
        .with_context(|| format!("cannot listen on {addr}"))?;
    let shutdown = server.shutdown_handle();
    ctrlc::set_handler(move || shutdown.store(true, Ordering::SeqCst)).context("cannot install signal handler")?;
    println!("listening on {}", server.local_addr()?);
    io::stdout().flush()?;
    server.run()?;
    println!("shutdown complete");
    Ok(())
}

fn validate_config(path: Option<&Path>) -> Result<()> {
    let settings = match path {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    print!("{}", settings.to_toml());
    Ok(())
}
