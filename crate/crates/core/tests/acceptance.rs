//! Acceptance criteria A1–A9. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; exits non-zero if any criterion fails.

mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::Ordering;
use std::thread;
use std::time::{Duration, Instant};

use common::{points_close, random_trace, window_oracle, FixationOracle};
use gaze_autocal::keyboard::{DwellMachine, DwellTiming, KeyLabel};
use gaze_autocal::metrics::{aggregate, AbortedSpeed, Metric, TestKind};
use gaze_autocal::service::{replay_transcript, Server, ServerConfig};
use gaze_autocal::sim::{bundled_phrases, run_experiment, ExperimentSpec, SessionRunner, SessionSpec, System, UserMode};
use gaze_autocal::stats::{paired_t_test, reg_inc_beta, student_t_cdf, welch_t_test};
use gaze_autocal::{
    Autocalibrator, AutocalConfig, CalibrationEstimate, FixationFilter, GazeSample, KeyboardLayout, Offset2D, Point,
    ReadingContext, ScreenConfig, Settings,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const A1_TOL_PX: f64 = 10.0;
const A1_RUNS: u64 = 100;
const A1_MIN_PASS: usize = 95;
const A1_BUDGET: Duration = Duration::from_secs(10);
const A2_DELTAS: usize = 1_000_000;
const A2_BUDGET: Duration = Duration::from_secs(5);
const A3_STREAMS: usize = 1_000;
const A3_TOL: f64 = 1e-9;
const A4_TRACES: usize = 1_000;
const A4_CENTROID_REL: f64 = 1e-9;
const A6_BUDGET: Duration = Duration::from_secs(60);
const A6_ALPHA: f64 = 0.05;
const A6_MIN_STABLE: usize = 9;
const A7_REL: f64 = 1e-6;
const A7_SYMMETRY: f64 = 1e-12;
const A8_SAMPLES: usize = 100_000;
const A9_MESSAGES: usize = 500;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Offset convergence after the first reading interval of at least w/60 s.
fn a1() -> Outcome {
    let start = Instant::now();
    let layout = KeyboardLayout::qwerty();
    let mut settings = Settings::default();
    settings.tracker.noise_std = 3.0;
    settings.user.p_read = 1.0;
    let w = settings.autocal.window as f64;
    let min_read_ms = (w * 1000.0 / settings.screen.sample_rate).ceil() as i64;
    settings.user.read_duration_ms = min_read_ms + 33;
    let mut runner = SessionRunner::new(&settings, &layout);
    runner.record_log = true;
    let mut report = Vec::new();
    for offset in [Offset2D::new(75.0, 0.0), Offset2D::new(-75.0, 0.0), Offset2D::new(0.0, 75.0), Offset2D::new(0.0, -75.0)] {
        let mut pass = 0;
        for seed in 0..A1_RUNS {
            let spec = SessionSpec {
                phrase: "hello world".into(),
                injected_offset: offset,
                system: System::Eyeo,
                timeout_ms: 30_000,
                seed,
            };
            let r = runner.run(&spec, &settings.user).map_err(|e| e.to_string())?;
            let log = &r.event_log;
            let Some(first) = log.iter().position(|e| e.mode == UserMode::Reading) else { continue };
            let len = log[first..].iter().take_while(|e| e.mode == UserMode::Reading).count();
            let end = &log[first + len - 1];
            check(end.calib.t_ms - log[first].calib.t_ms + 17 >= min_read_ms, || "reading interval too short".into())?;
            let err = Offset2D::new(end.calib.eps_x, end.calib.eps_y) - offset;
            if err.norm() < A1_TOL_PX {
                pass += 1;
            }
        }
        check(pass >= A1_MIN_PASS, || format!("offset {offset:?}: {pass}/{A1_RUNS} within {A1_TOL_PX} px"))?;
        report.push(format!("({:+},{:+}) {pass}/{A1_RUNS}", offset.dx, offset.dy));
    }
    let elapsed = start.elapsed();
    check(elapsed < A1_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:.2?}", report.join(", ")))
}

/// |ε| ≤ b after every one of 10⁶ random updates.
fn a2() -> Outcome {
    let start = Instant::now();
    let bound = 200.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut est = CalibrationEstimate::new(64);
    for i in 0..A2_DELTAS {
        let scale = if i % 97 == 0 { 1e6 } else { 1000.0 };
        let d = Offset2D::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
        est.push_delta(d, bound);
        let e = est.eps();
        check(e.dx.abs() <= bound && e.dy.abs() <= bound, || format!("update {i}: {e:?}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < A2_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{A2_DELTAS} updates in {elapsed:.2?}"))
}

/// ε equals the clipped mean of the last w raw deltas after every update.
fn a3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut updates = 0usize;
    for w in [1usize, 2, 64] {
        for stream in 0..A3_STREAMS {
            let n = rng.random_range(1..=200);
            let mut est = CalibrationEstimate::new(w);
            let mut history = Vec::with_capacity(n);
            for k in 0..n {
                let d = Offset2D::new(rng.random_range(-400.0..400.0), rng.random_range(-400.0..400.0));
                history.push(d);
                est.push_delta(d, 200.0);
                let want = window_oracle(&history, w, 200.0);
                let got = est.eps();
                check((got.dx - want.dx).abs() <= A3_TOL && (got.dy - want.dy).abs() <= A3_TOL, || {
                    format!("w={w} stream {stream} update {k}: {got:?} vs {want:?}")
                })?;
                updates += 1;
            }
        }
    }
    Ok(format!("3×{A3_STREAMS} streams, {updates} updates, 0 mismatches"))
}

/// Filter events agree with a stateless brute-force classifier.
fn a4() -> Outcome {
    let cfg = AutocalConfig::default();
    let screen = ScreenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut samples = 0usize;
    for trace_no in 0..A4_TRACES {
        let trace = random_trace(&mut rng, 200);
        let oracle = FixationOracle::new(&trace, &cfg, &screen);
        let mut f = FixationFilter::new(&cfg, &screen);
        for (i, s) in trace.iter().enumerate() {
            let e = f.push(*s).map_err(|e| e.to_string())?;
            let o = oracle.classify(i);
            let centroids_agree = match (e.centroid, o.centroid) {
                (Some(a), Some(b)) => points_close(a, b, A4_CENTROID_REL),
                (None, None) => true,
                _ => false,
            };
            check(e.kind == o.kind && centroids_agree, || {
                format!("trace {trace_no} sample {i}: {:?}/{:?} vs oracle {:?}/{:?}", e.kind, e.centroid, o.kind, o.centroid)
            })?;
            samples += 1;
        }
    }
    Ok(format!("{A4_TRACES} traces, {samples} samples, 0 disagreements"))
}

/// 449 ms of on-key gaze activates nothing; 450 ms activates exactly once.
fn a5() -> Outcome {
    let layout = KeyboardLayout::qwerty();
    let p = layout.key(KeyLabel::Char('g')).unwrap().center();
    let count = |hold_ms: i64| -> Result<Vec<i64>, String> {
        let mut m = DwellMachine::new(DwellTiming::default());
        let mut fired = Vec::new();
        for t in 1000..=1000 + hold_ms {
            if let Some(a) = m.tick(p, t, &layout).map_err(|e| e.to_string())? {
                fired.push(a.t);
            }
        }
        // Look away afterwards.
        m.tick(Point::new(50.0, 50.0), 1000 + hold_ms + 1, &layout).map_err(|e| e.to_string())?;
        Ok(fired)
    };
    let short = count(449)?;
    let exact = count(450)?;
    check(short.is_empty(), || format!("449 ms fired {short:?}"))?;
    check(exact == vec![1450], || format!("450 ms fired {exact:?}"))?;
    Ok("449 ms → 0, 450 ms → 1 (at +450 ms)".into())
}

/// EYEO faster than CONTROL (Welch p < .05), aborts no more frequent.
fn a6() -> Outcome {
    let layout = KeyboardLayout::qwerty();
    let settings = Settings::default();
    let phrases = bundled_phrases(&layout).map_err(|e| e.to_string())?;
    let direction = |seed: u64| -> Result<(bool, String), String> {
        let table =
            run_experiment(&ExperimentSpec::new(19, seed), &settings, &layout, &phrases).map_err(|e| e.to_string())?;
        check(table.rows.len() == 190, || format!("{} rows", table.rows.len()))?;
        let report = aggregate(&table, TestKind::Welch, AbortedSpeed::Partial).map_err(|e| e.to_string())?;
        let speed = report.metric(Metric::CharsPerMin);
        let aborts = report.metric(Metric::Aborts);
        let ok = speed.eyeo.mean > speed.control.mean
            && speed.test.p_value < A6_ALPHA
            && aborts.eyeo.mean <= aborts.control.mean;
        let summary = format!(
            "speed {:.2} vs {:.2} cpm, p={:.2e}, aborts {:.2} vs {:.2}",
            speed.eyeo.mean, speed.control.mean, speed.test.p_value, aborts.eyeo.mean, aborts.control.mean
        );
        Ok((ok, summary))
    };
    let start = Instant::now();
    let (ok7, summary7) = direction(7)?;
    let elapsed = start.elapsed();
    check(elapsed < A6_BUDGET, || format!("seed 7 took {elapsed:?}"))?;
    check(ok7, || format!("seed 7: {summary7}"))?;
    let mut stable = 0;
    for seed in 1..=10 {
        if direction(seed)?.0 {
            stable += 1;
        }
    }
    check(stable >= A6_MIN_STABLE, || format!("direction held for {stable}/10 seeds"))?;
    Ok(format!("seed 7: {summary7} in {elapsed:.2?}; seeds 1..10: {stable}/10"))
}

/// p-values and distribution values match precomputed references.
fn a7() -> Outcome {
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs();
    let mut cases: Vec<(&str, f64, f64)> = Vec::new();
    let w1 = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    cases.push(("welch p (1..5 vs 2..6)", w1.p_value, 0.34659350708733416));
    let w2 = welch_t_test(&[12.1, 14.3, 11.8, 15.2, 13.9, 12.7], &[10.2, 11.5, 9.8, 12.9, 10.7])
        .map_err(|e| e.to_string())?;
    cases.push(("welch t", w2.t_stat, 2.981920685837809));
    cases.push(("welch dof", w2.dof, 8.885731382591167));
    cases.push(("welch p", w2.p_value, 0.015617476564142436));
    let pr = paired_t_test(&[1.1, 2.3, 2.9, 4.2, 5.0], &[1.0, 2.0, 3.1, 3.8, 4.6]).map_err(|e| e.to_string())?;
    cases.push(("paired t", pr.t_stat, 1.7541160386140582));
    cases.push(("paired p", pr.p_value, 0.15427287107931661));
    for (t, dof, want) in [
        (1.0, 8.0, 0.8267032464563329),
        (2.5, 3.7, 0.9640889885440866),
        (-0.3, 1.0, 0.40722642092225766),
        (4.0, 30.5, 0.9998133102748698),
        (10.0, 2.0, 0.9950737714883372),
        (0.001, 100.0, 0.5003979461199483),
        (2.0, 1e6, 0.9772497330743404),
    ] {
        cases.push(("t cdf", student_t_cdf(t, dof), want));
    }
    for (a, b, x, want) in [
        (0.5, 0.5, 0.3, 0.36901011956554537),
        (2.0, 3.0, 0.4, 0.5248),
        (4.25, 0.5, 0.9, 0.3579776506737527),
        (50.0, 0.5, 0.99, 0.31730439787419737),
        (1.5, 7.0, 0.05, 0.1369316217312547),
    ] {
        cases.push(("incomplete beta", reg_inc_beta(a, b, x), want));
    }
    let mut worst = 0.0f64;
    for (name, got, want) in &cases {
        let r = rel(*got, *want);
        worst = worst.max(r);
        check(r <= A7_REL, || format!("{name}: {got} vs {want} (rel {r:.2e})"))?;
    }
    let mut sym_worst = 0.0f64;
    for dof in [0.5, 1.0, 2.0, 3.7, 8.0, 30.5, 100.0, 1e4] {
        for i in 0..=200 {
            let t = -20.0 + 0.2 * i as f64;
            let s = (student_t_cdf(t, dof) + student_t_cdf(-t, dof) - 1.0).abs();
            sym_worst = sym_worst.max(s);
            check(s <= A7_SYMMETRY, || format!("symmetry at t={t}, dof={dof}: {s:.2e}"))?;
        }
    }
    Ok(format!("{} references, worst rel {worst:.1e}; symmetry worst {sym_worst:.1e}", cases.len()))
}

/// Streams that never satisfy the gate leave ε bit-identical.
fn a8() -> Outcome {
    let cfg = AutocalConfig::default();
    let screen = ScreenConfig::default();
    let char_c = Point::new(700.0, 120.0);
    let ctx = ReadingContext { last_char_center: Some(char_c), n_char: 4, text_box_bottom: 240.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0usize;
    for (variant, name) in ["below text box", "empty text", "outside radius"].iter().enumerate() {
        for warm in [false, true] {
            let mut f = FixationFilter::new(&cfg, &screen);
            let mut cal = Autocalibrator::new(cfg);
            let mut t: i64 = 0;
            if warm {
                // Start from a non-trivial estimate.
                for _ in 0..30 {
                    let e = f.push(GazeSample::new(t, char_c.x - 33.3, char_c.y + 7.7).unwrap()).unwrap();
                    cal.process(&e, &ctx);
                    t += 17;
                }
                t += 1000;
                f.reset();
            }
            let initial = cal.eps();
            let n_updates = cal.estimate().n_updates();
            check(!warm || initial != Offset2D::ZERO, || "warm-up did not move ε".into())?;
            let per_run = A8_SAMPLES / 6 + 1;
            for _ in 0..per_run {
                t += if rng.random_bool(0.05) { rng.random_range(40..200) } else { rng.random_range(16..=17) };
                let (x, y, c) = match variant {
                    0 => (rng.random_range(0.0f64..1920.0), rng.random_range(240.0f64..1080.0), ctx),
                    1 => (
                        rng.random_range(0.0..1920.0),
                        rng.random_range(0.0..1080.0),
                        ReadingContext { last_char_center: None, n_char: 0, ..ctx },
                    ),
                    // Half-plane beyond the zone radius, so centroids stay outside too.
                    _ => (rng.random_range(char_c.x + cfg.tau..1920.0), rng.random_range(0.0..240.0), ctx),
                };
                // Occasionally hold still so fixations do form.
                let (x, y) = if rng.random_bool(0.7) { (x.round(), y.round()) } else { (x, y) };
                let e = f.push(GazeSample::new(t, x, y).unwrap()).map_err(|e| e.to_string())?;
                let out = cal.process(&e, &c);
                let eps = cal.eps();
                check(
                    !out.updated && eps.dx.to_bits() == initial.dx.to_bits() && eps.dy.to_bits() == initial.dy.to_bits(),
                    || format!("{name}: ε moved at t={t}"),
                )?;
                checked += 1;
            }
            check(cal.estimate().n_updates() == n_updates, || format!("{name}: update count changed"))?;
        }
    }
    Ok(format!("{checked} gate-failing samples, ε bit-identical"))
}

fn a9_script() -> Vec<String> {
    let layout = KeyboardLayout::qwerty();
    let mut lines = vec![
        r#"{"kind":"SAMPLE","t_ms":0,"x":1,"y":1}"#.to_string(),
        r#"{"kind":"HELLO"}"#.to_string(),
        r#"{"kind":"SET_OFFSET","dx":75,"dy":0}"#.to_string(),
    ];
    let mut t = 0i64;
    let mut push = |lines: &mut Vec<String>, p: Point, frames: usize| {
        for _ in 0..frames {
            lines.push(format!(r#"{{"kind":"SAMPLE","t_ms":{t},"x":{},"y":{}}}"#, p.x, p.y));
            t += if t % 3 == 0 { 17 } else { 16 };
        }
    };
    let key = |c: char| layout.key(KeyLabel::Char(c)).unwrap().center();
    push(&mut lines, Point::new(key('h').x + 75.0, key('h').y + 3.0), 40);
    push(&mut lines, layout.char_center(1).unwrap(), 70);
    lines.push("definitely not json".into());
    lines.push(r#"{"kind":"TELEPORT","x":1}"#.into());
    push(&mut lines, Point::new(key('i').x + 2.0, key('i').y - 4.0), 40);
    lines.push(r#"{"kind":"TOGGLE_AUTOCAL","enabled":false}"#.into());
    push(&mut lines, Point::new(layout.char_center(2).unwrap().x + 9.0, 120.0), 50);
    lines.push(r#"{"kind":"TOGGLE_AUTOCAL","enabled":true}"#.into());
    push(&mut lines, Point::new(layout.char_center(2).unwrap().x + 9.0, 120.0), 50);
    lines.push(r#"{"kind":"SET_OFFSET","dx":0,"dy":-75}"#.into());
    push(&mut lines, Point::new(key('t').x, key('t').y), 60);
    lines.push(r#"{"kind":"RESET"}"#.into());
    lines.push(r#"{"kind":"SAMPLE","t_ms":5,"x":900.5,"y":700.25}"#.into());
    lines.push(r#"{"kind":"SAMPLE","t_ms":5,"x":900.5,"y":700.25}"#.into());
    let mut k = 0u32;
    while lines.len() < A9_MESSAGES {
        let x = 400.0 + f64::from(k % 37) * 13.5;
        let y = 600.0 + f64::from(k % 11) * 7.25;
        lines.push(format!(r#"{{"kind":"SAMPLE","t_ms":{},"x":{x},"y":{y}}}"#, 100 + 17 * k));
        k += 1;
    }
    lines
}

fn tcp_transcript(addr: std::net::SocketAddr, lines: &[String]) -> Result<Vec<u8>, String> {
    let stream = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    let mut writer = stream.try_clone().map_err(|e| e.to_string())?;
    let payload: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let sender = thread::spawn(move || {
        writer.write_all(payload.as_bytes()).and_then(|_| writer.shutdown(Shutdown::Write))
    });
    let mut out = Vec::new();
    let mut reader = BufReader::new(stream);
    loop {
        let mut line = Vec::new();
        if reader.read_until(b'\n', &mut line).map_err(|e| e.to_string())? == 0 {
            break;
        }
        out.extend_from_slice(&line);
    }
    sender.join().map_err(|_| "sender panicked".to_string())?.map_err(|e| e.to_string())?;
    Ok(out)
}

/// A recorded client transcript replayed against the server reproduces the
/// server transcript byte for byte.
fn a9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let recorded = dir.path().join("client.jsonl");
    let script = a9_script();
    check(script.len() == A9_MESSAGES, || format!("script has {} messages", script.len()))?;
    std::fs::write(&recorded, script.iter().map(|l| format!("{l}\n")).collect::<String>())
        .map_err(|e| e.to_string())?;
    let replayed: Vec<String> =
        std::fs::read_to_string(&recorded).map_err(|e| e.to_string())?.lines().map(str::to_string).collect();

    let server = Server::bind("127.0.0.1:0", ServerConfig::default()).map_err(|e| e.to_string())?;
    let addr = server.local_addr().map_err(|e| e.to_string())?;
    let stop = server.shutdown_handle();
    let handle = thread::spawn(move || server.run());
    let first = tcp_transcript(addr, &script);
    let second = tcp_transcript(addr, &replayed);
    stop.store(true, Ordering::SeqCst);
    handle.join().map_err(|_| "server panicked".to_string())?.map_err(|e| e.to_string())?;
    let (first, second) = (first?, second?);

    check(first == second, || "server transcripts differ between runs".into())?;
    let in_process: String = replay_transcript(Settings::default(), KeyboardLayout::qwerty(), script.iter().map(String::as_str))
        .into_iter()
        .map(|l| l + "\n")
        .collect();
    check(first == in_process.as_bytes(), || "socket transcript differs from in-process replay".into())?;
    let text = String::from_utf8(first).map_err(|e| e.to_string())?;
    let count = |kind: &str| text.matches(&format!(r#""kind":"{kind}""#)).count();
    for kind in ["STATE", "ACTIVATION", "CALIBRATION", "ERROR"] {
        check(count(kind) > 0, || format!("transcript has no {kind} messages"))?;
    }
    Ok(format!(
        "{A9_MESSAGES} client messages → {} server lines ({} STATE, {} ACTIVATION, {} CALIBRATION, {} ERROR), identical",
        text.lines().count(),
        count("STATE"),
        count("ACTIVATION"),
        count("CALIBRATION"),
        count("ERROR")
    ))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("A1", "offset convergence", a1),
        ("A2", "clip invariant", a2),
        ("A3", "window oracle", a3),
        ("A4", "fixation oracle", a4),
        ("A5", "dwell timing", a5),
        ("A6", "directional study reproduction", a6),
        ("A7", "t-test kernel", a7),
        ("A8", "hold invariance", a8),
        ("A9", "protocol determinism", a9),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("{id} {name}: PASS — {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} {name}: FAIL — {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
