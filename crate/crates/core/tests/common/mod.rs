//! Independent reference implementations and generators shared by the
//! integration tests.

#![allow(dead_code)]

use gaze_autocal::fixation::DROPOUT_PERIODS;
use gaze_autocal::{AutocalConfig, GazeEventKind, GazeSample, Millis, Offset2D, Point, ScreenConfig};
use rand::{Rng, RngExt};

/// Brute-force fixation classification of sample `i`, recomputed from the
/// whole prefix without any carried state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEvent {
    pub kind: GazeEventKind,
    pub centroid: Option<Point>,
}

pub struct FixationOracle<'a> {
    trace: &'a [GazeSample],
    threshold: f64,
    min_duration: Millis,
    dropout_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Opening {
    /// First sample or first after a dropout; absorbed.
    Fresh,
    /// Too fast; not absorbed.
    Saccade,
    /// Slow enough; absorbed into the running candidate.
    Slow,
}

impl<'a> FixationOracle<'a> {
    pub fn new(trace: &'a [GazeSample], cfg: &AutocalConfig, screen: &ScreenConfig) -> Self {
        Self {
            trace,
            threshold: cfg.saccade_velocity_threshold,
            min_duration: cfg.fixation_min_duration,
            dropout_ms: DROPOUT_PERIODS * screen.sample_period_ms(),
        }
    }

    pub fn velocity(&self, i: usize) -> Option<f64> {
        if i == 0 {
            return None;
        }
        let (a, b) = (self.trace[i - 1], self.trace[i]);
        let dt = (b.t - a.t) as f64;
        (dt <= self.dropout_ms).then(|| a.point().distance(b.point()) / dt)
    }

    fn opening(&self, i: usize) -> Opening {
        match self.velocity(i) {
            None => Opening::Fresh,
            Some(v) if v > self.threshold => Opening::Saccade,
            Some(_) => Opening::Slow,
        }
    }

    /// Index that started the saccade-free run containing `i`.
    fn run_start(&self, i: usize) -> usize {
        (0..=i).rev().find(|&j| self.opening(j) != Opening::Slow).expect("sample 0 is fresh")
    }

    fn absorbed(&self, i: usize) -> Vec<usize> {
        let j = self.run_start(i);
        let first = if self.opening(j) == Opening::Fresh { j } else { j + 1 };
        (first..=i).collect()
    }

    fn mean(&self, idx: &[usize]) -> Option<Point> {
        if idx.is_empty() {
            return None;
        }
        let n = idx.len() as f64;
        let sx: f64 = idx.iter().map(|&k| self.trace[k].x).sum();
        let sy: f64 = idx.iter().map(|&k| self.trace[k].y).sum();
        Some(Point::new(sx / n, sy / n))
    }

    /// Whether sample `i` is absorbed and its run has lasted long enough.
    fn fixating(&self, i: usize) -> bool {
        self.opening(i) != Opening::Saccade && self.trace[i].t - self.trace[self.run_start(i)].t >= self.min_duration
    }

    pub fn classify(&self, i: usize) -> OracleEvent {
        match self.opening(i) {
            Opening::Fresh => OracleEvent { kind: GazeEventKind::CandidateSample, centroid: self.mean(&[i]) },
            Opening::Saccade => {
                if self.fixating(i - 1) {
                    OracleEvent { kind: GazeEventKind::FixationEnded, centroid: self.mean(&self.absorbed(i - 1)) }
                } else {
                    OracleEvent { kind: GazeEventKind::SaccadeSample, centroid: None }
                }
            }
            Opening::Slow => {
                let centroid = self.mean(&self.absorbed(i));
                let kind = if !self.fixating(i) {
                    GazeEventKind::CandidateSample
                } else if self.fixating(i - 1) {
                    GazeEventKind::FixationOngoing
                } else {
                    GazeEventKind::FixationStarted
                };
                OracleEvent { kind, centroid }
            }
        }
    }
}

pub fn points_close(a: Point, b: Point, rel: f64) -> bool {
    let tol = |u: f64, v: f64| (u - v).abs() <= rel * u.abs().max(v.abs()).max(1.0);
    tol(a.x, b.x) && tol(a.y, b.y)
}

/// Random gaze trace mixing holds, fast jumps, drifts near the saccade
/// threshold and occasional dropouts, at a nominal 60 Hz.
pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> Vec<GazeSample> {
    let n = rng.random_range(1..=max_len);
    let mut t: Millis = rng.random_range(0..1000);
    let mut pos = Point::new(rng.random_range(0.0..1920.0), rng.random_range(0.0..1080.0));
    let mut out = Vec::with_capacity(n);
    let mut mode = 0u8;
    let mut heading = Offset2D::new(1.0, 0.0);
    for k in 0..n {
        if k > 0 {
            let dt: Millis = if rng.random_bool(0.03) { rng.random_range(51..400) } else { rng.random_range(16..=17) };
            t += dt;
            if rng.random_bool(0.08) {
                mode = rng.random_range(0..4);
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                heading = Offset2D::new(a.cos(), a.sin());
            }
            let step = match mode {
                // Hold with small jitter.
                0 => Offset2D::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                // Saccadic jump.
                1 => heading.scale(rng.random_range(30.0..400.0)),
                // Drift straddling the threshold.
                2 => heading.scale(rng.random_range(0.35..0.65) * dt as f64),
                // Perfectly still.
                _ => Offset2D::ZERO,
            };
            pos = pos.offset_by(step);
        }
        out.push(GazeSample::new(t, pos.x, pos.y).unwrap());
    }
    out
}

/// ε that a window of the last `w` deltas should produce.
pub fn window_oracle(history: &[Offset2D], w: usize, bound: f64) -> Offset2D {
    let tail = &history[history.len().saturating_sub(w)..];
    let n = tail.len() as f64;
    let mx = tail.iter().map(|d| d.dx).sum::<f64>() / n;
    let my = tail.iter().map(|d| d.dy).sum::<f64>() / n;
    Offset2D::new(mx.clamp(-bound, bound), my.clamp(-bound, bound))
}
