//! Reading-gated autocalibration.
//!
//! While the user types, the applied correction is held fixed. When a fixation
//! lands above the keyboard and close to the last typed character, the user is
//! assumed to be reading that character: the displacement from the fixation to
//! the character centre is pushed into a sliding window, and the correction
//! becomes the clipped window mean.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::fixation::GazeEvent;
use crate::types::{AutocalConfig, Millis, Offset2D, Point};

/// Keyboard-side geometry the calibrator needs for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadingContext {
    pub last_char_center: Option<Point>,
    pub n_char: usize,
    pub text_box_bottom: f64,
}

impl ReadingContext {
    pub fn empty(text_box_bottom: f64) -> Self {
        Self { last_char_center: None, n_char: 0, text_box_bottom }
    }
}

/// True iff `point` lies above the text-box bottom and strictly within `tau`
/// of the last typed character.
pub fn in_calibration_zone(point: Point, ctx: &ReadingContext, tau: f64) -> bool {
    match ctx.last_char_center {
        Some(c) if ctx.n_char > 0 => point.y < ctx.text_box_bottom && point.distance(c) < tau,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationEstimate {
    eps: Offset2D,
    window: VecDeque<Offset2D>,
    capacity: usize,
    n_updates: u64,
}

impl CalibrationEstimate {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "window must be ≥ 1");
        Self { eps: Offset2D::ZERO, window: VecDeque::with_capacity(window), capacity: window, n_updates: 0 }
    }

    /// Currently applied correction.
    pub fn eps(&self) -> Offset2D {
        self.eps
    }

    pub fn n_updates(&self) -> u64 {
        self.n_updates
    }

    /// Raw deltas currently in the window, oldest first.
    pub fn deltas(&self) -> impl ExactSizeIterator<Item = &Offset2D> {
        self.window.iter()
    }

    pub fn reset(&mut self) {
        self.eps = Offset2D::ZERO;
        self.window.clear();
        self.n_updates = 0;
    }

    /// Pushes one raw delta and recomputes the clipped window mean.
    pub fn push_delta(&mut self, delta: Offset2D, bound: f64) {
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(delta);
        let n = self.window.len() as f64;
        let (sx, sy) = self.window.iter().fold((0.0, 0.0), |(sx, sy), d| (sx + d.dx, sy + d.dy));
        self.eps = Offset2D::new(sx / n, sy / n).clip(bound);
        self.n_updates += 1;
    }

    pub fn apply(&self, p: Point) -> Point {
        p.offset_by(self.eps)
    }
}

/// Result of running one gaze event through the calibrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibrated {
    pub point: Point,
    pub eps: Offset2D,
    pub zone_hit: bool,
    pub updated: bool,
}

#[derive(Debug, Clone)]
pub struct Autocalibrator {
    cfg: AutocalConfig,
    estimate: CalibrationEstimate,
    enabled: bool,
}

impl Autocalibrator {
    pub fn new(cfg: AutocalConfig) -> Self {
        Self { estimate: CalibrationEstimate::new(cfg.window), cfg, enabled: true }
    }

    pub fn config(&self) -> &AutocalConfig {
        &self.cfg
    }

    pub fn estimate(&self) -> &CalibrationEstimate {
        &self.estimate
    }

    pub fn eps(&self) -> Offset2D {
        self.estimate.eps()
    }

    /// Freezes or resumes updates. A frozen calibrator keeps applying its
    /// current correction.
    pub fn set_enabled(&mut self, enabled: bool) {
        self.enabled = enabled;
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn reset(&mut self) {
        self.estimate.reset();
    }

    /// Whether `event` passes the reading gate for `ctx`. Uses the raw sample
    /// for the above-keyboard test and the fixation centroid for the distance.
    pub fn gate(&self, event: &GazeEvent, ctx: &ReadingContext) -> bool {
        if ctx.n_char == 0 || event.sample.y >= ctx.text_box_bottom {
            return false;
        }
        match event.fixation_centroid() {
            Some(c) => in_calibration_zone(c, ctx, self.cfg.tau),
            None => false,
        }
    }

    pub fn process(&mut self, event: &GazeEvent, ctx: &ReadingContext) -> Calibrated {
        let zone_hit = self.gate(event, ctx);
        let mut updated = false;
        if zone_hit && self.enabled {
            if let (Some(c), Some(target)) = (event.fixation_centroid(), ctx.last_char_center) {
                self.estimate.push_delta(Offset2D::between(c, target), self.cfg.bound);
                updated = true;
            }
        }
        let eps = self.estimate.eps();
        Calibrated { point: event.sample.point().offset_by(eps), eps, zone_hit, updated }
    }
}

/// Per-sample telemetry row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t_ms: Millis,
    pub raw_x: f64,
    pub raw_y: f64,
    pub cal_x: f64,
    pub cal_y: f64,
    pub eps_x: f64,
    pub eps_y: f64,
    pub zone_hit: bool,
    pub updated: bool,
}

impl TelemetryRecord {
    pub fn new(event: &GazeEvent, cal: &Calibrated) -> Self {
        Self {
            t_ms: event.sample.t,
            raw_x: event.sample.x,
            raw_y: event.sample.y,
            cal_x: cal.point.x,
            cal_y: cal.point.y,
            eps_x: cal.eps.dx,
            eps_y: cal.eps.dy,
            zone_hit: cal.zone_hit,
            updated: cal.updated,
        }
    }
}
