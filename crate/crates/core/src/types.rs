//! Shared domain types.
//!
//! All positions are screen pixels with the origin at the top-left corner and
//! `y` increasing downward, so the text box at the top of the screen has the
//! smallest `y` values. Timestamps are integer milliseconds and velocities are
//! pixels per millisecond.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds on a monotonic clock.
pub type Millis = i64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("tau must be positive")]
    NonPositiveTau,
    #[error("window must be ≥ 1")]
    EmptyWindow,
    #[error("bound must be non-negative")]
    NegativeBound,
    #[error("fixation_min_duration must be positive")]
    NonPositiveFixationDuration,
    #[error("saccade_velocity_threshold must be positive")]
    NonPositiveVelocityThreshold,
    #[error("screen width must be positive")]
    NonPositiveWidth,
    #[error("screen height must be positive")]
    NonPositiveHeight,
    #[error("sample_rate must be positive")]
    NonPositiveSampleRate,
    #[error("{0} must be finite")]
    NotFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("non-monotonic timestamp: {t} ms does not follow {prev} ms")]
    NonMonotonic { prev: Millis, t: Millis },
    #[error("sample coordinates must be finite")]
    NotFinite,
}

/// A point in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset_by(self, o: Offset2D) -> Point {
        Point::new(self.x + o.dx, self.y + o.dy)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A displacement in screen pixels. Holds both calibration corrections and
/// raw reading deltas.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Offset2D {
    pub dx: f64,
    pub dy: f64,
}

impl Offset2D {
    pub const ZERO: Offset2D = Offset2D { dx: 0.0, dy: 0.0 };

    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    /// Displacement that carries `from` onto `to`.
    pub fn between(from: Point, to: Point) -> Self {
        Self::new(to.x - from.x, to.y - from.y)
    }

    pub fn norm(self) -> f64 {
        self.dx.hypot(self.dy)
    }

    /// Componentwise clamp into `[-bound, bound]`.
    pub fn clip(self, bound: f64) -> Self {
        Self::new(self.dx.clamp(-bound, bound), self.dy.clamp(-bound, bound))
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.dx * k, self.dy * k)
    }

    pub fn is_finite(self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }
}

impl std::ops::Add for Offset2D {
    type Output = Offset2D;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.dx + rhs.dx, self.dy + rhs.dy)
    }
}

impl std::ops::Sub for Offset2D {
    type Output = Offset2D;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.dx - rhs.dx, self.dy - rhs.dy)
    }
}

impl std::ops::Neg for Offset2D {
    type Output = Offset2D;
    fn neg(self) -> Self {
        Self::new(-self.dx, -self.dy)
    }
}

/// One raw gaze coordinate as reported by the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: Millis,
    pub x: f64,
    pub y: f64,
}

impl GazeSample {
    pub fn new(t: Millis, x: f64, y: f64) -> Result<Self, SampleError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(SampleError::NotFinite);
        }
        Ok(Self { t, x, y })
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Checks that `self` may follow `prev` in a stream.
    pub fn check_follows(&self, prev: &GazeSample) -> Result<(), SampleError> {
        if self.t <= prev.t {
            return Err(SampleError::NonMonotonic { prev: prev.t, t: self.t });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenConfig {
    pub width: f64,
    pub height: f64,
    /// Tracker sampling rate in Hz.
    pub sample_rate: f64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self { width: 1920.0, height: 1080.0, sample_rate: 60.0 }
    }
}

impl ScreenConfig {
    /// Nominal time between samples in milliseconds.
    pub fn sample_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate
    }

    /// Timestamp of the `k`-th sample of a stream starting at zero.
    pub fn sample_time(&self, k: u64) -> Millis {
        (k as f64 * self.sample_period_ms()).round() as Millis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutocalConfig {
    /// Calibration-zone radius around the last typed character, pixels.
    pub tau: f64,
    /// Sliding window length, in deltas.
    pub window: usize,
    /// Maximum applied correction per axis, pixels.
    pub bound: f64,
    /// Minimum saccade-free duration before gaze counts as a fixation, ms.
    pub fixation_min_duration: Millis,
    /// Inter-sample speed above which a sample is a saccade, px/ms.
    pub saccade_velocity_threshold: f64,
}

impl Default for AutocalConfig {
    fn default() -> Self {
        Self {
            tau: 150.0,
            window: 64,
            bound: 200.0,
            fixation_min_duration: 100,
            saccade_velocity_threshold: 0.5,
        }
    }
}

/// Returns the configuration unchanged when every invariant holds, otherwise
/// the first violated invariant.
pub fn validate_config(
    cfg: AutocalConfig,
    screen: ScreenConfig,
) -> Result<(AutocalConfig, ScreenConfig), ConfigError> {
    if !cfg.tau.is_finite() {
        return Err(ConfigError::NotFinite("tau"));
    }
    if cfg.tau <= 0.0 {
        return Err(ConfigError::NonPositiveTau);
    }
    if cfg.window == 0 {
        return Err(ConfigError::EmptyWindow);
    }
    if !cfg.bound.is_finite() {
        return Err(ConfigError::NotFinite("bound"));
    }
    if cfg.bound < 0.0 {
        return Err(ConfigError::NegativeBound);
    }
    if cfg.fixation_min_duration <= 0 {
        return Err(ConfigError::NonPositiveFixationDuration);
    }
    if !cfg.saccade_velocity_threshold.is_finite() {
        return Err(ConfigError::NotFinite("saccade_velocity_threshold"));
    }
    if cfg.saccade_velocity_threshold <= 0.0 {
        return Err(ConfigError::NonPositiveVelocityThreshold);
    }
    // `!(x > 0)` also rejects NaN.
    if !(screen.width > 0.0) {
        return Err(ConfigError::NonPositiveWidth);
    }
    if !(screen.height > 0.0) {
        return Err(ConfigError::NonPositiveHeight);
    }
    if !(screen.sample_rate > 0.0) {
        return Err(ConfigError::NonPositiveSampleRate);
    }
    Ok((cfg, screen))
}
