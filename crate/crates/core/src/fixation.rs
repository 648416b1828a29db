//! Velocity-threshold fixation filter with a minimum-duration rule.
//!
//! Each incoming sample is compared with its predecessor. A sample whose
//! inter-sample speed exceeds the saccade threshold is a saccade sample and
//! restarts the fixation clock at its own timestamp. Slower samples are
//! absorbed into the current candidate; once the clock has run for at least
//! `fixation_min_duration` the candidate is promoted to a fixation.
//!
//! The first sample of a stream, and the first sample after a dropout of more
//! than three sample periods, have no usable predecessor. They open a fresh
//! candidate and are absorbed without a velocity check.

use serde::{Deserialize, Serialize};

use crate::types::{AutocalConfig, GazeSample, Millis, Point, SampleError, ScreenConfig};

/// Dropouts longer than this many nominal sample periods reset the candidate.
pub const DROPOUT_PERIODS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FixationPhase {
    Idle,
    Candidate,
    Fixating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GazeEventKind {
    SaccadeSample,
    /// Absorbed into a candidate that has not yet lasted long enough.
    CandidateSample,
    FixationStarted,
    FixationOngoing,
    /// A saccade interrupted a fixation. The event carries the final centroid
    /// of the fixation; the sample itself is a saccade sample.
    FixationEnded,
}

impl GazeEventKind {
    /// True for the kinds that report an active fixation.
    pub fn is_fixation(self) -> bool {
        matches!(self, GazeEventKind::FixationStarted | GazeEventKind::FixationOngoing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeEvent {
    pub kind: GazeEventKind,
    pub sample: GazeSample,
    pub centroid: Option<Point>,
    /// Speed from the previous sample in px/ms; `None` when the sample opened
    /// a fresh candidate.
    pub velocity: Option<f64>,
}

impl GazeEvent {
    /// Centroid for fixation kinds, `None` otherwise.
    pub fn fixation_centroid(&self) -> Option<Point> {
        if self.kind.is_fixation() {
            self.centroid
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationState {
    pub phase: FixationPhase,
    /// Start of the current saccade-free run.
    pub start_t: Millis,
    sum_x: f64,
    sum_y: f64,
    count: u64,
    pub last_sample: Option<GazeSample>,
}

impl Default for FixationState {
    fn default() -> Self {
        Self { phase: FixationPhase::Idle, start_t: 0, sum_x: 0.0, sum_y: 0.0, count: 0, last_sample: None }
    }
}

impl FixationState {
    /// Running mean of the samples absorbed into the current candidate.
    pub fn anchor(&self) -> Option<Point> {
        (self.count > 0).then(|| Point::new(self.sum_x / self.count as f64, self.sum_y / self.count as f64))
    }

    pub fn absorbed(&self) -> u64 {
        self.count
    }

    fn restart(&mut self, t: Millis) {
        self.phase = FixationPhase::Idle;
        self.start_t = t;
        self.sum_x = 0.0;
        self.sum_y = 0.0;
        self.count = 0;
    }

    fn absorb(&mut self, s: &GazeSample) {
        self.sum_x += s.x;
        self.sum_y += s.y;
        self.count += 1;
    }
}

#[derive(Debug, Clone)]
pub struct FixationFilter {
    velocity_threshold: f64,
    min_duration: Millis,
    dropout_ms: f64,
    state: FixationState,
}

impl FixationFilter {
    pub fn new(cfg: &AutocalConfig, screen: &ScreenConfig) -> Self {
        Self {
            velocity_threshold: cfg.saccade_velocity_threshold,
            min_duration: cfg.fixation_min_duration,
            dropout_ms: DROPOUT_PERIODS * screen.sample_period_ms(),
            state: FixationState::default(),
        }
    }

    pub fn state(&self) -> &FixationState {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state = FixationState::default();
    }

    /// Classifies one sample. Timestamps must strictly increase.
    pub fn push(&mut self, s: GazeSample) -> Result<GazeEvent, SampleError> {
        let st = &mut self.state;
        let prev = match st.last_sample {
            Some(prev) => {
                s.check_follows(&prev)?;
                Some(prev)
            }
            None => None,
        };

        let velocity = prev.and_then(|prev| {
            let dt = (s.t - prev.t) as f64;
            (dt <= self.dropout_ms).then(|| prev.point().distance(s.point()) / dt)
        });
        st.last_sample = Some(s);

        let Some(v) = velocity else {
            st.restart(s.t);
            st.absorb(&s);
            st.phase = FixationPhase::Candidate;
            return Ok(GazeEvent { kind: GazeEventKind::CandidateSample, sample: s, centroid: st.anchor(), velocity });
        };

        if v > self.velocity_threshold {
            let ended = (st.phase == FixationPhase::Fixating).then(|| st.anchor()).flatten();
            st.restart(s.t);
            let kind = if ended.is_some() { GazeEventKind::FixationEnded } else { GazeEventKind::SaccadeSample };
            return Ok(GazeEvent { kind, sample: s, centroid: ended, velocity });
        }

        st.absorb(&s);
        let kind = match st.phase {
            FixationPhase::Fixating => GazeEventKind::FixationOngoing,
            FixationPhase::Idle | FixationPhase::Candidate => {
                if s.t - st.start_t >= self.min_duration {
                    st.phase = FixationPhase::Fixating;
                    GazeEventKind::FixationStarted
                } else {
                    st.phase = FixationPhase::Candidate;
                    GazeEventKind::CandidateSample
                }
            }
        };
        Ok(GazeEvent { kind, sample: s, centroid: st.anchor(), velocity })
    }
}
