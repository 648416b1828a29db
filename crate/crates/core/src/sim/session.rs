use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tracker::TrackerModel;
use super::user::{SimUser, UserMode, UserParams, UserView};
use super::SimError;
use crate::autocal::{Autocalibrator, TelemetryRecord};
use crate::config::Settings;
use crate::fixation::FixationFilter;
use crate::keyboard::{KeyActivation, KeyLabel, KeyboardEngine, KeyboardLayout};
use crate::types::{Millis, Offset2D, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// Fixation filter plus reading-gated autocalibration.
    Eyeo,
    /// Raw tracker coordinates.
    Control,
}

impl System {
    pub const ALL: [System; 2] = [System::Eyeo, System::Control];

    pub fn index(self) -> usize {
        match self {
            System::Eyeo => 0,
            System::Control => 1,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            System::Eyeo => "eyeo",
            System::Control => "control",
        })
    }
}

impl FromStr for System {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eyeo" => Ok(System::Eyeo),
            "control" => Ok(System::Control),
            other => Err(format!("unknown system {other:?} (expected eyeo or control)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub phrase: String,
    pub injected_offset: Offset2D,
    pub system: System,
    pub timeout_ms: Millis,
    pub seed: u64,
}

/// One telemetry row of a simulated session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionTelemetry {
    #[serde(flatten)]
    pub calib: TelemetryRecord,
    pub mode: UserMode,
    pub activation: Option<KeyLabel>,
    pub intent_x: f64,
    pub intent_y: f64,
    pub true_x: f64,
    pub true_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub typed: String,
    pub duration_ms: Millis,
    pub backspaces: u32,
    pub aborted: bool,
    pub event_log: Vec<SessionTelemetry>,
    pub updates_applied: u64,
    pub final_eps: Offset2D,
    /// Length of the longest prefix of `typed` that matches the phrase.
    pub correct_chars: usize,
}

enum Pipeline {
    Eyeo { filter: FixationFilter, autocal: Autocalibrator },
    Control,
}

/// Runs sessions against fixed settings and layout.
#[derive(Debug, Clone, Copy)]
pub struct SessionRunner<'a> {
    pub settings: &'a Settings,
    pub layout: &'a KeyboardLayout,
    pub record_log: bool,
}

/// Seeds for the tracker and the user are drawn from separate ChaCha streams
/// of the session seed.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn validate_phrase(phrase: &str, layout: &KeyboardLayout) -> Result<(), SimError> {
    if phrase.is_empty() {
        return Err(SimError::EmptyPhrase);
    }
    if let Some(c) = phrase.chars().find(|&c| !layout.can_type(c)) {
        return Err(SimError::Untypeable { phrase: phrase.to_string(), ch: c });
    }
    Ok(())
}

fn common_prefix_len(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

impl<'a> SessionRunner<'a> {
    pub fn new(settings: &'a Settings, layout: &'a KeyboardLayout) -> Self {
        Self { settings, layout, record_log: true }
    }

    pub fn run(&self, spec: &SessionSpec, user_params: &UserParams) -> Result<SessionResult, SimError> {
        validate_phrase(&spec.phrase, self.layout)?;
        let settings = self.settings.validate().map_err(|e| SimError::Config(e.to_string()))?;
        user_params.validate().map_err(SimError::Config)?;

        let mut tracker = TrackerModel::new(spec.injected_offset, settings.tracker, spec.seed);
        let mut user = SimUser::new(*user_params, &spec.phrase, self.layout, stream_rng(spec.seed, 1));
        let mut keyboard = KeyboardEngine::new(self.layout.clone(), settings.dwell);
        let mut pipeline = match spec.system {
            System::Eyeo => Pipeline::Eyeo {
                filter: FixationFilter::new(&settings.autocal, &settings.screen),
                autocal: Autocalibrator::new(settings.autocal),
            },
            System::Control => Pipeline::Control,
        };

        let mut log = Vec::new();
        let mut cursor: Option<Point> = None;
        let mut last_act: Option<KeyActivation> = None;
        let mut k = 0u64;
        let (aborted, duration_ms) = loop {
            let t = settings.screen.sample_time(k);
            if t >= spec.timeout_ms {
                break (true, spec.timeout_ms);
            }
            let view = UserView { cursor, activation: last_act, text: keyboard.text().as_str(), layout: self.layout };
            let gaze = user.step(t, &view);
            let raw = tracker.report(t, gaze);
            let calib = match &mut pipeline {
                Pipeline::Eyeo { filter, autocal } => {
                    let event = filter.push(raw)?;
                    let cal = autocal.process(&event, &keyboard.reading_context());
                    TelemetryRecord::new(&event, &cal)
                }
                Pipeline::Control => TelemetryRecord {
                    t_ms: t,
                    raw_x: raw.x,
                    raw_y: raw.y,
                    cal_x: raw.x,
                    cal_y: raw.y,
                    eps_x: 0.0,
                    eps_y: 0.0,
                    zone_hit: false,
                    updated: false,
                },
            };
            let shown = Point::new(calib.cal_x, calib.cal_y);
            let act = keyboard.tick(shown, t)?;
            if self.record_log {
                log.push(SessionTelemetry {
                    calib,
                    mode: user.mode(),
                    activation: act.map(|a| a.label),
                    intent_x: user.intent().x,
                    intent_y: user.intent().y,
                    true_x: gaze.x,
                    true_y: gaze.y,
                });
            }
            cursor = Some(shown);
            last_act = act;
            if act.is_some() && keyboard.text().as_str() == spec.phrase {
                break (false, t);
            }
            k += 1;
        };

        let (updates_applied, final_eps) = match &pipeline {
            Pipeline::Eyeo { autocal, .. } => (autocal.estimate().n_updates(), autocal.eps()),
            Pipeline::Control => (0, Offset2D::ZERO),
        };
        let typed = keyboard.text().as_str().to_string();
        Ok(SessionResult {
            correct_chars: common_prefix_len(&typed, &spec.phrase),
            typed,
            duration_ms,
            backspaces: keyboard.text().backspace_count(),
            aborted,
            event_log: log,
            updates_applied,
            final_eps,
        })
    }
}

/// Runs one session with the user parameters from `settings`.
pub fn run_session(
    spec: &SessionSpec,
    settings: &Settings,
    layout: &KeyboardLayout,
) -> Result<SessionResult, SimError> {
    SessionRunner::new(settings, layout).run(spec, &settings.user)
}
