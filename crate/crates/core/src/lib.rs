//! Seamless gaze autocalibration for dwell-based gaze typing.
//!
//! The engine filters a raw gaze stream into fixations, corrects it with an
//! offset learned whenever the user reads back the last typed character, and
//! drives a dwell keyboard with the corrected coordinates. A closed-loop
//! simulator reproduces the typing study; a line-delimited JSON service
//! exposes the live engine to external clients.

pub mod autocal;
pub mod config;
pub mod fixation;
pub mod keyboard;
pub mod metrics;
pub mod service;
pub mod sim;
pub mod stats;
pub mod trace;
pub mod types;

pub use autocal::{in_calibration_zone, Autocalibrator, Calibrated, CalibrationEstimate, ReadingContext, TelemetryRecord};
pub use config::Settings;
pub use fixation::{FixationFilter, GazeEvent, GazeEventKind};
pub use keyboard::{KeyLabel, KeyboardEngine, KeyboardLayout};
pub use types::{validate_config, AutocalConfig, GazeSample, Millis, Offset2D, Point, ScreenConfig};
