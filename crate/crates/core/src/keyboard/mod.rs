//! Dwell-activated on-screen keyboard.

mod dwell;
mod layout;
mod text;

pub use dwell::{DwellMachine, DwellPhase, DwellState, DwellTimeError, DwellTiming, KeyActivation};
pub use layout::{KeyLabel, KeyRegion, KeyboardLayout, LayoutError, Rect, DEFAULT_LAYOUT_TOML};
pub use text::TextBuffer;

use serde::{Deserialize, Serialize};

use crate::autocal::ReadingContext;
use crate::types::{Millis, Point};

/// Layout, dwell machine and text box advanced together.
#[derive(Debug, Clone)]
pub struct KeyboardEngine {
    layout: KeyboardLayout,
    dwell: DwellMachine,
    text: TextBuffer,
}

/// Immutable view for rendering and telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyboardSnapshot {
    pub phase: DwellPhase,
    pub key: Option<KeyLabel>,
    pub progress: f64,
    pub text: String,
}

impl KeyboardEngine {
    pub fn new(layout: KeyboardLayout, timing: DwellTiming) -> Self {
        Self { layout, dwell: DwellMachine::new(timing), text: TextBuffer::new() }
    }

    pub fn layout(&self) -> &KeyboardLayout {
        &self.layout
    }

    pub fn text(&self) -> &TextBuffer {
        &self.text
    }

    pub fn dwell(&self) -> &DwellState {
        self.dwell.state()
    }

    pub fn dwell_timing(&self) -> &DwellTiming {
        self.dwell.timing()
    }

    /// Advances the dwell machine and applies any activation to the text.
    pub fn tick(&mut self, point: Point, t: Millis) -> Result<Option<KeyActivation>, DwellTimeError> {
        let act = self.dwell.tick(point, t, &self.layout)?;
        if let Some(a) = act {
            self.text.apply(a.label);
        }
        Ok(act)
    }

    pub fn reading_context(&self) -> ReadingContext {
        ReadingContext {
            last_char_center: self.text.last_char_center(&self.layout),
            n_char: self.text.n_char(),
            text_box_bottom: self.layout.text_box_bottom(),
        }
    }

    pub fn snapshot(&self) -> KeyboardSnapshot {
        let st = self.dwell.state();
        KeyboardSnapshot {
            phase: st.phase,
            key: st.target_key.map(|k| self.layout.keys()[k].label),
            progress: st.progress,
            text: self.text.as_str().to_string(),
        }
    }
}
