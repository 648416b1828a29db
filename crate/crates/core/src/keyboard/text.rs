use serde::{Deserialize, Serialize};

use super::layout::{KeyLabel, KeyboardLayout};
use crate::types::Point;

/// Contents of the text box.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBuffer {
    content: String,
    backspace_count: u32,
}

impl TextBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn as_str(&self) -> &str {
        &self.content
    }

    pub fn n_char(&self) -> usize {
        self.content.chars().count()
    }

    pub fn backspace_count(&self) -> u32 {
        self.backspace_count
    }

    /// Appends the key's character, or deletes one for BACKSPACE. Backspace on
    /// an empty buffer still counts.
    pub fn apply(&mut self, label: KeyLabel) {
        match label.typed_char() {
            Some(c) => self.content.push(c),
            None => {
                self.content.pop();
                self.backspace_count += 1;
            }
        }
    }

    pub fn last_char_center(&self, layout: &KeyboardLayout) -> Option<Point> {
        layout.char_center(self.n_char())
    }
}
