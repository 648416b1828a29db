//! Phrase corpus: UTF-8 text, one phrase per line.

use std::path::Path;

use super::session::validate_phrase;
use super::SimError;
use crate::keyboard::KeyboardLayout;

pub const BUNDLED_PHRASES: &str = include_str!("../../data/phrases.txt");

/// Parses a corpus, skipping blank lines. Every phrase must be typeable on
/// `layout`.
pub fn parse_phrases(text: &str, layout: &KeyboardLayout) -> Result<Vec<String>, SimError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let phrase = line.trim();
        if phrase.is_empty() {
            continue;
        }
        validate_phrase(phrase, layout)?;
        out.push(phrase.to_string());
    }
    Ok(out)
}

pub fn load_phrases(path: impl AsRef<Path>, layout: &KeyboardLayout) -> Result<Vec<String>, SimError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SimError::Io(format!("cannot read phrases {}: {e}", path.display())))?;
    parse_phrases(&text, layout)
}

pub fn bundled_phrases(layout: &KeyboardLayout) -> Result<Vec<String>, SimError> {
    parse_phrases(BUNDLED_PHRASES, layout)
}
