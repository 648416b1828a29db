use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Point;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("keys {0} and {1} overlap")]
    Overlap(KeyLabel, KeyLabel),
    #[error("key {0} is not below the text box")]
    KeyAboveTextBox(KeyLabel),
    #[error("duplicate key {0}")]
    DuplicateKey(KeyLabel),
    #[error("key {0} has an empty or non-finite rectangle")]
    BadRect(KeyLabel),
    #[error("text box must have positive size")]
    BadTextBox,
    #[error("char_advance must be positive")]
    BadCharAdvance,
    #[error("unknown key label {0:?}")]
    UnknownLabel(String),
    #[error("cannot read layout {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse layout: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Axis-aligned rectangle with half-open extent `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x && p.x < self.x + self.w && p.y >= self.y && p.y < self.y + self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }

    fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }
}

/// What a key does when activated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KeyLabel {
    Char(char),
    Space,
    Backspace,
}

impl KeyLabel {
    /// Label of the key that types `c`, if any.
    pub fn for_char(c: char) -> Option<KeyLabel> {
        match c {
            ' ' => Some(KeyLabel::Space),
            c if c.is_ascii_lowercase() => Some(KeyLabel::Char(c)),
            _ => None,
        }
    }

    /// Character appended by this key, if it appends one.
    pub fn typed_char(self) -> Option<char> {
        match self {
            KeyLabel::Char(c) => Some(c),
            KeyLabel::Space => Some(' '),
            KeyLabel::Backspace => None,
        }
    }
}

impl fmt::Display for KeyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyLabel::Char(c) => write!(f, "{c}"),
            KeyLabel::Space => f.write_str("SPACE"),
            KeyLabel::Backspace => f.write_str("BACKSPACE"),
        }
    }
}

impl FromStr for KeyLabel {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SPACE" => Ok(KeyLabel::Space),
            "BACKSPACE" => Ok(KeyLabel::Backspace),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if !c.is_whitespace() && !c.is_control() => Ok(KeyLabel::Char(c)),
                    _ => Err(LayoutError::UnknownLabel(s.to_string())),
                }
            }
        }
    }
}

impl TryFrom<String> for KeyLabel {
    type Error = LayoutError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<KeyLabel> for String {
    fn from(l: KeyLabel) -> String {
        l.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyRegion {
    pub label: KeyLabel,
    pub rect: Rect,
}

impl KeyRegion {
    pub fn center(&self) -> Point {
        self.rect.center()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    char_advance: f64,
    text_box: Rect,
    keys: Vec<KeyRegion>,
}

/// Key geometry plus the text box the typed characters are drawn into.
///
/// Text is drawn monospaced from the left edge of the text box, one
/// `char_advance` per character, on the text box's vertical midline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutFile", into = "LayoutFile")]
pub struct KeyboardLayout {
    keys: Vec<KeyRegion>,
    text_box: Rect,
    char_advance: f64,
}

pub const DEFAULT_LAYOUT_TOML: &str = include_str!("../../data/qwerty.toml");

const KEY_SIZE: f64 = 120.0;
const GUTTER: f64 = 10.0;
const PITCH: f64 = KEY_SIZE + GUTTER;

impl KeyboardLayout {
    pub fn new(keys: Vec<KeyRegion>, text_box: Rect, char_advance: f64) -> Result<Self, LayoutError> {
        if !text_box.is_valid() {
            return Err(LayoutError::BadTextBox);
        }
        if !(char_advance > 0.0 && char_advance.is_finite()) {
            return Err(LayoutError::BadCharAdvance);
        }
        for (i, k) in keys.iter().enumerate() {
            if !k.rect.is_valid() {
                return Err(LayoutError::BadRect(k.label));
            }
            if k.rect.y < text_box.bottom() {
                return Err(LayoutError::KeyAboveTextBox(k.label));
            }
            for other in &keys[..i] {
                if other.label == k.label {
                    return Err(LayoutError::DuplicateKey(k.label));
                }
                if other.rect.overlaps(&k.rect) {
                    return Err(LayoutError::Overlap(other.label, k.label));
                }
            }
        }
        Ok(Self { keys, text_box, char_advance })
    }

    /// Three staggered QWERTY letter rows and a SPACE/BACKSPACE row of
    /// 120 px keys with 10 px gutters on a 1920×1080 screen, under a 240 px
    /// text box.
    pub fn qwerty() -> Self {
        let mut keys = Vec::new();
        let rows = [("qwertyuiop", 315.0), ("asdfghjkl", 380.0), ("zxcvbnm", 445.0)];
        let top = 530.0;
        for (r, (letters, x0)) in rows.iter().enumerate() {
            let y = top + r as f64 * PITCH;
            for (i, c) in letters.chars().enumerate() {
                keys.push(KeyRegion {
                    label: KeyLabel::Char(c),
                    rect: Rect::new(x0 + i as f64 * PITCH, y, KEY_SIZE, KEY_SIZE),
                });
            }
        }
        let y = top + 3.0 * PITCH;
        keys.push(KeyRegion { label: KeyLabel::Space, rect: Rect::new(445.0, y, 6.0 * PITCH - GUTTER, KEY_SIZE) });
        keys.push(KeyRegion { label: KeyLabel::Backspace, rect: Rect::new(1225.0, y, 2.0 * PITCH - GUTTER, KEY_SIZE) });
        Self::new(keys, Rect::new(100.0, 0.0, 1720.0, 240.0), 24.0).expect("built-in layout is valid")
    }

    pub fn from_toml(s: &str) -> Result<Self, LayoutError> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("layout serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LayoutError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|source| LayoutError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&s)
    }

    pub fn keys(&self) -> &[KeyRegion] {
        &self.keys
    }

    pub fn text_box(&self) -> Rect {
        self.text_box
    }

    pub fn text_box_bottom(&self) -> f64 {
        self.text_box.bottom()
    }

    pub fn char_advance(&self) -> f64 {
        self.char_advance
    }

    pub fn key(&self, label: KeyLabel) -> Option<&KeyRegion> {
        self.keys.iter().find(|k| k.label == label)
    }

    pub fn hit_test_index(&self, p: Point) -> Option<usize> {
        self.keys.iter().position(|k| k.rect.contains(p))
    }

    pub fn hit_test(&self, p: Point) -> Option<&KeyRegion> {
        self.hit_test_index(p).map(|i| &self.keys[i])
    }

    /// Centre of the `n_char`-th drawn character (1-based); `None` for an
    /// empty text box.
    pub fn char_center(&self, n_char: usize) -> Option<Point> {
        (n_char > 0).then(|| {
            Point::new(
                self.text_box.x + (n_char as f64 - 0.5) * self.char_advance,
                self.text_box.y + self.text_box.h / 2.0,
            )
        })
    }

    /// Whether `c` has a key on this layout.
    pub fn can_type(&self, c: char) -> bool {
        KeyLabel::for_char(c).is_some_and(|l| self.key(l).is_some())
    }
}

impl Default for KeyboardLayout {
    fn default() -> Self {
        Self::qwerty()
    }
}

impl TryFrom<LayoutFile> for KeyboardLayout {
    type Error = LayoutError;
    fn try_from(f: LayoutFile) -> Result<Self, Self::Error> {
        KeyboardLayout::new(f.keys, f.text_box, f.char_advance)
    }
}

impl From<KeyboardLayout> for LayoutFile {
    fn from(l: KeyboardLayout) -> Self {
        LayoutFile { char_advance: l.char_advance, text_box: l.text_box, keys: l.keys }
    }
}
