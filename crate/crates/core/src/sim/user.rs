//! Behavioural model of a gaze typist.
//!
//! While typing, the user looks at the key they need. If the cursor they see
//! is not on that key after a reaction lag, they shift their gaze against the
//! error they believe the tracker has, which they learn with a first-order
//! update from the cursor-versus-gaze discrepancy. While reading back the text
//! box they look straight at the last typed character and make no
//! compensation.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::keyboard::{KeyActivation, KeyLabel, KeyboardLayout};
use crate::types::{Millis, Offset2D, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserParams {
    /// Learning gain applied to each observed cursor discrepancy.
    pub gain: f64,
    /// Probability of reading back the text box after an activation.
    pub p_read: f64,
    /// Delay between looking at a target and reacting to the cursor, and
    /// between successive observations.
    pub reaction_lag_ms: Millis,
    /// Per-fixation aiming error, pixels per axis.
    pub aim_jitter_std: f64,
    pub read_duration_ms: Millis,
    /// Pause after an activation before moving to the next key.
    pub plan_ms: Millis,
    /// Fraction of the believed error already applied by the first saccade to
    /// a new key.
    pub landing_compensation: f64,
    /// Relative spread of per-participant parameters in experiments.
    pub heterogeneity: f64,
}

impl Default for UserParams {
    fn default() -> Self {
        Self {
            gain: 0.3,
            p_read: 0.4,
            reaction_lag_ms: 250,
            aim_jitter_std: 3.0,
            read_duration_ms: 400,
            plan_ms: 200,
            landing_compensation: 0.0,
            heterogeneity: 0.3,
        }
    }
}

impl UserParams {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gain) {
            return Err("gain must lie in [0, 1]".into());
        }
        if !unit(self.p_read) {
            return Err("p_read must lie in [0, 1]".into());
        }
        if !unit(self.landing_compensation) {
            return Err("landing_compensation must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.heterogeneity) {
            return Err("heterogeneity must lie in [0, 1)".into());
        }
        if !(self.aim_jitter_std >= 0.0 && self.aim_jitter_std.is_finite()) {
            return Err("aim_jitter_std must be finite and non-negative".into());
        }
        if self.reaction_lag_ms < 0 || self.plan_ms < 0 {
            return Err("reaction_lag_ms and plan_ms must be non-negative".into());
        }
        if self.read_duration_ms <= 0 {
            return Err("read_duration_ms must be positive".into());
        }
        Ok(())
    }

    /// Draws one participant around these population values.
    pub fn sample_participant<R: Rng + ?Sized>(&self, rng: &mut R) -> UserParams {
        let h = self.heterogeneity;
        let mut f = || 1.0 + h * (2.0 * rng.random::<f64>() - 1.0);
        UserParams {
            gain: (self.gain * f()).min(1.0),
            reaction_lag_ms: (self.reaction_lag_ms as f64 * f()).round() as Millis,
            plan_ms: (self.plan_ms as f64 * f()).round() as Millis,
            aim_jitter_std: self.aim_jitter_std * f(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UserMode {
    Typing,
    Reading,
}

/// What the user can see on a given frame.
#[derive(Debug, Clone, Copy)]
pub struct UserView<'a> {
    /// Cursor drawn on the previous frame.
    pub cursor: Option<Point>,
    /// Activation reported on the previous frame.
    pub activation: Option<KeyActivation>,
    pub text: &'a str,
    pub layout: &'a KeyboardLayout,
}

/// Key the user needs next to turn `typed` into `phrase`.
pub fn next_needed_key(phrase: &str, typed: &str) -> Option<KeyLabel> {
    if typed == phrase {
        return None;
    }
    match phrase.strip_prefix(typed) {
        Some(rest) => rest.chars().next().and_then(KeyLabel::for_char),
        None => Some(KeyLabel::Backspace),
    }
}

#[derive(Debug, Clone)]
pub struct SimUser<R> {
    params: UserParams,
    phrase: String,
    rng: R,
    jitter_dist: Option<Normal<f64>>,
    mode: UserMode,
    target: Option<KeyLabel>,
    intent: Point,
    aim: Point,
    jitter: Offset2D,
    perceived_error: Offset2D,
    busy_until: Millis,
    next_obs_t: Millis,
    last_gaze: Point,
    done: bool,
}

impl<R: Rng> SimUser<R> {
    pub fn new(params: UserParams, phrase: &str, layout: &KeyboardLayout, rng: R) -> Self {
        let tb = layout.text_box();
        let rest = Point::new(tb.x + tb.w / 2.0, tb.bottom() + 100.0);
        let jitter_dist = (params.aim_jitter_std > 0.0).then(|| Normal::new(0.0, params.aim_jitter_std).unwrap());
        Self {
            params,
            phrase: phrase.to_string(),
            rng,
            jitter_dist,
            mode: UserMode::Typing,
            target: None,
            intent: rest,
            aim: rest,
            jitter: Offset2D::ZERO,
            perceived_error: Offset2D::ZERO,
            busy_until: params.plan_ms,
            next_obs_t: 0,
            last_gaze: rest,
            done: false,
        }
    }

    pub fn mode(&self) -> UserMode {
        self.mode
    }

    /// Point the user means to look at, before compensation and jitter.
    pub fn intent(&self) -> Point {
        self.intent
    }

    pub fn target(&self) -> Option<KeyLabel> {
        self.target
    }

    pub fn perceived_error(&self) -> Offset2D {
        self.perceived_error
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Advances to time `t` and returns where the eyes actually point.
    pub fn step(&mut self, t: Millis, view: &UserView<'_>) -> Point {
        if view.activation.is_some() {
            self.on_activation(t, view);
        }
        match self.mode {
            UserMode::Reading if t >= self.busy_until => self.acquire_next(t, view),
            UserMode::Typing if self.target.is_none() && !self.done && t >= self.busy_until => {
                self.acquire_next(t, view)
            }
            UserMode::Typing if self.target.is_some() && t >= self.next_obs_t => self.observe(t, view),
            _ => {}
        }
        self.last_gaze = self.aim.offset_by(self.jitter);
        self.last_gaze
    }

    fn redraw_jitter(&mut self) {
        self.jitter = match &self.jitter_dist {
            Some(n) => Offset2D::new(n.sample(&mut self.rng), n.sample(&mut self.rng)),
            None => Offset2D::ZERO,
        };
    }

    fn on_activation(&mut self, t: Millis, view: &UserView<'_>) {
        self.target = None;
        if view.text == self.phrase {
            self.done = true;
            return;
        }
        let n_char = view.text.chars().count();
        if n_char > 0 && self.rng.random_bool(self.params.p_read) {
            self.mode = UserMode::Reading;
            self.intent = view.layout.char_center(n_char).expect("non-empty text");
            self.aim = self.intent;
            self.redraw_jitter();
            self.busy_until = t + self.params.read_duration_ms;
        } else {
            self.mode = UserMode::Typing;
            self.busy_until = t + self.params.plan_ms;
        }
    }

    fn acquire_next(&mut self, t: Millis, view: &UserView<'_>) {
        self.mode = UserMode::Typing;
        let Some(label) = next_needed_key(&self.phrase, view.text) else {
            self.done = true;
            return;
        };
        let key = view.layout.key(label).expect("phrase validated against layout");
        self.target = Some(label);
        self.intent = key.center();
        self.aim = self.intent.offset_by(-self.perceived_error.scale(self.params.landing_compensation));
        self.redraw_jitter();
        self.next_obs_t = t + self.params.reaction_lag_ms;
    }

    fn observe(&mut self, t: Millis, view: &UserView<'_>) {
        self.next_obs_t = t + self.params.reaction_lag_ms;
        let Some(cursor) = view.cursor else { return };
        let seen = Offset2D::between(self.last_gaze, cursor);
        self.perceived_error = self.perceived_error + (seen - self.perceived_error).scale(self.params.gain);
        let on_target = self
            .target
            .and_then(|l| view.layout.key(l))
            .is_some_and(|k| k.rect.contains(cursor));
        if !on_target {
            self.aim = self.intent.offset_by(-self.perceived_error);
            self.redraw_jitter();
        }
    }
}
