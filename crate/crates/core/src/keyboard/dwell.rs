use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layout::{KeyLabel, KeyboardLayout};
use crate::types::{Millis, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("non-monotonic dwell tick: {t} ms after {prev} ms")]
pub struct DwellTimeError {
    pub prev: Millis,
    pub t: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DwellTiming {
    /// Continuous on-key gaze before the dwell timer starts.
    pub arm_ms: Millis,
    /// Dwell timer length.
    pub dwell_ms: Millis,
    /// Post-activation feedback during which gaze is ignored.
    pub flash_ms: Millis,
}

impl Default for DwellTiming {
    fn default() -> Self {
        Self { arm_ms: 50, dwell_ms: 400, flash_ms: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DwellPhase {
    Idle,
    Arming,
    Dwelling,
    ActivatedFlash,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellState {
    pub phase: DwellPhase,
    /// Index into the layout's key list.
    pub target_key: Option<usize>,
    pub phase_start_t: Millis,
    pub progress: f64,
}

impl Default for DwellState {
    fn default() -> Self {
        Self { phase: DwellPhase::Idle, target_key: None, phase_start_t: 0, progress: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyActivation {
    pub key: usize,
    pub label: KeyLabel,
    pub t: Millis,
}

/// Arm-then-dwell activation state machine.
#[derive(Debug, Clone)]
pub struct DwellMachine {
    timing: DwellTiming,
    state: DwellState,
    last_t: Option<Millis>,
}

impl DwellMachine {
    pub fn new(timing: DwellTiming) -> Self {
        Self { timing, state: DwellState::default(), last_t: None }
    }

    pub fn state(&self) -> &DwellState {
        &self.state
    }

    pub fn timing(&self) -> &DwellTiming {
        &self.timing
    }

    fn enter(&mut self, hit: Option<usize>, t: Millis) {
        self.state = match hit {
            Some(k) => DwellState { phase: DwellPhase::Arming, target_key: Some(k), phase_start_t: t, progress: 0.0 },
            None => DwellState { phase_start_t: t, ..DwellState::default() },
        };
    }

    /// Advances the machine to time `t` with gaze at `point`.
    pub fn tick(
        &mut self,
        point: Point,
        t: Millis,
        layout: &KeyboardLayout,
    ) -> Result<Option<KeyActivation>, DwellTimeError> {
        if let Some(prev) = self.last_t {
            if t < prev {
                return Err(DwellTimeError { prev, t });
            }
        }
        self.last_t = Some(t);

        if self.state.phase == DwellPhase::ActivatedFlash {
            if t - self.state.phase_start_t < self.timing.flash_ms {
                return Ok(None);
            }
            self.state = DwellState { phase_start_t: t, ..DwellState::default() };
        }

        let hit = layout.hit_test_index(point);
        match self.state.phase {
            DwellPhase::Idle => {
                if hit.is_some() {
                    self.enter(hit, t);
                }
                Ok(None)
            }
            DwellPhase::Arming | DwellPhase::Dwelling if hit != self.state.target_key => {
                self.enter(hit, t);
                Ok(None)
            }
            DwellPhase::Arming => {
                if t - self.state.phase_start_t >= self.timing.arm_ms {
                    self.state.phase = DwellPhase::Dwelling;
                    self.state.phase_start_t += self.timing.arm_ms;
                    return Ok(self.advance_dwell(t, layout));
                }
                Ok(None)
            }
            DwellPhase::Dwelling => Ok(self.advance_dwell(t, layout)),
            DwellPhase::ActivatedFlash => unreachable!("flash handled above"),
        }
    }

    fn advance_dwell(&mut self, t: Millis, layout: &KeyboardLayout) -> Option<KeyActivation> {
        let elapsed = t - self.state.phase_start_t;
        self.state.progress = (elapsed as f64 / self.timing.dwell_ms as f64).clamp(0.0, 1.0);
        if elapsed < self.timing.dwell_ms {
            return None;
        }
        let key = self.state.target_key.expect("dwelling on a key");
        self.state = DwellState {
            phase: DwellPhase::ActivatedFlash,
            target_key: Some(key),
            phase_start_t: t,
            progress: 1.0,
        };
        Some(KeyActivation { key, label: layout.keys()[key].label, t })
    }
}

impl Default for DwellMachine {
    fn default() -> Self {
        Self::new(DwellTiming::default())
    }
}
