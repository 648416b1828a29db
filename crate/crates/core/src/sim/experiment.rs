//! Counterbalanced within-subjects experiment.
//!
//! Every simulated participant types one phrase per (system, offset) pair.
//! System order alternates between participants and the offset order is a
//! Latin-square rotation by participant index. No phrase is used twice.
//!
//! Seeds: participant `p` gets parameters from `seed + p·10007` (stream 2);
//! its session for system `s` and offset `o` uses `seed + p·10007 + 5s + o`.
//! Session seeds depend only on the (system, offset) pair, never on running
//! order, so reordering the protocol leaves every session unchanged.
//!
//! Rows are listed by participant, then system (EYEO first), then running
//! order within the system block.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::session::{stream_rng, SessionRunner, SessionSpec, System};
use super::SimError;
use crate::config::Settings;
use crate::keyboard::KeyboardLayout;
use crate::metrics::typing_speed;
use crate::types::{Millis, Offset2D};

/// No offset, ±75 px in x, ±75 px in y.
pub const STUDY_OFFSETS: [Offset2D; 5] = [
    Offset2D::new(0.0, 0.0),
    Offset2D::new(75.0, 0.0),
    Offset2D::new(-75.0, 0.0),
    Offset2D::new(0.0, 75.0),
    Offset2D::new(0.0, -75.0),
];

pub const PARTICIPANT_SEED_STRIDE: u64 = 10_007;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec {
    pub participants: usize,
    pub seed: u64,
    /// Swap which participants start with which system.
    pub flip_system_order: bool,
}

impl ExperimentSpec {
    pub fn new(participants: usize, seed: u64) -> Self {
        Self { participants, seed, flip_system_order: false }
    }
}

/// One row of `sessions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRow {
    pub participant: usize,
    pub system: System,
    pub offset_dx: f64,
    pub offset_dy: f64,
    pub phrase: String,
    pub chars_per_min: f64,
    pub backspaces: u32,
    pub aborted: bool,
    pub duration_ms: Millis,
    pub updates_applied: u64,
    /// Correctly typed characters, used to recompute partial speed.
    #[serde(skip)]
    pub correct_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentTable {
    pub rows: Vec<SessionRow>,
}

impl ExperimentTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut wtr = csv::Writer::from_writer(w);
        for row in &self.rows {
            wtr.serialize(row).map_err(|e| SimError::Io(e.to_string()))?;
        }
        wtr.flush().map_err(|e| SimError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// System order for participant `p`.
pub fn system_order(p: usize, flip: bool) -> [System; 2] {
    if (p % 2 == 0) != flip {
        [System::Eyeo, System::Control]
    } else {
        [System::Control, System::Eyeo]
    }
}

/// Offset indices in running order for participant `p`.
pub fn offset_order(p: usize) -> [usize; 5] {
    let n = STUDY_OFFSETS.len();
    std::array::from_fn(|i| (i + p) % n)
}

pub fn session_seed(seed: u64, participant: usize, system: System, offset_idx: usize) -> u64 {
    seed.wrapping_add((participant as u64).wrapping_mul(PARTICIPANT_SEED_STRIDE))
        .wrapping_add((system.index() * STUDY_OFFSETS.len() + offset_idx) as u64)
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    settings: &Settings,
    layout: &KeyboardLayout,
    phrases: &[String],
) -> Result<ExperimentTable, SimError> {
    if spec.participants < 2 {
        return Err(SimError::TooFewParticipants);
    }
    let per_participant = System::ALL.len() * STUDY_OFFSETS.len();
    let needed = spec.participants * per_participant;
    if phrases.len() < needed {
        return Err(SimError::CorpusExhausted { needed, available: phrases.len() });
    }
    let mut order: Vec<usize> = (0..phrases.len()).collect();
    order.shuffle(&mut stream_rng(spec.seed, 3));

    let mut runner = SessionRunner::new(settings, layout);
    runner.record_log = false;

    let mut rows = Vec::with_capacity(needed);
    for p in 0..spec.participants {
        let base_seed = spec.seed.wrapping_add((p as u64).wrapping_mul(PARTICIPANT_SEED_STRIDE));
        let user = settings.user.sample_participant(&mut stream_rng(base_seed, 2));
        for system in system_order(p, spec.flip_system_order) {
            for o in offset_order(p) {
                let phrase = &phrases[order[p * per_participant + system.index() * STUDY_OFFSETS.len() + o]];
                let session = SessionSpec {
                    phrase: phrase.clone(),
                    injected_offset: STUDY_OFFSETS[o],
                    system,
                    timeout_ms: settings.session.timeout_ms,
                    seed: session_seed(spec.seed, p, system, o),
                };
                let r = runner.run(&session, &user)?;
                rows.push(SessionRow {
                    participant: p,
                    system,
                    offset_dx: session.injected_offset.dx,
                    offset_dy: session.injected_offset.dy,
                    phrase: phrase.clone(),
                    chars_per_min: typing_speed(r.correct_chars, r.duration_ms),
                    backspaces: r.backspaces,
                    aborted: r.aborted,
                    duration_ms: r.duration_ms,
                    updates_applied: r.updates_applied,
                    correct_chars: r.correct_chars,
                });
            }
        }
    }
    // Canonical order: participant, then system, then running order.
    rows.sort_by_key(|r| (r.participant, r.system.index()));
    Ok(ExperimentTable { rows })
}
