use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::types::{GazeSample, Millis, Offset2D, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Per-axis Gaussian measurement noise, pixels.
    pub noise_std: f64,
    /// Correlation between the noise of successive samples. Trackers
    /// low-pass their output, so frame-to-frame jitter is smaller than the
    /// overall spread.
    pub noise_correlation: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self { noise_std: 3.0, noise_correlation: 0.8 }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err("noise_std must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return Err("noise_correlation must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// A uniformly miscalibrated tracker.
///
/// The injected offset is expressed in the same sense as the calibrator's
/// correction: `reported = true − offset + noise`, so a perfect calibrator
/// converges to `eps = offset`.
///
/// Noise is a stationary first-order autoregressive process per axis:
/// `n_k = ρ n_{k−1} + √(1 − ρ²) z_k` with `z_k ~ N(0, σ²)`, so every sample
/// is marginally `N(0, σ²)`.
#[derive(Debug, Clone)]
pub struct TrackerModel {
    offset: Offset2D,
    noise: Option<Normal<f64>>,
    rho: f64,
    state: Option<(f64, f64)>,
    rng: ChaCha8Rng,
}

impl TrackerModel {
    pub fn new(offset: Offset2D, params: TrackerParams, seed: u64) -> Self {
        let noise = (params.noise_std > 0.0).then(|| Normal::new(0.0, params.noise_std).expect("valid std"));
        Self { offset, noise, rho: params.noise_correlation, state: None, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn offset(&self) -> Offset2D {
        self.offset
    }

    pub fn report(&mut self, t: Millis, gaze: Point) -> GazeSample {
        let (nx, ny) = match &self.noise {
            Some(n) => {
                let z = (n.sample(&mut self.rng), n.sample(&mut self.rng));
                let next = match self.state {
                    None => z,
                    Some((px, py)) => {
                        let k = (1.0 - self.rho * self.rho).sqrt();
                        (self.rho * px + k * z.0, self.rho * py + k * z.1)
                    }
                };
                self.state = Some(next);
                next
            }
            None => (0.0, 0.0),
        };
        GazeSample { t, x: gaze.x - self.offset.dx + nx, y: gaze.y - self.offset.dy + ny }
    }
}
