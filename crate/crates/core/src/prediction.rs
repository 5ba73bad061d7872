//! K-step trajectory predictors behind a uniform interface.
//!
//! The constant-velocity predictor extrapolates current human states; the
//! noisy oracle replays ground-truth futures with synthetic noise and exists
//! to stress the conformal layer.

use crate::geom::Vec2;
use crate::world::WorldState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// K future points per human, issued at a specific step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionSet {
    /// points[h][k-1] is the k-step-ahead predicted position of human h.
    pub points: Vec<Vec<Vec2>>,
    pub issued_at: u32,
    pub horizon: usize,
}

impl PredictionSet {
    pub fn human_count(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("ground-truth future has {available} frames, need {needed}")]
    FutureTooShort { available: usize, needed: usize },
}

/// Constant-velocity extrapolation: p_{h,k} = p_h + k * dt * v_h.
pub fn cv_predict(world: &WorldState, horizon: usize) -> PredictionSet {
    assert!(horizon >= 1, "horizon must be at least 1");
    let points = world
        .humans
        .iter()
        .map(|h| {
            (1..=horizon)
                .map(|k| h.position + h.velocity * (k as f64 * world.dt))
                .collect()
        })
        .collect();
    PredictionSet {
        points,
        issued_at: world.step_index,
        horizon,
    }
}

/// True future positions plus isotropic Gaussian noise.
///
/// `future[k-1][h]` must hold the ground-truth position of human h at step
/// `world.step_index + k`.
pub fn noisy_oracle_predict(
    world: &WorldState,
    horizon: usize,
    future: &[Vec<Vec2>],
    noise_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PredictionSet, PredictionError> {
    if horizon < 1 {
        return Err(PredictionError::ZeroHorizon);
    }
    if future.len() < horizon {
        return Err(PredictionError::FutureTooShort {
            available: future.len(),
            needed: horizon,
        });
    }
    let mut points = vec![Vec::with_capacity(horizon); world.humans.len()];
    for (k, frame) in future.iter().take(horizon).enumerate() {
        debug_assert_eq!(frame.len(), world.humans.len());
        for (h, &p) in frame.iter().enumerate() {
            let noise = Vec2::new(
                gaussian(rng) * noise_scale,
                gaussian(rng) * noise_scale,
            );
            points[h].push(p + noise);
        }
        let _ = k;
    }
    Ok(PredictionSet {
        points,
        issued_at: world.step_index,
        horizon,
    })
}

/// Standard normal draw (Box-Muller).
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform predictor interface used by the episode runner.
pub trait Predictor {
    fn predict(&mut self, world: &WorldState, horizon: usize) -> PredictionSet;
}

/// The rule-based predictor used at train and test time.
#[derive(Debug, Clone, Default)]
pub struct ConstantVelocity;

impl Predictor for ConstantVelocity {
    fn predict(&mut self, world: &WorldState, horizon: usize) -> PredictionSet {
        cv_predict(world, horizon)
    }
}

/// Replay-based predictor over a precomputed human trajectory table;
/// `frames[t][h]` is the position of human h at step t.
pub struct NoisyOracle {
    pub frames: Vec<Vec<Vec2>>,
    pub noise_scale: f64,
    pub rng: ChaCha8Rng,
}

impl Predictor for NoisyOracle {
    fn predict(&mut self, world: &WorldState, horizon: usize) -> PredictionSet {
        let t = world.step_index as usize;
        let future: Vec<Vec<Vec2>> = (1..=horizon)
            .map(|k| {
                let idx = (t + k).min(self.frames.len() - 1);
                self.frames[idx].clone()
            })
            .collect();
        noisy_oracle_predict(world, horizon, &future, self.noise_scale, &mut self.rng)
            .expect("frames cover the requested horizon")
    }
}
