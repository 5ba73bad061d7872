//! Dynamically-tuned adaptive conformal inference.
//!
//! Per (human, horizon) pair we run M online quantile estimators with
//! different learning rates. Each realized prediction error updates every
//! estimator by a quantile-tracking step and re-weights them with
//! exponentially weighted pinball losses; querying treats the estimate as a
//! discrete random variable over the M tracks.

use crate::prediction::PredictionSet;
use crate::world::WorldState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

/// Hyperparameters of the estimator bank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtaciConfig {
    /// Miscoverage level; estimates track the (1 - alpha) error quantile.
    pub alpha: f64,
    /// Learning rate of each estimator track.
    pub gammas: Vec<f64>,
    /// Uniform mixing floor on the expert weights.
    pub sigma: f64,
    /// Reactivity of the exponential weighting.
    pub eta: f64,
    /// Initial estimate for a k-step-ahead prediction is `initial_scale * k`.
    pub initial_scale: f64,
}

impl Default for DtaciConfig {
    fn default() -> Self {
        DtaciConfig {
            alpha: 0.1,
            gammas: vec![0.05, 0.1, 0.2],
            sigma: 0.05,
            eta: 10.0,
            initial_scale: 0.1,
        }
    }
}

/// How to collapse the M tracks into one radius per (human, horizon).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryMode {
    /// Draw one track under the expert probabilities (the default).
    Sampled,
    /// Probability-weighted mean of the tracks.
    Expected,
}

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("no prediction of lag {lag} issued for step {step}")]
    NotYetMeasurable { lag: usize, step: u32 },
    #[error("realized error must be finite")]
    NonFiniteError,
    #[error("coverage trace for horizon {0} is empty")]
    EmptyTrace(usize),
}

/// Realized k-step prediction error: distance between the current position of
/// human `h` and the point predicted for it k steps ago.
pub fn realized_error(
    current: &WorldState,
    issued: &PredictionSet,
    h: usize,
    k: usize,
) -> Result<f64, ConformalError> {
    if k < 1
        || k > issued.horizon
        || issued.issued_at + k as u32 != current.step_index
        || h >= issued.points.len()
    {
        return Err(ConformalError::NotYetMeasurable {
            lag: k,
            step: current.step_index,
        });
    }
    Ok(current.humans[h].position.distance(issued.points[h][k - 1]))
}

/// Pinball loss whose minimizer is the (1 - alpha) quantile.
pub fn pinball_loss(delta: f64, estimate: f64, alpha: f64) -> f64 {
    if delta >= estimate {
        alpha * (delta - estimate)
    } else {
        (alpha - 1.0) * (delta - estimate)
    }
}

/// Bank of online quantile estimators, H x K x M.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DtaciBank {
    pub cfg: DtaciConfig,
    humans: usize,
    horizon: usize,
    /// Flattened (h, k, m) grids.
    estimates: Vec<f64>,
    weights: Vec<f64>,
    probs: Vec<f64>,
    /// Ring of the most recent issued prediction sets, newest last.
    history: VecDeque<PredictionSet>,
}

impl DtaciBank {
    pub fn new(humans: usize, horizon: usize, cfg: DtaciConfig) -> Self {
        let m = cfg.gammas.len();
        let mut estimates = vec![0.0; humans * horizon * m];
        for h in 0..humans {
            for k in 0..horizon {
                for j in 0..m {
                    estimates[(h * horizon + k) * m + j] = cfg.initial_scale * (k + 1) as f64;
                }
            }
        }
        DtaciBank {
            humans,
            horizon,
            estimates,
            weights: vec![1.0 / m as f64; humans * horizon * m],
            probs: vec![1.0 / m as f64; humans * horizon * m],
            history: VecDeque::with_capacity(horizon),
            cfg,
        }
    }

    pub fn humans(&self) -> usize {
        self.humans
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn tracks(&self) -> usize {
        self.cfg.gammas.len()
    }

    fn base(&self, h: usize, k: usize) -> usize {
        (h * self.horizon + k) * self.tracks()
    }

    pub fn estimates(&self, h: usize, k: usize) -> &[f64] {
        let b = self.base(h, k);
        &self.estimates[b..b + self.tracks()]
    }

    pub fn probabilities(&self, h: usize, k: usize) -> &[f64] {
        let b = self.base(h, k);
        &self.probs[b..b + self.tracks()]
    }

    /// Remembers an issued prediction set so its errors can be measured later.
    pub fn record_issued(&mut self, pred: PredictionSet) {
        if self.history.len() == self.horizon {
            self.history.pop_front();
        }
        self.history.push_back(pred);
    }

    /// Realized errors for every measurable (h, k) at the current step,
    /// flattened h-major; `None` where no lag-k prediction exists yet.
    pub fn realized_errors(&self, world: &WorldState) -> Vec<Option<f64>> {
        let mut out = vec![None; self.humans * self.horizon];
        for issued in &self.history {
            let lag = world.step_index.saturating_sub(issued.issued_at) as usize;
            if lag == 0 || lag > self.horizon {
                continue;
            }
            for h in 0..self.humans.min(issued.points.len()) {
                if let Ok(e) = realized_error(world, issued, h, lag) {
                    out[h * self.horizon + (lag - 1)] = Some(e);
                }
            }
        }
        out
    }

    /// One DtACI step over all measurable (h, k) pairs.
    ///
    /// For each track: the err indicator and the pinball loss are evaluated
    /// against the pre-update estimate (the value that made this period's
    /// prediction), then the quantile-tracking step and the exponential
    /// weight update are applied. Estimates are clamped at zero.
    pub fn update(&mut self, errors: &[Option<f64>]) -> Result<(), ConformalError> {
        debug_assert_eq!(errors.len(), self.humans * self.horizon);
        let m = self.tracks();
        let alpha = self.cfg.alpha;
        let mut scratch = vec![0.0; m];

        for h in 0..self.humans {
            for k in 0..self.horizon {
                let delta = match errors[h * self.horizon + k] {
                    Some(d) => d,
                    None => continue,
                };
                if !delta.is_finite() {
                    return Err(ConformalError::NonFiniteError);
                }
                let b = self.base(h, k);

                // Pinball losses against the pre-update estimates.
                let mut min_loss = f64::INFINITY;
                for j in 0..m {
                    let loss = pinball_loss(delta, self.estimates[b + j], alpha);
                    scratch[j] = loss;
                    min_loss = min_loss.min(loss);
                }

                // Quantile-tracking step per track.
                for j in 0..m {
                    let err = if self.estimates[b + j] < delta { 1.0 } else { 0.0 };
                    self.estimates[b + j] =
                        (self.estimates[b + j] - self.cfg.gammas[j] * (alpha - err)).max(0.0);
                }

                // Exponentially weighted mixing with a uniform floor. Losses
                // are shifted by their minimum before exponentiation; the
                // normalized ratio is unchanged and cannot underflow to 0/0.
                let mut denom = 0.0;
                for j in 0..m {
                    scratch[j] = self.weights[b + j] * (-self.cfg.eta * (scratch[j] - min_loss)).exp();
                    denom += scratch[j];
                }
                let mut wsum = 0.0;
                for j in 0..m {
                    self.weights[b + j] =
                        (1.0 - self.cfg.sigma) * scratch[j] / denom + self.cfg.sigma / m as f64;
                    wsum += self.weights[b + j];
                }
                for j in 0..m {
                    self.probs[b + j] = self.weights[b + j] / wsum;
                }
            }
        }
        Ok(())
    }

    /// Collapses the bank to one radius per (human, horizon), h-major.
    pub fn query(&self, rng: &mut ChaCha8Rng, mode: QueryMode) -> Vec<f64> {
        let m = self.tracks();
        let mut out = vec![0.0; self.humans * self.horizon];
        for h in 0..self.humans {
            for k in 0..self.horizon {
                let b = self.base(h, k);
                let value = match mode {
                    QueryMode::Expected => (0..m)
                        .map(|j| self.probs[b + j] * self.estimates[b + j])
                        .sum(),
                    QueryMode::Sampled => {
                        let u: f64 = rng.gen_range(0.0..1.0);
                        let mut acc = 0.0;
                        let mut chosen = m - 1;
                        for j in 0..m {
                            acc += self.probs[b + j];
                            if u < acc {
                                chosen = j;
                                break;
                            }
                        }
                        self.estimates[b + chosen]
                    }
                };
                out[h * self.horizon + k] = value.max(0.0);
            }
        }
        out
    }
}

/// Fraction of steps whose realized error fell within the queried radius,
/// per prediction horizon.
pub fn coverage_report(pairs_per_k: &[Vec<(f64, f64)>]) -> Result<Vec<f64>, ConformalError> {
    pairs_per_k
        .iter()
        .enumerate()
        .map(|(k, pairs)| {
            if pairs.is_empty() {
                return Err(ConformalError::EmptyTrace(k + 1));
            }
            let covered = pairs.iter().filter(|(d, q)| d <= q).count();
            Ok(covered as f64 / pairs.len() as f64)
        })
        .collect()
}

/// Streaming per-horizon coverage counter.
#[derive(Debug, Clone, Default)]
pub struct CoverageAccumulator {
    pub covered: Vec<u64>,
    pub total: Vec<u64>,
}

impl CoverageAccumulator {
    pub fn new(horizon: usize) -> Self {
        CoverageAccumulator {
            covered: vec![0; horizon],
            total: vec![0; horizon],
        }
    }

    pub fn record(&mut self, k: usize, delta: f64, queried: f64) {
        self.total[k] += 1;
        if delta <= queried {
            self.covered[k] += 1;
        }
    }

    pub fn merge(&mut self, other: &CoverageAccumulator) {
        for k in 0..self.total.len() {
            self.covered[k] += other.covered[k];
            self.total[k] += other.total[k];
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.covered
            .iter()
            .zip(&self.total)
            .map(|(&c, &t)| if t == 0 { f64::NAN } else { c as f64 / t as f64 })
            .collect()
    }
}
