//! Compact differentiable policy/critic with exact analytic gradients.
//!
//! A per-human encoder with masked mean-pooling feeds a small trunk; the
//! actor and reward critic share that trunk by default while the cost critic
//! always uses a separate tower. Actions are a diagonal Gaussian with a
//! state-independent learned log-std.

use super::nn::{tanh, tanh_backward, Linear};
use super::obs::{Observation, ROBOT_DIM};
use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

pub const ACTION_DIM: usize = 2;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub h_max: usize,
    pub horizon: usize,
    pub encoder_width: usize,
    pub hidden_width: usize,
    /// Share the encoder and trunk between the actor and the reward critic.
    pub shared_trunk: bool,
    /// Fixed input scaling applied inside the network.
    pub input_scale: f64,
    pub log_std_init: f64,
}

impl PolicyConfig {
    pub fn new(h_max: usize, horizon: usize) -> Self {
        PolicyConfig {
            h_max,
            horizon,
            encoder_width: 32,
            hidden_width: 64,
            shared_trunk: true,
            input_scale: 0.25,
            log_std_init: -0.7,
        }
    }

    pub fn human_dim(&self) -> usize {
        5 + 3 * self.horizon
    }
}

/// Encoder + two trunk layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tower {
    pub encoder: Linear,
    pub l1: Linear,
    pub l2: Linear,
}

impl Tower {
    fn xavier(cfg: &PolicyConfig, rng: &mut ChaCha8Rng) -> Self {
        Tower {
            encoder: Linear::xavier(cfg.human_dim(), cfg.encoder_width, rng),
            l1: Linear::xavier(ROBOT_DIM + cfg.encoder_width, cfg.hidden_width, rng),
            l2: Linear::xavier(cfg.hidden_width, cfg.hidden_width, rng),
        }
    }

    fn zeros(cfg: &PolicyConfig) -> Self {
        Tower {
            encoder: Linear::zeros(cfg.human_dim(), cfg.encoder_width),
            l1: Linear::zeros(ROBOT_DIM + cfg.encoder_width, cfg.hidden_width),
            l2: Linear::zeros(cfg.hidden_width, cfg.hidden_width),
        }
    }

    fn param_count(&self) -> usize {
        self.encoder.param_count() + self.l1.param_count() + self.l2.param_count()
    }

    fn push_flat(&self, out: &mut Vec<f64>) {
        self.encoder.push_flat(out);
        self.l1.push_flat(out);
        self.l2.push_flat(out);
    }

    fn load_flat(&mut self, data: &[f64], pos: &mut usize) {
        self.encoder.load_flat(data, pos);
        self.l1.load_flat(data, pos);
        self.l2.load_flat(data, pos);
    }
}

/// All trainable parameters. The same structure doubles as the gradient
/// accumulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyParams {
    pub cfg: PolicyConfig,
    /// Actor tower (also the reward critic's when `shared_trunk`).
    pub main: Tower,
    /// Separate reward-critic tower when trunks are not shared.
    pub reward_tower: Option<Tower>,
    pub cost_tower: Tower,
    pub actor_head: Linear,
    pub log_std: Array1<f64>,
    pub reward_head: Linear,
    pub cost_head: Linear,
}

impl PolicyParams {
    pub fn new(cfg: PolicyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let main = Tower::xavier(&cfg, &mut rng);
        let reward_tower = if cfg.shared_trunk {
            None
        } else {
            Some(Tower::xavier(&cfg, &mut rng))
        };
        let cost_tower = Tower::xavier(&cfg, &mut rng);
        let hw = cfg.hidden_width;
        PolicyParams {
            main,
            reward_tower,
            cost_tower,
            actor_head: Linear::xavier(hw, ACTION_DIM, &mut rng),
            log_std: Array1::from_elem(ACTION_DIM, cfg.log_std_init),
            reward_head: Linear::xavier(hw, 1, &mut rng),
            cost_head: Linear::xavier(hw, 1, &mut rng),
            cfg,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let cfg = self.cfg.clone();
        PolicyParams {
            main: Tower::zeros(&cfg),
            reward_tower: if self.reward_tower.is_some() {
                Some(Tower::zeros(&cfg))
            } else {
                None
            },
            cost_tower: Tower::zeros(&cfg),
            actor_head: Linear::zeros(cfg.hidden_width, ACTION_DIM),
            log_std: Array1::zeros(ACTION_DIM),
            reward_head: Linear::zeros(cfg.hidden_width, 1),
            cost_head: Linear::zeros(cfg.hidden_width, 1),
            cfg,
        }
    }

    /// Fresh all-zero parameters (useful for tests).
    pub fn zeros(cfg: PolicyConfig) -> Self {
        PolicyParams::new(cfg, 0).map_zero()
    }

    fn map_zero(mut self) -> Self {
        let z = self.zeros_like();
        self.main = z.main;
        self.reward_tower = z.reward_tower;
        self.cost_tower = z.cost_tower;
        self.actor_head = z.actor_head;
        self.log_std = z.log_std;
        self.reward_head = z.reward_head;
        self.cost_head = z.cost_head;
        self
    }

    pub fn param_count(&self) -> usize {
        self.main.param_count()
            + self.reward_tower.as_ref().map_or(0, Tower::param_count)
            + self.cost_tower.param_count()
            + self.actor_head.param_count()
            + self.log_std.len()
            + self.reward_head.param_count()
            + self.cost_head.param_count()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.main.push_flat(&mut out);
        if let Some(t) = &self.reward_tower {
            t.push_flat(&mut out);
        }
        self.cost_tower.push_flat(&mut out);
        self.actor_head.push_flat(&mut out);
        out.extend(self.log_std.iter());
        self.reward_head.push_flat(&mut out);
        self.cost_head.push_flat(&mut out);
        out
    }

    pub fn from_flat(&mut self, data: &[f64]) {
        debug_assert_eq!(data.len(), self.param_count());
        let mut pos = 0;
        self.main.load_flat(data, &mut pos);
        if let Some(t) = &mut self.reward_tower {
            t.load_flat(data, &mut pos);
        }
        self.cost_tower.load_flat(data, &mut pos);
        self.actor_head.load_flat(data, &mut pos);
        for v in self.log_std.iter_mut() {
            *v = data[pos];
            pos += 1;
        }
        self.reward_head.load_flat(data, &mut pos);
        self.cost_head.load_flat(data, &mut pos);
    }

    pub fn clamped_log_std(&self) -> [f64; ACTION_DIM] {
        [
            self.log_std[0].clamp(LOG_STD_MIN, LOG_STD_MAX),
            self.log_std[1].clamp(LOG_STD_MIN, LOG_STD_MAX),
        ]
    }
}

/// Column-stacked minibatch of observations.
#[derive(Debug, Clone)]
pub struct ObsBatch {
    pub robot: Array2<f64>,
    /// (batch * h_max, human_dim)
    pub humans: Array2<f64>,
    /// (batch, h_max)
    pub mask: Array2<f64>,
}

impl ObsBatch {
    pub fn from_observations<'a, I: IntoIterator<Item = &'a Observation>>(
        obs: I,
        h_max: usize,
        human_dim: usize,
    ) -> Self {
        let obs: Vec<&Observation> = obs.into_iter().collect();
        let b = obs.len();
        let mut robot = Array2::zeros((b, ROBOT_DIM));
        let mut humans = Array2::zeros((b * h_max, human_dim));
        let mut mask = Array2::zeros((b, h_max));
        for (i, o) in obs.iter().enumerate() {
            for j in 0..ROBOT_DIM {
                robot[[i, j]] = o.robot[j];
            }
            for s in 0..h_max {
                for j in 0..human_dim {
                    humans[[i * h_max + s, j]] = o.humans[[s, j]];
                }
                mask[[i, s]] = o.mask[s];
            }
        }
        ObsBatch { robot, humans, mask }
    }

    pub fn len(&self) -> usize {
        self.robot.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct TowerCache {
    enc_out: Array2<f64>,
    x: Array2<f64>,
    h1: Array2<f64>,
    pub h2: Array2<f64>,
    denom: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    humans_scaled: Array2<f64>,
    pub main: TowerCache,
    pub reward: Option<TowerCache>,
    pub cost: TowerCache,
}

#[derive(Debug, Clone)]
pub struct PolicyOutputs {
    pub mean: Array2<f64>,
    pub log_std: [f64; ACTION_DIM],
    pub v_reward: Array1<f64>,
    pub v_cost: Array1<f64>,
}

fn tower_forward(
    tower: &Tower,
    robot_scaled: &Array2<f64>,
    humans_scaled: &Array2<f64>,
    mask: &Array2<f64>,
    h_max: usize,
) -> TowerCache {
    let b = robot_scaled.nrows();
    let enc_out = tanh(&tower.encoder.forward(humans_scaled));
    let e = enc_out.ncols();

    let mut pooled = Array2::zeros((b, e));
    let mut denom = Array1::zeros(b);
    for i in 0..b {
        let count: f64 = mask.row(i).sum();
        let d = count.max(1.0);
        denom[i] = d;
        for s in 0..h_max {
            let m = mask[[i, s]];
            if m != 0.0 {
                let row = enc_out.row(i * h_max + s);
                for j in 0..e {
                    pooled[[i, j]] += m * row[j] / d;
                }
            }
        }
    }

    let mut x = Array2::zeros((b, ROBOT_DIM + e));
    x.slice_mut(s![.., ..ROBOT_DIM]).assign(robot_scaled);
    x.slice_mut(s![.., ROBOT_DIM..]).assign(&pooled);

    let h1 = tanh(&tower.l1.forward(&x));
    let h2 = tanh(&tower.l2.forward(&h1));
    TowerCache {
        enc_out,
        x,
        h1,
        h2,
        denom,
    }
}

fn tower_backward(
    tower: &Tower,
    cache: &TowerCache,
    humans_scaled: &Array2<f64>,
    mask: &Array2<f64>,
    h_max: usize,
    d_h2: &Array2<f64>,
    grads: &mut Tower,
) {
    let d_h2pre = tanh_backward(&cache.h2, d_h2);
    let d_h1 = tower.l2.backward(&cache.h1, &d_h2pre, &mut grads.l2);
    let d_h1pre = tanh_backward(&cache.h1, &d_h1);
    let d_x = tower.l1.backward(&cache.x, &d_h1pre, &mut grads.l1);

    let b = d_x.nrows();
    let e = cache.enc_out.ncols();
    let d_pooled = d_x.slice(s![.., ROBOT_DIM..]);

    let mut d_enc = Array2::zeros((b * h_max, e));
    for i in 0..b {
        for s in 0..h_max {
            let m = mask[[i, s]];
            if m != 0.0 {
                let scale = m / cache.denom[i];
                for j in 0..e {
                    d_enc[[i * h_max + s, j]] = scale * d_pooled[[i, j]];
                }
            }
        }
    }
    let d_encpre = tanh_backward(&cache.enc_out, &d_enc);
    tower.encoder.backward(humans_scaled, &d_encpre, &mut grads.encoder);
}

impl PolicyParams {
    /// Batched forward pass with cached intermediates.
    pub fn forward(&self, batch: &ObsBatch) -> (PolicyOutputs, ForwardCache) {
        let robot_scaled = &batch.robot * self.cfg.input_scale;
        let humans_scaled = &batch.humans * self.cfg.input_scale;

        let main = tower_forward(&self.main, &robot_scaled, &humans_scaled, &batch.mask, self.cfg.h_max);
        let reward = self
            .reward_tower
            .as_ref()
            .map(|t| tower_forward(t, &robot_scaled, &humans_scaled, &batch.mask, self.cfg.h_max));
        let cost = tower_forward(&self.cost_tower, &robot_scaled, &humans_scaled, &batch.mask, self.cfg.h_max);

        let mean = self.actor_head.forward(&main.h2);
        let reward_h2 = reward.as_ref().map_or(&main.h2, |c| &c.h2);
        let v_reward = self.reward_head.forward(reward_h2).index_axis_move(Axis(1), 0);
        let v_cost = self.cost_head.forward(&cost.h2).index_axis_move(Axis(1), 0);

        (
            PolicyOutputs {
                mean,
                log_std: self.clamped_log_std(),
                v_reward,
                v_cost,
            },
            ForwardCache {
                humans_scaled,
                main,
                reward,
                cost,
            },
        )
    }

    /// Single-observation forward: (action mean, log-std, V^R, V^C).
    pub fn forward_one(&self, obs: &Observation) -> (crate::geom::Vec2, [f64; 2], f64, f64) {
        let batch = ObsBatch::from_observations([obs], self.cfg.h_max, self.cfg.human_dim());
        let (out, _) = self.forward(&batch);
        (
            crate::geom::Vec2::new(out.mean[[0, 0]], out.mean[[0, 1]]),
            out.log_std,
            out.v_reward[0],
            out.v_cost[0],
        )
    }

    /// Accumulates exact gradients of a scalar loss given its gradients with
    /// respect to the network outputs.
    pub fn backward(
        &self,
        batch: &ObsBatch,
        cache: &ForwardCache,
        d_mean: &Array2<f64>,
        d_log_std: [f64; ACTION_DIM],
        d_v_reward: &Array1<f64>,
        d_v_cost: &Array1<f64>,
        grads: &mut PolicyParams,
    ) {
        let d_vr2 = d_v_reward.clone().insert_axis(Axis(1));
        let d_vc2 = d_v_cost.clone().insert_axis(Axis(1));

        let d_h2_actor = self
            .actor_head
            .backward(&cache.main.h2, d_mean, &mut grads.actor_head);

        match (&self.reward_tower, &cache.reward) {
            (Some(tower), Some(rc)) => {
                let d_h2_r = self.reward_head.backward(&rc.h2, &d_vr2, &mut grads.reward_head);
                tower_backward(
                    tower,
                    rc,
                    &cache.humans_scaled,
                    &batch.mask,
                    self.cfg.h_max,
                    &d_h2_r,
                    grads.reward_tower.as_mut().expect("grads mirror params"),
                );
                tower_backward(
                    &self.main,
                    &cache.main,
                    &cache.humans_scaled,
                    &batch.mask,
                    self.cfg.h_max,
                    &d_h2_actor,
                    &mut grads.main,
                );
            }
            _ => {
                let d_h2_r =
                    self.reward_head
                        .backward(&cache.main.h2, &d_vr2, &mut grads.reward_head);
                let d_h2 = &d_h2_actor + &d_h2_r;
                tower_backward(
                    &self.main,
                    &cache.main,
                    &cache.humans_scaled,
                    &batch.mask,
                    self.cfg.h_max,
                    &d_h2,
                    &mut grads.main,
                );
            }
        }

        let d_h2_c = self
            .cost_head
            .backward(&cache.cost.h2, &d_vc2, &mut grads.cost_head);
        tower_backward(
            &self.cost_tower,
            &cache.cost,
            &cache.humans_scaled,
            &batch.mask,
            self.cfg.h_max,
            &d_h2_c,
            &mut grads.cost_tower,
        );

        // Hard clamp on log-std: gradient passes only inside the interval.
        for i in 0..ACTION_DIM {
            if self.log_std[i] > LOG_STD_MIN && self.log_std[i] < LOG_STD_MAX {
                grads.log_std[i] += d_log_std[i];
            }
        }
    }
}

/// Diagonal-Gaussian log-density and entropy.
pub fn log_prob_and_entropy(
    mean: [f64; ACTION_DIM],
    log_std: [f64; ACTION_DIM],
    action: [f64; ACTION_DIM],
) -> (f64, f64) {
    let mut logp = 0.0;
    let mut entropy = 0.0;
    for i in 0..ACTION_DIM {
        let sigma = log_std[i].exp();
        let z = (action[i] - mean[i]) / sigma;
        logp += -0.5 * z * z - log_std[i] - 0.5 * (std::f64::consts::TAU).ln();
        entropy += 0.5 + 0.5 * (std::f64::consts::TAU).ln() + log_std[i];
    }
    (logp, entropy)
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("config hash mismatch: stored {stored}, computed {computed}")]
    HashMismatch { stored: String, computed: String },
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: PolicyConfig,
    config_hash: String,
    params: Vec<f64>,
}

pub fn config_hash(cfg: &PolicyConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    format!("{:x}", hasher.finalize())
}

pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<(), CheckpointError> {
    let ckpt = Checkpoint {
        version: 1,
        config: params.cfg.clone(),
        config_hash: config_hash(&params.cfg),
        params: params.to_flat(),
    };
    std::fs::write(path, serde_json::to_string(&ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams, CheckpointError> {
    let raw = std::fs::read_to_string(path)?;
    let ckpt: Checkpoint = serde_json::from_str(&raw)?;
    if ckpt.version != 1 {
        return Err(CheckpointError::Version(ckpt.version));
    }
    let computed = config_hash(&ckpt.config);
    if computed != ckpt.config_hash {
        return Err(CheckpointError::HashMismatch {
            stored: ckpt.config_hash,
            computed,
        });
    }
    let mut params = PolicyParams::new(ckpt.config, 0);
    params.from_flat(&ckpt.params);
    Ok(params)
}
