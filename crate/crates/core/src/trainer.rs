//! PPO-Lagrangian optimization: parallel rollout collection, dual advantage
//! estimation, the combined advantage, clipped policy and twin value losses,
//! and the projected dual update on the Lagrange multiplier.

use crate::crowd::scenario::{ScenarioConfig, ScenarioError};
use crate::geom::Vec2;
use crate::policy::nn::Adam;
use crate::policy::{
    log_prob_and_entropy, ObsBatch, ObsLayout, Observation, PolicyConfig, PolicyParams,
};
use crate::runner::{derive_seed, EpisodeSim, RunnerConfig};
use crate::world::Event;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// Mean episodic cost target (the cost limit).
    pub cost_limit: f64,
    pub total_steps: u64,
    pub envs: usize,
    /// Steps collected per environment per iteration.
    pub rollout_len: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    /// Actor and reward-critic learning rate.
    pub lr_actor: f64,
    /// Cost-critic learning rate.
    pub lr_cost_critic: f64,
    /// Critic loss coefficients.
    pub c1: f64,
    pub c2: f64,
    pub lambda_rate: f64,
    pub lambda_init: f64,
    /// Normalize each advantage channel per batch before combining.
    pub normalize_advantages: bool,
    /// Ablation: keep lambda at zero (plain PPO).
    pub freeze_lambda: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            cost_limit: 0.4,
            total_steps: 1_000_000,
            envs: 16,
            rollout_len: 128,
            epochs: 4,
            minibatch: 512,
            discount: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.08,
            lr_actor: 3e-5,
            lr_cost_critic: 1.5e-5,
            c1: 0.5,
            c2: 0.5,
            lambda_rate: 0.05,
            lambda_init: 0.0,
            normalize_advantages: true,
            freeze_lambda: false,
        }
    }
}

impl TrainerConfig {
    /// Desk-scale preset: small crowd, short run, learning rates raised to
    /// converge within 10^6 steps.
    pub fn desk() -> Self {
        TrainerConfig {
            lr_actor: 3e-4,
            lr_cost_critic: 1.5e-4,
            ..TrainerConfig::default()
        }
    }

    /// Full-scale preset matching the published training setup.
    pub fn paper() -> Self {
        TrainerConfig {
            total_steps: 20_000_000,
            envs: 128,
            ..TrainerConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFinite { iteration: u64, detail: String },
}

/// Generalized advantage estimation over one env stream.
///
/// `bootstrap` is the value of the state following the last step, used when
/// that step did not terminate its episode.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    discount: f64,
    gae_lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    assert_eq!(rewards.len(), dones.len());
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_value = if dones[t] {
            0.0
        } else if t + 1 == n {
            bootstrap
        } else {
            values[t + 1]
        };
        let delta = rewards[t] + discount * next_value - values[t];
        acc = delta + discount * gae_lambda * if dones[t] { 0.0 } else { acc };
        advantages[t] = acc;
    }
    let targets = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, targets)
}

/// (A_r - lambda * A_c) / (1 + lambda), elementwise.
pub fn combined_advantage(adv_reward: &[f64], adv_cost: &[f64], lambda: f64) -> Vec<f64> {
    debug_assert!(lambda >= 0.0);
    adv_reward
        .iter()
        .zip(adv_cost)
        .map(|(r, c)| (r - lambda * c) / (1.0 + lambda))
        .collect()
}

/// In-place zero-mean unit-std normalization; left unscaled when the batch is
/// (numerically) constant.
pub fn normalize_in_place(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-8 {
        for v in values.iter_mut() {
            *v -= mean;
        }
    } else {
        for v in values.iter_mut() {
            *v = (*v - mean) / std;
        }
    }
}

/// Projected dual ascent: lambda' = max(0, lambda + rate * (mean_cost - limit)).
pub fn lambda_update(lambda: f64, mean_episodic_cost: f64, cost_limit: f64, rate: f64) -> f64 {
    (lambda + rate * (mean_episodic_cost - cost_limit)).max(0.0)
}

/// The three PPO-Lagrangian loss scalars for a prepared minibatch. The
/// optimizer ascends the clipped policy term and descends both value terms.
pub struct LossTerms {
    pub policy: f64,
    pub reward_value: f64,
    pub cost_value: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn ppo_losses(
    ratios: &[f64],
    advantages: &[f64],
    v_reward: &[f64],
    targ_reward: &[f64],
    v_cost: &[f64],
    targ_cost: &[f64],
    clip_eps: f64,
    c1: f64,
    c2: f64,
) -> LossTerms {
    let n = ratios.len() as f64;
    let mut policy = 0.0;
    for (&r, &a) in ratios.iter().zip(advantages) {
        let clipped = r.clamp(1.0 - clip_eps, 1.0 + clip_eps);
        policy += (r * a).min(clipped * a);
    }
    let mse = |v: &[f64], t: &[f64]| {
        v.iter()
            .zip(t)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n
    };
    LossTerms {
        policy: policy / n,
        reward_value: c1 * mse(v_reward, targ_reward),
        cost_value: c2 * mse(v_cost, targ_cost),
    }
}

/// Which loss to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSpec {
    /// Clipped policy objective alone (ascended).
    Policy,
    /// Reward-critic loss alone.
    RewardValue,
    /// Cost-critic loss alone.
    CostValue,
    /// -l_pi + l_R + l_C, the scalar the optimizer descends.
    Combined,
}

/// One prepared minibatch: everything needed to evaluate the losses.
pub struct Minibatch<'a> {
    pub obs: Vec<&'a Observation>,
    pub actions: Vec<[f64; 2]>,
    pub logp_old: Vec<f64>,
    /// Combined advantages.
    pub advantages: Vec<f64>,
    pub targets_reward: Vec<f64>,
    pub targets_cost: Vec<f64>,
}

/// Evaluates the requested loss on a minibatch and accumulates its exact
/// gradient. Returns (minimized scalar, loss terms).
pub fn policy_gradients(
    params: &PolicyParams,
    data: &Minibatch,
    clip_eps: f64,
    c1: f64,
    c2: f64,
    spec: LossSpec,
    grads: &mut PolicyParams,
) -> (f64, LossTerms) {
    let b = data.obs.len();
    let bf = b as f64;
    let batch = ObsBatch::from_observations(
        data.obs.iter().copied(),
        params.cfg.h_max,
        params.cfg.human_dim(),
    );
    let (out, cache) = params.forward(&batch);
    let log_std = out.log_std;
    let sigma = [log_std[0].exp(), log_std[1].exp()];
    let use_pi = matches!(spec, LossSpec::Policy | LossSpec::Combined);
    let use_r = matches!(spec, LossSpec::RewardValue | LossSpec::Combined);
    let use_c = matches!(spec, LossSpec::CostValue | LossSpec::Combined);

    let mut d_mean = Array2::zeros((b, 2));
    let mut d_log_std = [0.0; 2];
    let mut d_vr = Array1::zeros(b);
    let mut d_vc = Array1::zeros(b);
    let mut loss_pi = 0.0;
    let mut loss_vr = 0.0;
    let mut loss_vc = 0.0;

    for row in 0..b {
        let mean = [out.mean[[row, 0]], out.mean[[row, 1]]];
        let action = data.actions[row];
        let (logp_new, _) = log_prob_and_entropy(mean, log_std, action);
        let ratio = (logp_new - data.logp_old[row]).exp();
        let a = data.advantages[row];
        let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
        let surr1 = ratio * a;
        let surr2 = clipped * a;
        loss_pi += surr1.min(surr2);

        // Gradient flows through the unclipped branch only when it attains
        // the min; the minimized scalar carries -l_pi.
        if use_pi && surr1 <= surr2 {
            let g = -(a * ratio) / bf;
            for d in 0..2 {
                let z = (action[d] - mean[d]) / sigma[d];
                d_mean[[row, d]] += g * z / sigma[d];
                d_log_std[d] += g * (z * z - 1.0);
            }
        }

        let vr_err = out.v_reward[row] - data.targets_reward[row];
        let vc_err = out.v_cost[row] - data.targets_cost[row];
        loss_vr += c1 * vr_err * vr_err;
        loss_vc += c2 * vc_err * vc_err;
        if use_r {
            d_vr[row] = 2.0 * c1 * vr_err / bf;
        }
        if use_c {
            d_vc[row] = 2.0 * c2 * vc_err / bf;
        }
    }
    loss_pi /= bf;
    loss_vr /= bf;
    loss_vc /= bf;

    params.backward(&batch, &cache, &d_mean, d_log_std, &d_vr, &d_vc, grads);

    let scalar = match spec {
        LossSpec::Policy => -loss_pi,
        LossSpec::RewardValue => loss_vr,
        LossSpec::CostValue => loss_vc,
        LossSpec::Combined => -loss_pi + loss_vr + loss_vc,
    };
    (
        scalar,
        LossTerms {
            policy: loss_pi,
            reward_value: loss_vr,
            cost_value: loss_vc,
        },
    )
}

/// Stats of one finished episode.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub ret: f64,
    pub cost: f64,
    pub len: u32,
    pub event: Event,
}

pub struct EnvStep {
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
    pub episode: Option<EpisodeStats>,
}

/// Minimal environment surface the trainer needs. Implementations auto-reset
/// when an episode ends, so `observation` is always valid.
pub trait RolloutEnv: Send {
    fn observation(&self) -> Observation;
    fn step(&mut self, action: Vec2) -> EnvStep;
}

/// Crowd-navigation environment: wraps the episode pipeline and respawns on
/// termination with a fresh derived seed.
pub struct CrowdEnv {
    sim: EpisodeSim,
    scenario: ScenarioConfig,
    runner_cfg: RunnerConfig,
    layout: ObsLayout,
    base_seed: u64,
    episode_index: u64,
    ep_return: f64,
    ep_cost: f64,
    ep_len: u32,
}

impl CrowdEnv {
    pub fn new(
        scenario: &ScenarioConfig,
        runner_cfg: &RunnerConfig,
        layout: ObsLayout,
        base_seed: u64,
    ) -> Result<Self, ScenarioError> {
        let sim = EpisodeSim::new(scenario, runner_cfg, derive_seed(base_seed, 0))?;
        Ok(CrowdEnv {
            sim,
            scenario: scenario.clone(),
            runner_cfg: runner_cfg.clone(),
            layout,
            base_seed,
            episode_index: 0,
            ep_return: 0.0,
            ep_cost: 0.0,
            ep_len: 0,
        })
    }
}

impl RolloutEnv for CrowdEnv {
    fn observation(&self) -> Observation {
        self.sim.observation(self.layout)
    }

    fn step(&mut self, action: Vec2) -> EnvStep {
        let out = self.sim.step(action).expect("live episode");
        self.ep_return += out.reward;
        self.ep_cost += out.cost;
        self.ep_len += 1;
        if out.event.is_terminal() {
            let stats = EpisodeStats {
                ret: self.ep_return,
                cost: self.ep_cost,
                len: self.ep_len,
                event: out.event,
            };
            self.episode_index += 1;
            self.sim = EpisodeSim::new(
                &self.scenario,
                &self.runner_cfg,
                derive_seed(self.base_seed, self.episode_index),
            )
            .expect("respawn");
            self.ep_return = 0.0;
            self.ep_cost = 0.0;
            self.ep_len = 0;
            EnvStep {
                reward: out.reward,
                cost: out.cost,
                done: true,
                episode: Some(stats),
            }
        } else {
            EnvStep {
                reward: out.reward,
                cost: out.cost,
                done: false,
                episode: None,
            }
        }
    }
}

/// One-state CMDP with reward = cost = clamp(a_x, 0, 1) and one-step
/// episodes; its constrained optimum is mean action = cost limit.
pub struct SyntheticCmdp {
    pub layout: ObsLayout,
}

impl RolloutEnv for SyntheticCmdp {
    fn observation(&self) -> Observation {
        Observation {
            robot: vec![0.0; crate::policy::ROBOT_DIM],
            humans: Array2::zeros((self.layout.h_max, 5 + 3 * self.layout.horizon)),
            mask: vec![0.0; self.layout.h_max],
        }
    }

    fn step(&mut self, action: Vec2) -> EnvStep {
        let a = action.x.clamp(0.0, 1.0);
        EnvStep {
            reward: a,
            cost: a,
            done: true,
            episode: Some(EpisodeStats {
                ret: a,
                cost: a,
                len: 1,
                event: Event::ReachedGoal,
            }),
        }
    }
}

/// One row of the training curves CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: u64,
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub lambda: f64,
}

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("iteration,mean_reward,mean_cost,lambda\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.iteration, r.mean_reward, r.mean_cost, r.lambda
        ));
    }
    out
}

pub struct TrainOutputs {
    pub params: PolicyParams,
    pub curves: Vec<CurveRow>,
    pub final_lambda: f64,
}

/// PPO-Lagrangian over a set of environments. Rollout collection alternates
/// with update phases; environments step in lockstep so the policy forward
/// pass is batched across them.
pub fn train<E: RolloutEnv>(
    envs: &mut [E],
    mut params: PolicyParams,
    cfg: &TrainerConfig,
    seed: u64,
) -> Result<TrainOutputs, TrainError> {
    let n_envs = envs.len();
    assert!(n_envs > 0);
    let h_max = params.cfg.h_max;
    let human_dim = params.cfg.human_dim();
    let steps_per_iter = (n_envs * cfg.rollout_len) as u64;
    let iterations = (cfg.total_steps / steps_per_iter).max(1);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7));
    let mut lambda = if cfg.freeze_lambda { 0.0 } else { cfg.lambda_init };
    let mut curves = Vec::with_capacity(iterations as usize);
    let mut last_mean_reward = f64::NAN;
    let mut last_mean_cost = f64::NAN;

    // Per-parameter learning-rate multipliers: cost-critic branch trains
    // slower than the actor/reward branch.
    let flat_len = params.param_count();
    let mut adam = Adam::new(cfg.lr_actor, flat_len);
    let lr_mult = lr_multipliers(&params, cfg.lr_cost_critic / cfg.lr_actor);

    let total = cfg.rollout_len * n_envs;
    for iteration in 0..iterations {
        // --- Rollout phase ---
        let mut obs_store: Vec<Observation> = Vec::with_capacity(total);
        let mut actions = vec![[0.0; 2]; total];
        let mut logp_old = vec![0.0; total];
        let mut rewards = vec![0.0; total];
        let mut costs = vec![0.0; total];
        let mut values_r = vec![0.0; total];
        let mut values_c = vec![0.0; total];
        let mut dones = vec![false; total];
        let mut finished: Vec<EpisodeStats> = Vec::new();

        for t in 0..cfg.rollout_len {
            let obs_t: Vec<Observation> = envs.iter().map(|e| e.observation()).collect();
            let batch = ObsBatch::from_observations(obs_t.iter(), h_max, human_dim);
            let (out, _) = params.forward(&batch);
            let log_std = out.log_std;
            let sigma = [log_std[0].exp(), log_std[1].exp()];

            let mut step_actions = vec![Vec2::ZERO; n_envs];
            for i in 0..n_envs {
                let mean = [out.mean[[i, 0]], out.mean[[i, 1]]];
                let action = [
                    mean[0] + sigma[0] * gaussian(&mut rng),
                    mean[1] + sigma[1] * gaussian(&mut rng),
                ];
                let (logp, _) = log_prob_and_entropy(mean, log_std, action);
                let idx = t * n_envs + i;
                actions[idx] = action;
                logp_old[idx] = logp;
                values_r[idx] = out.v_reward[i];
                values_c[idx] = out.v_cost[i];
                step_actions[i] = Vec2::new(action[0], action[1]);
            }

            let results: Vec<EnvStep> = envs
                .par_iter_mut()
                .zip(step_actions.par_iter())
                .map(|(env, &a)| env.step(a))
                .collect();

            for (i, res) in results.into_iter().enumerate() {
                let idx = t * n_envs + i;
                rewards[idx] = res.reward;
                costs[idx] = res.cost;
                dones[idx] = res.done;
                if let Some(stats) = res.episode {
                    finished.push(stats);
                }
            }
            obs_store.extend(obs_t);
        }

        // Bootstrap values of the post-rollout states.
        let obs_last: Vec<Observation> = envs.iter().map(|e| e.observation()).collect();
        let last_batch = ObsBatch::from_observations(obs_last.iter(), h_max, human_dim);
        let (last_out, _) = params.forward(&last_batch);

        // --- Advantage estimation per env stream ---
        let mut adv_r = vec![0.0; total];
        let mut adv_c = vec![0.0; total];
        let mut targ_r = vec![0.0; total];
        let mut targ_c = vec![0.0; total];
        for i in 0..n_envs {
            let take = |src: &[f64]| -> Vec<f64> {
                (0..cfg.rollout_len).map(|t| src[t * n_envs + i]).collect()
            };
            let d: Vec<bool> = (0..cfg.rollout_len).map(|t| dones[t * n_envs + i]).collect();
            let (ar, tr) = compute_gae(
                &take(&rewards),
                &take(&values_r),
                &d,
                last_out.v_reward[i],
                cfg.discount,
                cfg.gae_lambda,
            );
            let (ac, tc) = compute_gae(
                &take(&costs),
                &take(&values_c),
                &d,
                last_out.v_cost[i],
                cfg.discount,
                cfg.gae_lambda,
            );
            for t in 0..cfg.rollout_len {
                adv_r[t * n_envs + i] = ar[t];
                adv_c[t * n_envs + i] = ac[t];
                targ_r[t * n_envs + i] = tr[t];
                targ_c[t * n_envs + i] = tc[t];
            }
        }
        if cfg.normalize_advantages {
            normalize_in_place(&mut adv_r);
            normalize_in_place(&mut adv_c);
        }
        let adv = combined_advantage(&adv_r, &adv_c, lambda);

        // --- Update phase ---
        let mut order: Vec<usize> = (0..total).collect();
        for _ in 0..cfg.epochs {
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(cfg.minibatch) {
                let data = Minibatch {
                    obs: chunk.iter().map(|&i| &obs_store[i]).collect(),
                    actions: chunk.iter().map(|&i| actions[i]).collect(),
                    logp_old: chunk.iter().map(|&i| logp_old[i]).collect(),
                    advantages: chunk.iter().map(|&i| adv[i]).collect(),
                    targets_reward: chunk.iter().map(|&i| targ_r[i]).collect(),
                    targets_cost: chunk.iter().map(|&i| targ_c[i]).collect(),
                };
                let mut grads = params.zeros_like();
                let (_, terms) = policy_gradients(
                    &params,
                    &data,
                    cfg.clip_eps,
                    cfg.c1,
                    cfg.c2,
                    LossSpec::Combined,
                    &mut grads,
                );
                if !(terms.policy.is_finite()
                    && terms.reward_value.is_finite()
                    && terms.cost_value.is_finite())
                {
                    return Err(TrainError::NonFinite {
                        iteration,
                        detail: format!(
                            "l_pi={} l_R={} l_C={} lambda={lambda}",
                            terms.policy, terms.reward_value, terms.cost_value
                        ),
                    });
                }
                let gflat = grads.to_flat();
                let mut pflat = params.to_flat();
                adam.step_with_multiplier(&mut pflat, &gflat, &lr_mult);
                params.from_flat(&pflat);
            }
        }

        // --- Dual update and logging ---
        if !finished.is_empty() {
            let mean_cost =
                finished.iter().map(|s| s.cost).sum::<f64>() / finished.len() as f64;
            let mean_ret = finished.iter().map(|s| s.ret).sum::<f64>() / finished.len() as f64;
            if !cfg.freeze_lambda {
                lambda = lambda_update(lambda, mean_cost, cfg.cost_limit, cfg.lambda_rate);
            }
            last_mean_reward = mean_ret;
            last_mean_cost = mean_cost;
        }
        curves.push(CurveRow {
            iteration,
            mean_reward: last_mean_reward,
            mean_cost: last_mean_cost,
            lambda,
        });
    }

    Ok(TrainOutputs {
        params,
        curves,
        final_lambda: lambda,
    })
}

/// Per-parameter learning-rate multipliers matching the flat layout: the cost
/// tower and cost head train at the cost-critic rate.
fn lr_multipliers(params: &PolicyParams, cost_ratio: f64) -> Vec<f64> {
    let mut probe = params.zeros_like();
    // Mark cost-branch parameters by writing into them and reading the flat
    // layout back; everything nonzero gets the cost multiplier.
    for w in probe.cost_tower.encoder.w.iter_mut() {
        *w = 1.0;
    }
    for w in probe.cost_tower.encoder.b.iter_mut() {
        *w = 1.0;
    }
    for w in probe.cost_tower.l1.w.iter_mut() {
        *w = 1.0;
    }
    for w in probe.cost_tower.l1.b.iter_mut() {
        *w = 1.0;
    }
    for w in probe.cost_tower.l2.w.iter_mut() {
        *w = 1.0;
    }
    for w in probe.cost_tower.l2.b.iter_mut() {
        *w = 1.0;
    }
    for w in probe.cost_head.w.iter_mut() {
        *w = 1.0;
    }
    for w in probe.cost_head.b.iter_mut() {
        *w = 1.0;
    }
    probe
        .to_flat()
        .iter()
        .map(|&flag| if flag != 0.0 { cost_ratio } else { 1.0 })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Trains on the crowd scenario with the default CV/DtACI pipeline.
pub fn train_crowd(
    scenario: &ScenarioConfig,
    runner_cfg: &RunnerConfig,
    trainer_cfg: &TrainerConfig,
    seed: u64,
) -> Result<TrainOutputs, TrainError> {
    let policy_cfg = PolicyConfig::new(scenario.human_count, runner_cfg.horizon);
    let params = PolicyParams::new(policy_cfg, derive_seed(seed, 100));
    let layout = ObsLayout {
        h_max: scenario.human_count,
        horizon: runner_cfg.horizon,
    };
    let mut envs = Vec::with_capacity(trainer_cfg.envs);
    for i in 0..trainer_cfg.envs {
        envs.push(CrowdEnv::new(
            scenario,
            runner_cfg,
            layout,
            derive_seed(seed, 1000 + i as u64),
        )?);
    }
    train(&mut envs, params, trainer_cfg, seed)
}
