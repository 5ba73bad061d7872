//! Per-episode orchestration: the simulate → predict → calibrate → cost
//! pipeline shared by training rollouts, evaluation campaigns, and trace
//! emission.

use crate::baselines::{mpc_plan, orca_planner, sf_planner, MpcConfig};
use crate::conformal::{CoverageAccumulator, DtaciBank, DtaciConfig, QueryMode};
use crate::crowd::scenario::{spawn_scenario, ScenarioConfig, ScenarioError};
use crate::geom::Vec2;
use crate::policy::{encode_observation, ObsLayout, Observation, PolicyParams};
use crate::prediction::{ConstantVelocity, PredictionSet, Predictor};
use crate::safety::{build_areas, max_intrusion, step_cost, step_reward, RewardConfig, SafetyConfig};
use crate::trace::{scenario_hash, EpisodeTrace, StepRecord, TraceHeader};
use crate::world::{clamp_velocity, step_episode, Event, WorldError, WorldState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Splitmix64 mixing for deriving independent RNG streams from one seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Everything the per-step pipeline needs besides the scenario itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunnerConfig {
    /// Prediction horizon K.
    pub horizon: usize,
    pub dtaci: DtaciConfig,
    pub query_mode: QueryMode,
    pub safety: SafetyConfig,
    pub reward: RewardConfig,
    /// Ablation: zero out the uncertainty slots in the observation.
    pub zero_uncertainty_obs: bool,
    /// Ground-truth lookahead window for danger annotation.
    pub danger_window: usize,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            horizon: 5,
            dtaci: DtaciConfig::default(),
            query_mode: QueryMode::Sampled,
            safety: SafetyConfig::default(),
            reward: RewardConfig::default(),
            zero_uncertainty_obs: false,
            danger_window: 2,
        }
    }
}

/// Signals produced by one simulator step.
#[derive(Debug, Clone)]
pub struct SimStep {
    pub event: Event,
    pub reward: f64,
    pub cost: f64,
    pub intrusion: f64,
    pub human_contact: bool,
}

/// One live episode: world, predictor, conformal bank, and derived signals.
pub struct EpisodeSim {
    pub world: WorldState,
    pub scenario: ScenarioConfig,
    pub cfg: RunnerConfig,
    pub bank: DtaciBank,
    pub predictions: PredictionSet,
    /// Radii queried at the current state (used by obs, cost, and coverage).
    pub queried: Vec<f64>,
    pub coverage: CoverageAccumulator,
    predictor: Box<dyn Predictor + Send>,
    world_rng: ChaCha8Rng,
    bank_rng: ChaCha8Rng,
}

impl EpisodeSim {
    pub fn new(
        scenario: &ScenarioConfig,
        cfg: &RunnerConfig,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        Self::with_predictor(scenario, cfg, seed, Box::new(ConstantVelocity))
    }

    pub fn with_predictor(
        scenario: &ScenarioConfig,
        cfg: &RunnerConfig,
        seed: u64,
        mut predictor: Box<dyn Predictor + Send>,
    ) -> Result<Self, ScenarioError> {
        let world = spawn_scenario(scenario, derive_seed(seed, 0))?;
        let mut bank = DtaciBank::new(world.humans.len(), cfg.horizon, cfg.dtaci.clone());
        let mut bank_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
        let predictions = predictor.predict(&world, cfg.horizon);
        bank.record_issued(predictions.clone());
        let queried = bank.query(&mut bank_rng, cfg.query_mode);
        Ok(EpisodeSim {
            coverage: CoverageAccumulator::new(cfg.horizon),
            world,
            scenario: scenario.clone(),
            cfg: cfg.clone(),
            bank,
            predictions,
            queried,
            predictor,
            world_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
            bank_rng,
        })
    }

    /// Observation of the current state.
    pub fn observation(&self, layout: ObsLayout) -> Observation {
        let grid;
        let queried = if self.cfg.zero_uncertainty_obs {
            grid = vec![0.0; self.queried.len()];
            &grid
        } else {
            &self.queried
        };
        encode_observation(&self.world, &self.predictions, queried, layout)
    }

    /// Advances the pipeline one step: world dynamics, fresh predictions,
    /// conformal update, safety areas, and the reward/cost signals.
    pub fn step(&mut self, action: Vec2) -> Result<SimStep, WorldError> {
        let transition = step_episode(&self.world, action, &self.scenario, &mut self.world_rng)?;
        self.world = transition.next_state.clone();

        // Measure realized errors against previously issued predictions and
        // pair them with the radii queried one step ago.
        let errors = self.bank.realized_errors(&self.world);
        for h in 0..self.bank.humans() {
            for k in 0..self.bank.horizon() {
                if let Some(delta) = errors[h * self.bank.horizon() + k] {
                    self.coverage
                        .record(k, delta, self.queried[h * self.bank.horizon() + k]);
                }
            }
        }
        self.bank.update(&errors).expect("finite simulator errors");

        self.predictions = self.predictor.predict(&self.world, self.cfg.horizon);
        self.bank.record_issued(self.predictions.clone());
        self.queried = self.bank.query(&mut self.bank_rng, self.cfg.query_mode);

        let areas = build_areas(&self.world, &self.predictions, &self.queried, &self.cfg.safety);
        let intrusion = max_intrusion(self.world.robot.position, &areas);

        Ok(SimStep {
            event: transition.event,
            reward: step_reward(&transition, &self.cfg.reward),
            cost: step_cost(intrusion, self.cfg.safety.mu),
            intrusion,
            human_contact: transition.human_contact,
        })
    }

    pub fn terminated(&self) -> bool {
        self.world.terminal.is_some()
    }
}

/// A robot controller usable in simulation and evaluation.
#[derive(Clone)]
pub enum RobotPolicy {
    Orca,
    SocialForce,
    Mpc { config: MpcConfig, rng: ChaCha8Rng },
    /// Trained network driven deterministically (mean action).
    Network(Box<PolicyParams>),
}

impl RobotPolicy {
    pub fn mpc(config: MpcConfig, seed: u64) -> Self {
        RobotPolicy::Mpc {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RobotPolicy::Orca => "orca",
            RobotPolicy::SocialForce => "sf",
            RobotPolicy::Mpc { .. } => "mpc",
            RobotPolicy::Network(_) => "network",
        }
    }

    /// Re-seeds per-episode internal randomness (MPC sampling).
    pub fn reseed(&mut self, seed: u64) {
        if let RobotPolicy::Mpc { rng, .. } = self {
            *rng = ChaCha8Rng::seed_from_u64(seed);
        }
    }

    pub fn act(&mut self, sim: &EpisodeSim) -> Vec2 {
        let action = match self {
            RobotPolicy::Orca => orca_planner(&sim.world, &sim.scenario),
            RobotPolicy::SocialForce => sf_planner(&sim.world, &sim.scenario),
            RobotPolicy::Mpc { config, rng } => {
                mpc_plan(&sim.world, &sim.predictions, &sim.queried, config, rng)
            }
            RobotPolicy::Network(params) => {
                let layout = ObsLayout {
                    h_max: params.cfg.h_max,
                    horizon: params.cfg.horizon,
                };
                let obs = sim.observation(layout);
                let (mean, _, _, _) = params.forward_one(&obs);
                mean
            }
        };
        clamp_velocity(action, sim.world.robot.max_speed)
    }
}

/// Rolls one full episode and returns its annotated trace.
pub fn run_episode(
    scenario: &ScenarioConfig,
    cfg: &RunnerConfig,
    policy: &mut RobotPolicy,
    seed: u64,
) -> Result<EpisodeTrace, ScenarioError> {
    let mut sim = EpisodeSim::new(scenario, cfg, seed)?;
    policy.reseed(derive_seed(seed, 3));
    let mut steps = Vec::new();
    let header = TraceHeader {
        scenario: scenario.clone(),
        seed,
        policy: policy.label().to_string(),
        config_hash: scenario_hash(scenario),
        start: sim.world.clone(),
    };

    while !sim.terminated() {
        let action = policy.act(&sim);
        let out = sim.step(action).expect("stepping a live episode");
        steps.push(StepRecord {
            step: sim.world.step_index,
            action,
            robot_pos: sim.world.robot.position,
            robot_vel: sim.world.robot.velocity,
            human_pos: sim.world.humans.iter().map(|h| h.position).collect(),
            human_vel: sim.world.humans.iter().map(|h| h.velocity).collect(),
            event: out.event,
            reward: out.reward,
            cost: out.cost,
            intrusion: out.intrusion,
            uncertainty: sim.queried.clone(),
            danger: false,
            min_distance: None,
            human_contact: out.human_contact,
        });
    }

    let mut trace = EpisodeTrace { header, steps };
    trace.annotate_danger(cfg.danger_window);
    Ok(trace)
}

/// Replays a recorded trace through the CV predictor and a fresh DtACI bank,
/// returning the per-horizon coverage of the sampled radii. This is the
/// offline counterpart of the live pipeline's coverage accounting.
pub fn replay_coverage(
    trace: &crate::trace::EpisodeTrace,
    cfg: &RunnerConfig,
    seed: u64,
) -> CoverageAccumulator {
    use crate::prediction::cv_predict;

    let mut world = trace.header.start.clone();
    let humans = world.humans.len();
    let mut bank = DtaciBank::new(humans, cfg.horizon, cfg.dtaci.clone());
    let mut bank_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut coverage = CoverageAccumulator::new(cfg.horizon);

    let predictions = cv_predict(&world, cfg.horizon);
    bank.record_issued(predictions);
    let mut queried = bank.query(&mut bank_rng, cfg.query_mode);

    for record in &trace.steps {
        for (h, human) in world.humans.iter_mut().enumerate() {
            human.position = record.human_pos[h];
            human.velocity = record.human_vel[h];
        }
        world.step_index = record.step;

        let errors = bank.realized_errors(&world);
        for h in 0..humans {
            for k in 0..cfg.horizon {
                if let Some(delta) = errors[h * cfg.horizon + k] {
                    coverage.record(k, delta, queried[h * cfg.horizon + k]);
                }
            }
        }
        bank.update(&errors).expect("finite replay errors");
        let predictions = cv_predict(&world, cfg.horizon);
        bank.record_issued(predictions);
        queried = bank.query(&mut bank_rng, cfg.query_mode);
    }
    coverage
}
