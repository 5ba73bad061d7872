//! Non-learned planners: uncertainty-aware sampling MPC, plus ORCA and
//! social force driving the robot directly.

use crate::crowd::{orca, preferred_velocity, social_force, Neighbor};
use crate::crowd::scenario::ScenarioConfig;
use crate::geom::Vec2;
use crate::prediction::PredictionSet;
use crate::world::{clamp_velocity, WorldState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Random-shooting MPC configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpcConfig {
    /// Planning horizon in steps (must not exceed the prediction horizon).
    pub horizon: usize,
    pub samples: usize,
    pub goal_weight: f64,
    pub collision_weight: f64,
    pub uncertainty_weight: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 5,
            samples: 512,
            goal_weight: 1.0,
            collision_weight: 20.0,
            uncertainty_weight: 2.0,
        }
    }
}

/// One candidate: a straight-to-goal sequence plus random constant and
/// random-walk velocity sequences, all clamped to the speed disc.
fn sample_candidates(
    world: &WorldState,
    cfg: &MpcConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Vec2>> {
    let vmax = world.robot.max_speed;
    let mut candidates = Vec::with_capacity(cfg.samples);

    let straight = preferred_velocity(
        world.robot.position,
        world.robot.goal,
        vmax,
        world.dt,
    );
    candidates.push(vec![straight; cfg.horizon]);

    while candidates.len() < cfg.samples {
        let constant = candidates.len() % 2 == 0;
        let mut seq = Vec::with_capacity(cfg.horizon);
        let mut v = random_in_disc(vmax, rng);
        for _ in 0..cfg.horizon {
            seq.push(v);
            if !constant {
                v = clamp_velocity(v + random_in_disc(0.5 * vmax, rng), vmax);
            }
        }
        candidates.push(seq);
    }
    candidates
}

fn random_in_disc(radius: f64, rng: &mut ChaCha8Rng) -> Vec2 {
    let r = radius * rng.gen_range(0.0_f64..1.0).sqrt();
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    Vec2::new(r * th.cos(), r * th.sin())
}

/// Rolls one candidate forward against the predicted human discs; returns
/// (objective, minimum clearance to predicted human centers).
///
/// The hard term sums true-radius penetrations; the uncertainty term takes
/// the single worst penetration of an inflated disc over the rollout, which
/// ties it directly to the path's closest uncertain encounter.
fn rollout_cost(
    world: &WorldState,
    predictions: &PredictionSet,
    uncertainty: &[f64],
    cfg: &MpcConfig,
    seq: &[Vec2],
) -> (f64, f64) {
    let r_ego = world.robot.radius;
    let horizon = cfg.horizon.min(predictions.horizon);
    let mut pos = world.robot.position;
    let mut hard = 0.0;
    let mut soft: f64 = 0.0;
    let mut min_clearance = f64::INFINITY;

    for (i, &v) in seq.iter().take(horizon).enumerate() {
        pos += v * world.dt;
        for (h, human) in world.humans.iter().enumerate() {
            let predicted = predictions.points[h][i];
            let d = pos.distance(predicted);
            min_clearance = min_clearance.min(d);
            hard += (r_ego + human.radius - d).max(0.0);
            let inflated = r_ego + human.radius + uncertainty[h * predictions.horizon + i];
            soft = soft.max(inflated - d);
        }
    }
    let terminal = pos.distance(world.robot.goal);
    (
        cfg.goal_weight * terminal
            + cfg.collision_weight * hard
            + cfg.uncertainty_weight * soft.max(0.0),
        min_clearance,
    )
}

/// Samples velocity sequences, scores them against uncertainty-inflated
/// prediction discs, and returns the first action of the best sequence.
pub fn mpc_plan(
    world: &WorldState,
    predictions: &PredictionSet,
    uncertainty: &[f64],
    cfg: &MpcConfig,
    rng: &mut ChaCha8Rng,
) -> Vec2 {
    let candidates = sample_candidates(world, cfg, rng);
    let mut best = candidates[0].clone();
    let mut best_cost = f64::INFINITY;
    for seq in &candidates {
        let (cost, _) = rollout_cost(world, predictions, uncertainty, cfg, seq);
        if cost < best_cost {
            best_cost = cost;
            best = seq.clone();
        }
    }
    clamp_velocity(best[0], world.robot.max_speed)
}

fn human_neighbors(world: &WorldState) -> Vec<Neighbor> {
    world
        .humans
        .iter()
        .map(|h| Neighbor {
            position: h.position,
            velocity: h.velocity,
            radius: h.radius,
        })
        .collect()
}

/// ORCA with the robot as ego agent and humans as neighbors.
pub fn orca_planner(world: &WorldState, cfg: &ScenarioConfig) -> Vec2 {
    let robot = &world.robot;
    let pref = preferred_velocity(robot.position, robot.goal, robot.max_speed, world.dt);
    let neighbors: Vec<Neighbor> = human_neighbors(world)
        .into_iter()
        .filter(|n| n.position.distance(robot.position) <= cfg.orca_neighbor_cutoff)
        .collect();
    let lines = orca::orca_lines(
        robot.position,
        robot.velocity,
        robot.radius,
        &neighbors,
        world.dt,
        cfg.orca_tau,
    );
    orca::solve(&lines, robot.max_speed, pref).0
}

/// Social force with the robot as ego agent.
pub fn sf_planner(world: &WorldState, cfg: &ScenarioConfig) -> Vec2 {
    let robot = &world.robot;
    let pseudo = crate::world::AgentState {
        position: robot.position,
        velocity: robot.velocity,
        radius: robot.radius,
        goal: robot.goal,
        max_speed: robot.max_speed,
        behavior: crate::world::Behavior::SocialForce,
    };
    social_force::social_force_velocity(&pseudo, &human_neighbors(world), &cfg.sf_params, world.dt)
}
