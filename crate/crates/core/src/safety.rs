//! Safety-critical areas around humans, maximum intrusion, and the CMDP
//! reward and cost signals.

use crate::geom::Vec2;
use crate::prediction::PredictionSet;
use crate::world::{Event, Transition, WorldState};
use serde::{Deserialize, Serialize};

/// Cost-side configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SafetyConfig {
    /// Comfort radius added around current human positions (m).
    pub r_comfort: f64,
    /// Cost per meter of intrusion: C_t = mu * d_intru.
    pub mu: f64,
    /// Number of prediction horizons whose uncertainty discs enter the cost
    /// (K' <= K); the policy still observes all K.
    pub cost_horizon: usize,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            r_comfort: 0.25,
            mu: 2.5,
            cost_horizon: 2,
        }
    }
}

/// Reward constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardConfig {
    pub success: f64,
    pub collision: f64,
    /// Dense reward coefficient on the per-step displacement toward the goal.
    pub potential_coef: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            success: 10.0,
            collision: -20.0,
            potential_coef: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

/// Comfort discs around current human positions plus uncertainty-inflated
/// discs around the first K' prediction points.
#[derive(Debug, Clone, Default)]
pub struct SafetyAreas {
    pub current_discs: Vec<Disc>,
    pub predicted_discs: Vec<Disc>,
}

/// Assembles the safety areas for one state.
///
/// `uncertainty` is the queried radius grid, h-major with stride
/// `predictions.horizon`.
pub fn build_areas(
    world: &WorldState,
    predictions: &PredictionSet,
    uncertainty: &[f64],
    cfg: &SafetyConfig,
) -> SafetyAreas {
    let r_ego = world.robot.radius;
    let k_prime = cfg.cost_horizon.min(predictions.horizon);
    let mut areas = SafetyAreas {
        current_discs: Vec::with_capacity(world.humans.len()),
        predicted_discs: Vec::with_capacity(world.humans.len() * k_prime),
    };
    for (h, human) in world.humans.iter().enumerate() {
        areas.current_discs.push(Disc {
            center: human.position,
            radius: r_ego + human.radius + cfg.r_comfort,
        });
        for k in 0..k_prime {
            areas.predicted_discs.push(Disc {
                center: predictions.points[h][k],
                radius: r_ego + human.radius + uncertainty[h * predictions.horizon + k],
            });
        }
    }
    areas
}

/// Maximum penetration of the robot center into any safety disc; zero when
/// outside all of them.
pub fn max_intrusion(robot_pos: Vec2, areas: &SafetyAreas) -> f64 {
    areas
        .current_discs
        .iter()
        .chain(&areas.predicted_discs)
        .map(|d| (d.radius - robot_pos.distance(d.center)).max(0.0))
        .fold(0.0, f64::max)
}

/// C_t = mu * d_intru.
pub fn step_cost(d_intru: f64, mu: f64) -> f64 {
    debug_assert!(d_intru >= 0.0);
    mu * d_intru
}

/// Reward for one transition: success and collision terminals, otherwise the
/// dense potential term on progress toward the goal (which also applies on
/// timeout's final step).
pub fn step_reward(transition: &Transition, cfg: &RewardConfig) -> f64 {
    match transition.event {
        Event::ReachedGoal => cfg.success,
        Event::Collision => cfg.collision,
        Event::Running | Event::Timeout => {
            cfg.potential_coef * transition.robot_displacement_toward_goal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{AgentState, Behavior, RobotState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn world_one_human(robot_pos: Vec2, human_pos: Vec2, r_h: f64) -> WorldState {
        WorldState {
            humans: vec![AgentState {
                position: human_pos,
                velocity: Vec2::ZERO,
                radius: r_h,
                goal: human_pos,
                max_speed: 1.0,
                behavior: Behavior::Orca,
            }],
            robot: RobotState {
                position: robot_pos,
                ..RobotState::default()
            },
            step_index: 0,
            dt: 0.25,
            time_limit: 50.0,
            robot_visible: false,
            terminal: None,
            groups: vec![],
        }
    }

    fn preds(points: Vec<Vec<Vec2>>) -> PredictionSet {
        let horizon = points[0].len();
        PredictionSet {
            points,
            issued_at: 0,
            horizon,
        }
    }

    #[test]
    fn comfort_disc_intrusion() {
        let world = world_one_human(Vec2::ZERO, Vec2::new(0.5, 0.0), 0.3);
        let p = preds(vec![vec![Vec2::new(2.0, 0.0)]]);
        let cfg = SafetyConfig {
            cost_horizon: 1,
            ..SafetyConfig::default()
        };
        let areas = build_areas(&world, &p, &[0.1], &cfg);
        // r1 = 0.2 + 0.3 + 0.25 = 0.75; distance 0.5 -> intrusion 0.25.
        assert!((areas.current_discs[0].radius - 0.75).abs() < 1e-12);
        // Predicted disc: r2 = 0.2 + 0.3 + 0.1 = 0.6 at distance 2.0 -> no contribution.
        assert!((areas.predicted_discs[0].radius - 0.6).abs() < 1e-12);
        let d = max_intrusion(world.robot.position, &areas);
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn far_robot_has_zero_intrusion() {
        let world = world_one_human(Vec2::new(50.0, 50.0), Vec2::ZERO, 0.3);
        let p = preds(vec![vec![Vec2::ZERO]]);
        let areas = build_areas(&world, &p, &[0.1], &SafetyConfig::default());
        assert_eq!(max_intrusion(world.robot.position, &areas), 0.0);
    }

    #[test]
    fn cost_is_linear_in_intrusion() {
        assert!((step_cost(0.25, 2.5) - 0.625).abs() < 1e-12);
        assert_eq!(step_cost(0.0, 2.5), 0.0);
        assert!((step_cost(0.25, 5.0) - 2.0 * step_cost(0.25, 2.5)).abs() < 1e-12);
    }

    fn transition_with(event: Event, displacement: f64) -> Transition {
        Transition {
            next_state: world_one_human(Vec2::ZERO, Vec2::new(5.0, 5.0), 0.3),
            event,
            robot_displacement_toward_goal: displacement,
            human_contact: false,
        }
    }

    #[test]
    fn reward_values() {
        let cfg = RewardConfig::default();
        assert_eq!(step_reward(&transition_with(Event::ReachedGoal, 0.2), &cfg), 10.0);
        assert_eq!(step_reward(&transition_with(Event::Collision, 0.2), &cfg), -20.0);
        assert!((step_reward(&transition_with(Event::Running, 0.1), &cfg) - 0.2).abs() < 1e-12);
        // Timeout keeps the potential term on the final step.
        assert!((step_reward(&transition_with(Event::Timeout, -0.05), &cfg) + 0.1).abs() < 1e-12);
    }

    /// Independent check: per-disc depths recomputed one disc at a time,
    /// plus a boundary-sampling estimate of the same depth.
    #[test]
    fn intrusion_matches_per_disc_and_sampling_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let robot = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let discs: Vec<Disc> = (0..rng.gen_range(1..8))
                .map(|_| Disc {
                    center: Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                    radius: rng.gen_range(0.3..1.5),
                })
                .collect();
            let split = rng.gen_range(0..=discs.len());
            let areas = SafetyAreas {
                current_discs: discs[..split].to_vec(),
                predicted_discs: discs[split..].to_vec(),
            };

            let got = max_intrusion(robot, &areas);

            let mut expected: f64 = 0.0;
            for d in &discs {
                let depth = d.radius - (robot - d.center).norm();
                if depth > 0.0 {
                    expected = expected.max(depth);
                }
            }
            assert!((got - expected).abs() < 1e-12);

            // Boundary sampling: depth inside a disc is the min distance to
            // its boundary circle.
            let samples = 2000;
            let mut sampled: f64 = 0.0;
            for d in &discs {
                if robot.distance(d.center) >= d.radius {
                    continue;
                }
                let mut min_dist = f64::INFINITY;
                for i in 0..samples {
                    let th = i as f64 / samples as f64 * std::f64::consts::TAU;
                    let q = d.center + Vec2::new(d.radius * th.cos(), d.radius * th.sin());
                    min_dist = min_dist.min(robot.distance(q));
                }
                sampled = sampled.max(min_dist);
            }
            assert!((got - sampled).abs() < 1e-2, "sampled {sampled} vs {got}");
        }
    }

    #[test]
    fn larger_uncertainty_never_shrinks_intrusion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let world = world_one_human(
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                0.3,
            );
            let p = preds(vec![vec![
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ]]);
            let cfg = SafetyConfig::default();
            let small = [rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5)];
            let big = [small[0] + rng.gen_range(0.0..0.5), small[1] + rng.gen_range(0.0..0.5)];
            let d_small = max_intrusion(
                world.robot.position,
                &build_areas(&world, &p, &small, &cfg),
            );
            let d_big = max_intrusion(world.robot.position, &build_areas(&world, &p, &big, &cfg));
            assert!(d_big >= d_small - 1e-12);
        }
    }

    #[test]
    fn zero_uncertainty_zero_horizon_reduces_to_comfort_discs() {
        let world = world_one_human(Vec2::new(0.4, 0.0), Vec2::ZERO, 0.3);
        let p = preds(vec![vec![Vec2::new(10.0, 0.0)]]);
        let cfg = SafetyConfig {
            cost_horizon: 0,
            ..SafetyConfig::default()
        };
        let areas = build_areas(&world, &p, &[0.0], &cfg);
        assert!(areas.predicted_discs.is_empty());
        let d = max_intrusion(world.robot.position, &areas);
        assert!((d - (0.75 - 0.4)).abs() < 1e-12);
    }
}
