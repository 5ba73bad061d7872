//! Episode state machine: agent kinematics, collision/goal/timeout detection,
//! deterministic stepping.

use crate::crowd::scenario::ScenarioConfig;
use crate::crowd::{orca, social_force};
use crate::geom::Vec2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Behavior policy driving a human agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Behavior {
    Orca,
    SocialForce,
}

/// One human agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub goal: Vec2,
    pub max_speed: f64,
    pub behavior: Behavior,
}

/// The ego robot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub goal: Vec2,
    pub max_speed: f64,
}

impl Default for RobotState {
    fn default() -> Self {
        RobotState {
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            radius: 0.2,
            goal: Vec2::ZERO,
            max_speed: 1.0,
        }
    }
}

/// Group membership: member indices plus each member's formation offset
/// relative to the shared group goal.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Group {
    pub members: Vec<usize>,
    pub offsets: Vec<Vec2>,
}

/// Full simulation state for one episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub humans: Vec<AgentState>,
    pub robot: RobotState,
    pub step_index: u32,
    pub dt: f64,
    pub time_limit: f64,
    pub robot_visible: bool,
    /// Set once a terminal event has been produced; stepping past it is an error.
    #[serde(default)]
    pub terminal: Option<Event>,
    /// Cohesive pedestrian groups (empty unless the scenario enables grouping).
    #[serde(default)]
    pub groups: Vec<Group>,
}

impl WorldState {
    pub fn elapsed(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    /// Maximum number of steps an episode can run before timing out.
    pub fn max_steps(&self) -> u32 {
        (self.time_limit / self.dt).ceil() as u32
    }
}

/// Terminal (or non-terminal) classification of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    Running,
    ReachedGoal,
    Collision,
    Timeout,
}

impl Event {
    pub fn is_terminal(self) -> bool {
        self != Event::Running
    }
}

/// Result of advancing the world by one step.
#[derive(Debug, Clone)]
pub struct Transition {
    pub next_state: WorldState,
    pub event: Event,
    /// d_goal(t-1) - d_goal(t): positive when the robot moved toward its goal.
    pub robot_displacement_toward_goal: f64,
    /// A human-human contact occurred this step (recorded, never terminal).
    pub human_contact: bool,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("robot action must be finite, got ({0}, {1})")]
    NonFiniteAction(f64, f64),
    #[error("episode already terminated with {0:?}")]
    Terminated(Event),
}

/// Rescales `v` onto the disc of radius `v_max`, preserving direction.
pub fn clamp_velocity(v: Vec2, v_max: f64) -> Vec2 {
    debug_assert!(v_max > 0.0);
    let n = v.norm();
    if n <= v_max {
        v
    } else {
        v * (v_max / n)
    }
}

/// Advances the world by one time step.
///
/// The robot velocity is the clamped action; human velocities come from each
/// agent's behavior policy computed synchronously from the current state
/// (ignoring the robot unless `robot_visible`). Goal resampling is applied
/// before behaviors run. All agents then take one Euler step, and the
/// transition is classified with precedence Collision > ReachedGoal > Timeout.
pub fn step_episode(
    world: &WorldState,
    robot_action: Vec2,
    cfg: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Transition, WorldError> {
    if let Some(event) = world.terminal {
        return Err(WorldError::Terminated(event));
    }
    if !robot_action.is_finite() {
        return Err(WorldError::NonFiniteAction(robot_action.x, robot_action.y));
    }

    let mut next = world.clone();
    crate::crowd::scenario::resample_goals(&mut next, cfg, rng);

    // Synchronous update: all human velocities are a function of the pre-step state.
    let snapshot = next.clone();
    let robot_neighbor = crate::crowd::Neighbor {
        position: snapshot.robot.position,
        velocity: snapshot.robot.velocity,
        radius: snapshot.robot.radius,
    };
    let new_velocities: Vec<Vec2> = snapshot
        .humans
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            let neighbors: Vec<crate::crowd::Neighbor> = snapshot
                .humans
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, a)| crate::crowd::Neighbor {
                    position: a.position,
                    velocity: a.velocity,
                    radius: a.radius,
                })
                .chain(snapshot.robot_visible.then_some(robot_neighbor))
                .collect();
            match agent.behavior {
                Behavior::Orca => {
                    let near: Vec<crate::crowd::Neighbor> = neighbors
                        .into_iter()
                        .filter(|n| n.position.distance(agent.position) <= cfg.orca_neighbor_cutoff)
                        .collect();
                    orca::orca_velocity(agent, &near, next.dt, cfg.orca_tau)
                }
                Behavior::SocialForce => {
                    social_force::social_force_velocity(agent, &neighbors, &cfg.sf_params, next.dt)
                }
            }
        })
        .collect();

    let dist_before = world.robot.position.distance(world.robot.goal);

    for (agent, v) in next.humans.iter_mut().zip(new_velocities) {
        agent.velocity = v;
        agent.position += agent.velocity * next.dt;
    }
    next.robot.velocity = clamp_velocity(robot_action, next.robot.max_speed);
    next.robot.position += next.robot.velocity * next.dt;
    next.step_index += 1;

    let dist_after = next.robot.position.distance(next.robot.goal);

    let collision = next.humans.iter().any(|h| {
        next.robot.position.distance(h.position) < next.robot.radius + h.radius
    });
    let reached = dist_after < next.robot.radius;
    let timed_out = next.elapsed() >= next.time_limit - 1e-9;

    let event = if collision {
        Event::Collision
    } else if reached {
        Event::ReachedGoal
    } else if timed_out {
        Event::Timeout
    } else {
        Event::Running
    };
    if event.is_terminal() {
        next.terminal = Some(event);
    }

    let mut human_contact = false;
    'outer: for (i, a) in next.humans.iter().enumerate() {
        for b in next.humans.iter().skip(i + 1) {
            if a.position.distance(b.position) < a.radius + b.radius {
                human_contact = true;
                break 'outer;
            }
        }
    }

    Ok(Transition {
        next_state: next,
        event,
        robot_displacement_toward_goal: dist_before - dist_after,
        human_contact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowd::scenario::ScenarioConfig;
    use rand::SeedableRng;

    fn empty_world() -> (WorldState, ScenarioConfig) {
        let mut cfg = ScenarioConfig::default();
        cfg.human_count = 0;
        let world = WorldState {
            humans: vec![],
            robot: RobotState {
                position: Vec2::ZERO,
                velocity: Vec2::ZERO,
                radius: 0.2,
                goal: Vec2::new(1.0, 0.0),
                max_speed: 1.0,
            },
            step_index: 0,
            dt: 0.25,
            time_limit: 50.0,
            robot_visible: false,
            terminal: None,
            groups: vec![],
        };
        (world, cfg)
    }

    #[test]
    fn euler_step_advances_robot() {
        let (world, cfg) = empty_world();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = step_episode(&world, Vec2::new(1.0, 0.0), &cfg, &mut rng).unwrap();
        assert_eq!(t.next_state.robot.position, Vec2::new(0.25, 0.0));
        assert!((t.robot_displacement_toward_goal - 0.25).abs() < 1e-12);
        assert_eq!(t.event, Event::Running);
    }

    #[test]
    fn zero_distance_goal_is_reached() {
        let (mut world, cfg) = empty_world();
        world.robot.goal = Vec2::new(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // Stay at the goal center: distance 0 < robot radius.
        let t = step_episode(&world, Vec2::ZERO, &cfg, &mut rng).unwrap();
        assert_eq!(t.event, Event::ReachedGoal);
    }

    #[test]
    fn collision_when_distance_below_radius_sum() {
        let (mut world, cfg) = empty_world();
        world.humans.push(AgentState {
            position: Vec2::new(0.3, 0.0),
            velocity: Vec2::ZERO,
            radius: 0.3,
            goal: Vec2::new(0.3, 0.0),
            max_speed: 1.0,
            behavior: Behavior::Orca,
        });
        world.robot.goal = Vec2::new(5.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = step_episode(&world, Vec2::ZERO, &cfg, &mut rng).unwrap();
        // 0.3 < 0.2 + 0.3
        assert_eq!(t.event, Event::Collision);
    }

    #[test]
    fn collision_takes_precedence_over_goal() {
        let (mut world, cfg) = empty_world();
        world.robot.goal = Vec2::ZERO;
        world.humans.push(AgentState {
            position: Vec2::new(0.1, 0.0),
            velocity: Vec2::ZERO,
            radius: 0.3,
            goal: Vec2::new(0.1, 0.0),
            max_speed: 1.0,
            behavior: Behavior::Orca,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = step_episode(&world, Vec2::ZERO, &cfg, &mut rng).unwrap();
        assert_eq!(t.event, Event::Collision);
    }

    #[test]
    fn timeout_at_step_cap() {
        let (mut world, cfg) = empty_world();
        world.robot.goal = Vec2::new(100.0, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cap = world.max_steps();
        assert_eq!(cap, 200);
        let mut steps = 0;
        loop {
            let t = step_episode(&world, Vec2::ZERO, &cfg, &mut rng).unwrap();
            steps += 1;
            if t.event.is_terminal() {
                assert_eq!(t.event, Event::Timeout);
                break;
            }
            world = t.next_state;
        }
        assert_eq!(steps, cap);
    }

    #[test]
    fn stepping_terminated_episode_errors() {
        let (mut world, cfg) = empty_world();
        world.terminal = Some(Event::Collision);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            step_episode(&world, Vec2::ZERO, &cfg, &mut rng),
            Err(WorldError::Terminated(Event::Collision))
        ));
    }

    #[test]
    fn non_finite_action_rejected() {
        let (world, cfg) = empty_world();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            step_episode(&world, Vec2::new(f64::NAN, 0.0), &cfg, &mut rng),
            Err(WorldError::NonFiniteAction(..))
        ));
    }

    #[test]
    fn clamp_velocity_cases() {
        assert_eq!(
            clamp_velocity(Vec2::new(0.6, 0.8), 1.0),
            Vec2::new(0.6, 0.8)
        );
        let c = clamp_velocity(Vec2::new(3.0, 4.0), 1.0);
        assert!((c.x - 0.6).abs() < 1e-12 && (c.y - 0.8).abs() < 1e-12);
        assert_eq!(clamp_velocity(Vec2::ZERO, 2.0), Vec2::ZERO);
    }

    #[test]
    fn speed_bound_after_step() {
        let (world, cfg) = empty_world();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = step_episode(&world, Vec2::new(5.0, -7.0), &cfg, &mut rng).unwrap();
        assert!(t.next_state.robot.velocity.norm() <= 1.0 + 1e-9);
    }
}
