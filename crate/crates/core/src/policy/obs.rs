//! Robot-centric observation encoding.

use crate::geom::Vec2;
use crate::prediction::PredictionSet;
use crate::world::WorldState;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub const ROBOT_DIM: usize = 6;

/// Shape of the observation: up to `h_max` per-human blocks carrying K
/// prediction points and K uncertainty radii each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsLayout {
    pub h_max: usize,
    pub horizon: usize,
}

impl ObsLayout {
    pub fn human_dim(&self) -> usize {
        5 + 3 * self.horizon
    }
}

/// One policy input: a robot block, sorted per-human blocks, and a presence
/// mask. All positions are relative to the robot, so the encoding is
/// translation invariant.
#[derive(Debug, Clone)]
pub struct Observation {
    /// [v_x, v_y, heading, goal_dx, goal_dy, goal_distance]
    pub robot: Vec<f64>,
    /// (h_max, human_dim); masked rows are zero.
    pub humans: Array2<f64>,
    /// 1.0 for present humans, 0.0 for padding.
    pub mask: Vec<f64>,
}

/// Encodes the current state, predictions, and queried uncertainty radii.
///
/// Humans are ordered by ascending distance to the robot (ties broken by
/// index); those beyond `h_max` are dropped farthest-first. Each block is
/// [rel position, rel velocity, radius, K rel prediction points, K radii].
pub fn encode_observation(
    world: &WorldState,
    predictions: &PredictionSet,
    uncertainty: &[f64],
    layout: ObsLayout,
) -> Observation {
    let robot = &world.robot;
    let heading = if robot.velocity.norm() > 1e-9 {
        robot.velocity.y.atan2(robot.velocity.x)
    } else {
        0.0
    };
    let goal_offset = robot.goal - robot.position;
    let robot_block = vec![
        robot.velocity.x,
        robot.velocity.y,
        heading,
        goal_offset.x,
        goal_offset.y,
        goal_offset.norm(),
    ];

    let mut order: Vec<usize> = (0..world.humans.len()).collect();
    order.sort_by(|&a, &b| {
        let da = world.humans[a].position.distance(robot.position);
        let db = world.humans[b].position.distance(robot.position);
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });

    let hd = layout.human_dim();
    let mut humans = Array2::zeros((layout.h_max, hd));
    let mut mask = vec![0.0; layout.h_max];

    for (slot, &h) in order.iter().take(layout.h_max).enumerate() {
        let agent = &world.humans[h];
        let rel_pos = agent.position - robot.position;
        let rel_vel = agent.velocity - robot.velocity;
        let mut row = Vec::with_capacity(hd);
        row.extend([rel_pos.x, rel_pos.y, rel_vel.x, rel_vel.y, agent.radius]);
        for k in 0..layout.horizon {
            let rel: Vec2 = predictions.points[h][k] - robot.position;
            row.extend([rel.x, rel.y]);
        }
        for k in 0..layout.horizon {
            row.push(uncertainty[h * layout.horizon + k]);
        }
        for (j, v) in row.into_iter().enumerate() {
            humans[[slot, j]] = v;
        }
        mask[slot] = 1.0;
    }

    Observation {
        robot: robot_block,
        humans,
        mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::cv_predict;
    use crate::world::{AgentState, Behavior, RobotState};

    fn world(humans: Vec<AgentState>) -> WorldState {
        WorldState {
            humans,
            robot: RobotState {
                position: Vec2::new(1.0, 2.0),
                velocity: Vec2::new(0.5, 0.0),
                radius: 0.2,
                goal: Vec2::new(4.0, 6.0),
                max_speed: 1.0,
            },
            step_index: 0,
            dt: 0.25,
            time_limit: 50.0,
            robot_visible: false,
            terminal: None,
            groups: vec![],
        }
    }

    fn human(position: Vec2, velocity: Vec2) -> AgentState {
        AgentState {
            position,
            velocity,
            radius: 0.35,
            goal: Vec2::ZERO,
            max_speed: 1.0,
            behavior: Behavior::Orca,
        }
    }

    #[test]
    fn zero_humans_all_masked() {
        let w = world(vec![]);
        let preds = cv_predict(&w, 5);
        let obs = encode_observation(&w, &preds, &[], ObsLayout { h_max: 3, horizon: 5 });
        assert_eq!(obs.mask, vec![0.0, 0.0, 0.0]);
        assert!(obs.humans.iter().all(|&v| v == 0.0));
        assert!((obs.robot[5] - 5.0).abs() < 1e-12); // |(3,4)| = 5
    }

    #[test]
    fn translation_leaves_observation_unchanged() {
        let shift = Vec2::new(-7.5, 3.25);
        let base = world(vec![
            human(Vec2::new(2.0, 2.0), Vec2::new(0.1, -0.2)),
            human(Vec2::new(-1.0, 1.0), Vec2::new(-0.3, 0.4)),
        ]);
        let mut moved = base.clone();
        moved.robot.position += shift;
        moved.robot.goal += shift;
        for h in moved.humans.iter_mut() {
            h.position += shift;
            h.goal += shift;
        }
        let layout = ObsLayout { h_max: 2, horizon: 3 };
        let unc = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let a = encode_observation(&base, &cv_predict(&base, 3), &unc, layout);
        let b = encode_observation(&moved, &cv_predict(&moved, 3), &unc, layout);
        assert_eq!(a.robot, b.robot);
        assert!(a
            .humans
            .iter()
            .zip(b.humans.iter())
            .all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn uncertainty_entries_appear_verbatim() {
        let w = world(vec![human(Vec2::new(2.0, 2.0), Vec2::ZERO)]);
        let layout = ObsLayout { h_max: 1, horizon: 2 };
        let unc = vec![0.123, 0.456];
        let obs = encode_observation(&w, &cv_predict(&w, 2), &unc, layout);
        let hd = layout.human_dim();
        assert_eq!(obs.humans[[0, hd - 2]], 0.123);
        assert_eq!(obs.humans[[0, hd - 1]], 0.456);
    }

    #[test]
    fn humans_sorted_by_distance_and_truncated() {
        let w = world(vec![
            human(Vec2::new(9.0, 2.0), Vec2::ZERO),   // distance 8
            human(Vec2::new(1.5, 2.0), Vec2::ZERO),   // distance 0.5
            human(Vec2::new(4.0, 2.0), Vec2::ZERO),   // distance 3
        ]);
        let layout = ObsLayout { h_max: 2, horizon: 1 };
        let unc = vec![0.0; 3];
        let obs = encode_observation(&w, &cv_predict(&w, 1), &unc, layout);
        // Nearest two kept: rel x = 0.5 then 3.0; farthest dropped.
        assert!((obs.humans[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((obs.humans[[1, 0]] - 3.0).abs() < 1e-12);
        assert_eq!(obs.mask, vec![1.0, 1.0]);
    }
}
