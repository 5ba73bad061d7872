//! Human behavior policies (ORCA, Social Force), scenario generation, goal
//! resampling, and the out-of-distribution variant generators.

pub mod orca;
pub mod scenario;
pub mod social_force;

use crate::geom::Vec2;

/// Read-only view of another agent, as seen by a behavior policy.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Velocity an agent would like to take, absent any neighbor: the unit vector
/// to the goal scaled by max speed, shortened near the goal so one Euler step
/// lands exactly on it.
pub fn preferred_velocity(position: Vec2, goal: Vec2, max_speed: f64, dt: f64) -> Vec2 {
    let to_goal = goal - position;
    let d = to_goal.norm();
    if d < 1e-12 {
        Vec2::ZERO
    } else if d <= max_speed * dt {
        to_goal / dt
    } else {
        to_goal * (max_speed / d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preferred_velocity_points_to_goal_at_max_speed() {
        let v = preferred_velocity(Vec2::ZERO, Vec2::new(3.0, 4.0), 1.0, 0.25);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v.x - 0.6).abs() < 1e-12 && (v.y - 0.8).abs() < 1e-12);
    }

    #[test]
    fn preferred_velocity_lands_on_near_goal() {
        let v = preferred_velocity(Vec2::ZERO, Vec2::new(0.1, 0.0), 1.0, 0.25);
        assert!((v.x - 0.4).abs() < 1e-12);
    }

    #[test]
    fn preferred_velocity_zero_at_goal() {
        assert_eq!(preferred_velocity(Vec2::ZERO, Vec2::ZERO, 1.0, 0.25), Vec2::ZERO);
    }
}
