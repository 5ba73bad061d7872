//! Social force pedestrian model: goal-attraction relaxation plus
//! exponential inter-agent repulsion.

use super::{preferred_velocity, Neighbor};
use crate::geom::Vec2;
use crate::world::{clamp_velocity, AgentState};
use serde::{Deserialize, Serialize};

/// Social force model parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocialForceParams {
    /// Relaxation time tau (s) of the goal-attraction term.
    pub relaxation_time: f64,
    /// Repulsion force scale A.
    pub repulsion_strength: f64,
    /// Repulsion range B (m).
    pub repulsion_range: f64,
    /// Neighbors beyond this distance exert no force (m).
    pub neighbor_cutoff: f64,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        SocialForceParams {
            relaxation_time: 0.5,
            repulsion_strength: 2.0,
            repulsion_range: 0.3,
            neighbor_cutoff: 4.0,
        }
    }
}

impl SocialForceParams {
    pub fn is_valid(&self) -> bool {
        self.relaxation_time > 0.0
            && self.repulsion_strength > 0.0
            && self.repulsion_range > 0.0
            && self.neighbor_cutoff > 0.0
    }
}

/// One social-force velocity update:
/// force = (v_pref - v)/tau + sum_j A exp((r_i + r_j - d_ij)/B) n_ij,
/// then v <- clamp(v + force * dt, max_speed).
pub fn social_force_velocity(
    agent: &AgentState,
    neighbors: &[Neighbor],
    params: &SocialForceParams,
    dt: f64,
) -> Vec2 {
    debug_assert!(params.is_valid());
    let pref = preferred_velocity(agent.position, agent.goal, agent.max_speed, dt);
    let mut force = (pref - agent.velocity) / params.relaxation_time;

    for (j, other) in neighbors.iter().enumerate() {
        let offset = agent.position - other.position;
        let d = offset.norm();
        if d > params.neighbor_cutoff {
            continue;
        }
        let away = if d > 1e-9 {
            offset / d
        } else {
            // Coincident agents: a deterministic direction from the neighbor's
            // list position, spread by the golden angle.
            let th = j as f64 * 2.399963229728653;
            Vec2::new(th.cos(), th.sin())
        };
        let magnitude = params.repulsion_strength
            * ((agent.radius + other.radius - d) / params.repulsion_range).exp();
        force += away * magnitude;
    }

    clamp_velocity(agent.velocity + force * dt, agent.max_speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Behavior;

    fn agent(position: Vec2, velocity: Vec2, goal: Vec2) -> AgentState {
        AgentState {
            position,
            velocity,
            radius: 0.3,
            goal,
            max_speed: 1.0,
            behavior: Behavior::SocialForce,
        }
    }

    #[test]
    fn no_neighbors_at_preferred_velocity_is_fixed_point() {
        let goal = Vec2::new(10.0, 0.0);
        let pref = preferred_velocity(Vec2::ZERO, goal, 1.0, 0.25);
        let a = agent(Vec2::ZERO, pref, goal);
        let v = social_force_velocity(&a, &[], &SocialForceParams::default(), 0.25);
        assert!((v - pref).norm() < 1e-12);
    }

    #[test]
    fn contact_distance_repulsion_has_magnitude_a() {
        // At d = r_i + r_j the exponent is zero, so the repulsion equals A.
        let params = SocialForceParams::default();
        let a = agent(Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        let neighbor = Neighbor {
            position: Vec2::new(0.6, 0.0),
            velocity: Vec2::ZERO,
            radius: 0.3,
        };
        // Zero goal attraction (at goal, zero velocity): force is repulsion only.
        let v = social_force_velocity(&a, &[neighbor], &params, 0.25);
        let expected = Vec2::new(-params.repulsion_strength * 0.25, 0.0);
        assert!((v - expected).norm() < 1e-12, "{v:?}");
    }

    #[test]
    fn symmetric_ring_cancels() {
        let a = agent(Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        let neighbors: Vec<Neighbor> = (0..8)
            .map(|i| {
                let th = i as f64 * std::f64::consts::TAU / 8.0;
                Neighbor {
                    position: Vec2::new(1.5 * th.cos(), 1.5 * th.sin()),
                    velocity: Vec2::ZERO,
                    radius: 0.3,
                }
            })
            .collect();
        let v = social_force_velocity(&a, &neighbors, &SocialForceParams::default(), 0.25);
        assert!(v.norm() < 1e-9, "net force should cancel, got {v:?}");
    }

    #[test]
    fn repulsion_decays_with_distance() {
        let params = SocialForceParams::default();
        let a = agent(Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        let speed_at = |d: f64| {
            let n = Neighbor {
                position: Vec2::new(d, 0.0),
                velocity: Vec2::ZERO,
                radius: 0.3,
            };
            social_force_velocity(&a, &[n], &params, 0.25).norm()
        };
        let mut last = f64::INFINITY;
        for d in [0.7, 1.0, 1.5, 2.0, 3.0] {
            let s = speed_at(d);
            assert!(s < last, "repulsion must decay monotonically");
            last = s;
        }
    }

    #[test]
    fn coincident_agents_get_deterministic_direction() {
        let a = agent(Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        let n = Neighbor {
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            radius: 0.3,
        };
        let v1 = social_force_velocity(&a, &[n], &SocialForceParams::default(), 0.25);
        let v2 = social_force_velocity(&a, &[n], &SocialForceParams::default(), 0.25);
        assert_eq!(v1, v2);
        assert!(v1.norm() > 0.0);
    }
}
