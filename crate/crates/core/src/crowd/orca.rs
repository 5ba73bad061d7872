//! Optimal reciprocal collision avoidance.
//!
//! Velocity-space half-plane constraints, one per neighbor, solved by the
//! classic incremental two-dimensional linear program of van den Berg et al.
//! with a least-violation fallback (the "3D" program) when the constraints
//! are infeasible.

use super::{preferred_velocity, Neighbor};
use crate::geom::Vec2;
use crate::world::AgentState;

const EPSILON: f64 = 1e-10;

/// A directed line in velocity space. Velocities on or to the left of the
/// line (det(direction, v - point) >= 0) satisfy the constraint.
#[derive(Debug, Clone, Copy)]
pub struct Line {
    pub point: Vec2,
    pub direction: Vec2,
}

impl Line {
    /// Signed violation of `v`: positive when `v` is on the infeasible side.
    pub fn violation(&self, v: Vec2) -> f64 {
        self.direction.det(self.point - v)
    }
}

/// ORCA half-plane constraints for one agent against each neighbor, assuming
/// the neighbor takes half the avoidance responsibility.
pub fn orca_lines(
    position: Vec2,
    velocity: Vec2,
    radius: f64,
    neighbors: &[Neighbor],
    dt: f64,
    tau: f64,
) -> Vec<Line> {
    let inv_time_horizon = 1.0 / tau;
    let mut lines = Vec::with_capacity(neighbors.len());

    for other in neighbors {
        let relative_position = other.position - position;
        let relative_velocity = velocity - other.velocity;
        let dist_sq = relative_position.norm_sq();
        let combined_radius = radius + other.radius;
        let combined_radius_sq = combined_radius * combined_radius;

        let direction;
        let u;

        if dist_sq > combined_radius_sq {
            // Not currently colliding: velocity obstacle is a truncated cone.
            let w = relative_velocity - inv_time_horizon * relative_position;
            let w_length_sq = w.norm_sq();
            let dot1 = w.dot(relative_position);

            if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_length_sq {
                // Project on the cut-off circle.
                let w_length = w_length_sq.sqrt();
                let unit_w = w / w_length;
                direction = Vec2::new(unit_w.y, -unit_w.x);
                u = (combined_radius * inv_time_horizon - w_length) * unit_w;
            } else {
                // Project on the nearest leg of the cone.
                let leg = (dist_sq - combined_radius_sq).sqrt();
                if relative_position.det(w) > 0.0 {
                    direction = Vec2::new(
                        relative_position.x * leg - relative_position.y * combined_radius,
                        relative_position.x * combined_radius + relative_position.y * leg,
                    ) / dist_sq;
                } else {
                    direction = -Vec2::new(
                        relative_position.x * leg + relative_position.y * combined_radius,
                        -relative_position.x * combined_radius + relative_position.y * leg,
                    ) / dist_sq;
                }
                let dot2 = relative_velocity.dot(direction);
                u = dot2 * direction - relative_velocity;
            }
        } else {
            // Already in contact: resolve the overlap within one time step.
            let inv_time_step = 1.0 / dt;
            let w = relative_velocity - inv_time_step * relative_position;
            let w_length = w.norm();
            let unit_w = if w_length > 1e-12 {
                w / w_length
            } else {
                // Degenerate: push directly apart (or along x for exact overlap).
                let away = -relative_position.normalized_or_zero();
                if away == Vec2::ZERO {
                    Vec2::new(1.0, 0.0)
                } else {
                    away
                }
            };
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = (combined_radius * inv_time_step - w_length) * unit_w;
        }

        lines.push(Line {
            point: velocity + 0.5 * u,
            direction,
        });
    }

    lines
}

/// Solves for the feasible velocity closest to `pref_velocity` within the
/// speed disc, falling back to the least-violating velocity when the
/// half-planes are mutually infeasible. Returns the velocity and whether the
/// constraints were feasible.
pub fn solve(lines: &[Line], max_speed: f64, pref_velocity: Vec2) -> (Vec2, bool) {
    let mut result = Vec2::ZERO;
    let fail = linear_program2(lines, max_speed, pref_velocity, false, &mut result);
    if fail < lines.len() {
        linear_program3(lines, fail, max_speed, &mut result);
        (result, false)
    } else {
        (result, true)
    }
}

/// New velocity for `agent` avoiding `neighbors`, preferring straight to goal.
pub fn orca_velocity(agent: &AgentState, neighbors: &[Neighbor], dt: f64, tau: f64) -> Vec2 {
    let pref = preferred_velocity(agent.position, agent.goal, agent.max_speed, dt);
    let lines = orca_lines(
        agent.position,
        agent.velocity,
        agent.radius,
        neighbors,
        dt,
        tau,
    );
    solve(&lines, agent.max_speed, pref).0
}

/// Optimizes along one line subject to the disc and all previous lines.
fn linear_program1(
    lines: &[Line],
    line_no: usize,
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let dot_product = lines[line_no].point.dot(lines[line_no].direction);
    let discriminant =
        dot_product * dot_product + radius * radius - lines[line_no].point.norm_sq();
    if discriminant < 0.0 {
        // Max speed disc fully invalidates this line.
        return false;
    }

    let sqrt_discriminant = discriminant.sqrt();
    let mut t_left = -dot_product - sqrt_discriminant;
    let mut t_right = -dot_product + sqrt_discriminant;

    for i in 0..line_no {
        let denominator = lines[line_no].direction.det(lines[i].direction);
        let numerator = lines[i].direction.det(lines[line_no].point - lines[i].point);

        if denominator.abs() <= EPSILON {
            // Parallel lines.
            if numerator < 0.0 {
                return false;
            }
            continue;
        }

        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    if direction_opt {
        if opt_velocity.dot(lines[line_no].direction) > 0.0 {
            *result = lines[line_no].point + t_right * lines[line_no].direction;
        } else {
            *result = lines[line_no].point + t_left * lines[line_no].direction;
        }
    } else {
        let t = lines[line_no]
            .direction
            .dot(opt_velocity - lines[line_no].point);
        let t = t.clamp(t_left, t_right);
        *result = lines[line_no].point + t * lines[line_no].direction;
    }
    true
}

/// Incremental 2D linear program; returns lines.len() on success or the index
/// of the first line that could not be satisfied.
fn linear_program2(
    lines: &[Line],
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> usize {
    if direction_opt {
        // opt_velocity is a unit direction; start at the disc boundary.
        *result = opt_velocity * radius;
    } else if opt_velocity.norm_sq() > radius * radius {
        *result = opt_velocity.normalized_or_zero() * radius;
    } else {
        *result = opt_velocity;
    }

    for i in 0..lines.len() {
        if lines[i].violation(*result) > 0.0 {
            let temp_result = *result;
            if !linear_program1(lines, i, radius, opt_velocity, direction_opt, result) {
                *result = temp_result;
                return i;
            }
        }
    }
    lines.len()
}

/// Least-violation fallback: minimizes the maximum constraint violation.
fn linear_program3(lines: &[Line], begin_line: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;

    for i in begin_line..lines.len() {
        if lines[i].violation(*result) > distance {
            let mut proj_lines: Vec<Line> = Vec::with_capacity(i);
            for j in 0..i {
                let determinant = lines[i].direction.det(lines[j].direction);
                let point;
                if determinant.abs() <= EPSILON {
                    if lines[i].direction.dot(lines[j].direction) > 0.0 {
                        continue;
                    }
                    point = (lines[i].point + lines[j].point) * 0.5;
                } else {
                    point = lines[i].point
                        + (lines[j].direction.det(lines[i].point - lines[j].point) / determinant)
                            * lines[i].direction;
                }
                let direction = (lines[j].direction - lines[i].direction).normalized_or_zero();
                proj_lines.push(Line { point, direction });
            }

            let temp_result = *result;
            if linear_program2(
                &proj_lines,
                radius,
                lines[i].direction.perp(),
                true,
                result,
            ) < proj_lines.len()
            {
                *result = temp_result;
            }
            distance = lines[i].violation(*result);
        }
    }
}
