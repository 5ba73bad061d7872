//! Scenario configuration, crowd spawning, goal resampling, and the
//! out-of-distribution variant generators.

use super::social_force::SocialForceParams;
use crate::geom::Vec2;
use crate::world::{AgentState, Behavior, Group, RobotState, WorldState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Periodic random goal replacement for humans.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GoalResample {
    /// Resampling is considered every this many steps.
    pub period: u32,
    /// Per-human (or per-group) probability of drawing a fresh goal.
    pub probability: f64,
}

impl Default for GoalResample {
    fn default() -> Self {
        GoalResample {
            period: 5,
            probability: 0.5,
        }
    }
}

/// Cohesive pedestrian group layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupSpec {
    /// Inclusive range of group sizes.
    pub group_size_range: (usize, usize),
    /// Ring radius around the group leader (m).
    pub intra_group_spacing: f64,
    /// Members aim at the leader's goal plus their formation offset.
    pub shared_goal: bool,
}

impl Default for GroupSpec {
    fn default() -> Self {
        GroupSpec {
            group_size_range: (2, 4),
            intra_group_spacing: 0.6,
            shared_goal: true,
        }
    }
}

/// Everything needed to spawn and run one episode family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Arena width and height (m), centered at the origin.
    pub arena: (f64, f64),
    pub human_count: usize,
    pub human_radius_range: (f64, f64),
    pub human_vmax: f64,
    pub robot_vmax: f64,
    pub robot_radius: f64,
    /// Episode time limit (s).
    pub time_limit: f64,
    /// Simulation time step (s).
    pub dt: f64,
    pub behavior: Behavior,
    /// Fraction of humans given `rushing_vmax` instead of `human_vmax`.
    pub rushing_fraction: f64,
    pub rushing_vmax: f64,
    pub grouping: Option<GroupSpec>,
    /// When false, humans ignore the robot entirely.
    pub robot_visible: bool,
    pub goal_resample: GoalResample,
    /// ORCA planning horizon (s).
    pub orca_tau: f64,
    /// ORCA neighbor distance cutoff (m).
    pub orca_neighbor_cutoff: f64,
    pub sf_params: SocialForceParams,
    /// Extra clearance required between spawned agents (m).
    pub spawn_margin: f64,
    /// Robot start and goal must be at least this fraction of the smaller
    /// arena dimension apart.
    pub min_start_goal_frac: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            arena: (12.0, 12.0),
            human_count: 20,
            human_radius_range: (0.3, 0.5),
            human_vmax: 1.0,
            robot_vmax: 1.0,
            robot_radius: 0.2,
            time_limit: 50.0,
            dt: 0.25,
            behavior: Behavior::Orca,
            rushing_fraction: 0.0,
            rushing_vmax: 2.0,
            grouping: None,
            robot_visible: false,
            goal_resample: GoalResample::default(),
            orca_tau: 5.0,
            orca_neighbor_cutoff: 10.0,
            sf_params: SocialForceParams::default(),
            spawn_margin: 0.1,
            min_start_goal_frac: 0.5,
        }
    }
}

impl ScenarioConfig {
    /// Desk-scale training scenario: a small crowd in a small arena.
    pub fn desk() -> Self {
        ScenarioConfig {
            arena: (8.0, 8.0),
            human_count: 5,
            ..ScenarioConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(ScenarioError::InvalidConfig(what.to_string()))
            }
        };
        check(self.arena.0 > 0.0 && self.arena.1 > 0.0, "arena dimensions must be positive")?;
        check(
            self.human_radius_range.0 > 0.0 && self.human_radius_range.1 >= self.human_radius_range.0,
            "human radius range must be nonempty and positive",
        )?;
        check(self.human_vmax > 0.0 && self.robot_vmax > 0.0, "speeds must be positive")?;
        check(self.robot_radius > 0.0, "robot radius must be positive")?;
        check(self.time_limit > 0.0 && self.dt > 0.0, "time values must be positive")?;
        check(
            (0.0..=1.0).contains(&self.rushing_fraction),
            "rushing fraction must lie in [0, 1]",
        )?;
        check(self.rushing_vmax > 0.0, "rushing vmax must be positive")?;
        check(
            (0.0..=1.0).contains(&self.goal_resample.probability),
            "resample probability must lie in [0, 1]",
        )?;
        check(self.goal_resample.period > 0, "resample period must be positive")?;
        check(self.orca_tau > 0.0 && self.orca_neighbor_cutoff > 0.0, "orca parameters must be positive")?;
        check(self.sf_params.is_valid(), "social force parameters must be positive")?;
        if let Some(g) = &self.grouping {
            check(
                g.group_size_range.0 >= 2 && g.group_size_range.1 >= g.group_size_range.0,
                "group sizes must be at least 2",
            )?;
            check(g.intra_group_spacing > 0.0, "group spacing must be positive")?;
        }
        Ok(())
    }

    fn half_extent(&self) -> (f64, f64) {
        (self.arena.0 / 2.0, self.arena.1 / 2.0)
    }
}

/// The three out-of-distribution scenario families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OodVariant {
    Rushing,
    SfModel,
    Groups,
}

impl std::str::FromStr for OodVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rushing" => Ok(OodVariant::Rushing),
            "sf" => Ok(OodVariant::SfModel),
            "groups" => Ok(OodVariant::Groups),
            other => Err(format!("unknown OOD variant '{other}' (expected rushing|sf|groups)")),
        }
    }
}

/// Derives an OOD test configuration from the in-distribution base config.
pub fn make_ood_variant(config: &ScenarioConfig, variant: OodVariant) -> ScenarioConfig {
    let mut out = config.clone();
    match variant {
        OodVariant::Rushing => {
            out.rushing_fraction = 0.2;
            out.rushing_vmax = 2.0;
        }
        OodVariant::SfModel => {
            out.behavior = Behavior::SocialForce;
        }
        OodVariant::Groups => {
            out.grouping = Some(GroupSpec::default());
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("failed to place {entity} after {attempts} attempts")]
    Placement { entity: &'static str, attempts: usize },
}

const PLACEMENT_ATTEMPTS: usize = 2000;

fn sample_point(rng: &mut ChaCha8Rng, half: (f64, f64), inset: f64) -> Vec2 {
    Vec2::new(
        rng.gen_range(-(half.0 - inset)..(half.0 - inset)),
        rng.gen_range(-(half.1 - inset)..(half.1 - inset)),
    )
}

fn clamp_to_arena(p: Vec2, half: (f64, f64), inset: f64) -> Vec2 {
    Vec2::new(
        p.x.clamp(-(half.0 - inset), half.0 - inset),
        p.y.clamp(-(half.1 - inset), half.1 - inset),
    )
}

/// Spawns a fresh episode world: collision-free human placements, robot start
/// and goal, rushing speed assignment, and optional group structure.
pub fn spawn_scenario(config: &ScenarioConfig, seed: u64) -> Result<WorldState, ScenarioError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = config.half_extent();

    let robot_inset = config.robot_radius + config.spawn_margin;
    let robot_start = sample_point(&mut rng, half, robot_inset);
    let min_sep = config.min_start_goal_frac * config.arena.0.min(config.arena.1);
    let mut robot_goal = None;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let g = sample_point(&mut rng, half, robot_inset);
        if g.distance(robot_start) >= min_sep {
            robot_goal = Some(g);
            break;
        }
    }
    let robot_goal = robot_goal.ok_or(ScenarioError::Placement {
        entity: "robot goal",
        attempts: PLACEMENT_ATTEMPTS,
    })?;

    let robot = RobotState {
        position: robot_start,
        velocity: Vec2::ZERO,
        radius: config.robot_radius,
        goal: robot_goal,
        max_speed: config.robot_vmax,
    };

    let mut humans: Vec<AgentState> = Vec::with_capacity(config.human_count);
    let mut groups: Vec<Group> = Vec::new();

    let clear = |p: Vec2, r: f64, humans: &[AgentState], robot: &RobotState, margin: f64| {
        humans
            .iter()
            .all(|h| p.distance(h.position) > r + h.radius + margin)
            && p.distance(robot.position) > r + robot.radius + margin
    };

    let place_human = |rng: &mut ChaCha8Rng,
                       humans: &[AgentState],
                       robot: &RobotState,
                       radius: f64,
                       near: Option<(Vec2, f64)>|
     -> Result<Vec2, ScenarioError> {
        for _ in 0..PLACEMENT_ATTEMPTS {
            let p = match near {
                None => sample_point(rng, half, radius + config.spawn_margin),
                Some((center, ring)) => {
                    let th = rng.gen_range(0.0..std::f64::consts::TAU);
                    let rr = ring * rng.gen_range(0.8..1.2);
                    clamp_to_arena(
                        center + Vec2::new(rr * th.cos(), rr * th.sin()),
                        half,
                        radius + config.spawn_margin,
                    )
                }
            };
            if clear(p, radius, humans, robot, config.spawn_margin) {
                return Ok(p);
            }
        }
        Err(ScenarioError::Placement {
            entity: "human",
            attempts: PLACEMENT_ATTEMPTS,
        })
    };

    let sample_radius = |rng: &mut ChaCha8Rng| {
        let (lo, hi) = config.human_radius_range;
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };

    if let Some(spec) = config.grouping.clone() {
        // Members are placed on a jittered ring around a leader. The spacing
        // is deliberately tighter than the radius sums, so clearance is only
        // enforced against the robot and members of other groups; within a
        // group agents may touch at spawn.
        let mut remaining = config.human_count;
        while remaining > 0 {
            let (lo, hi) = spec.group_size_range;
            let mut size = rng.gen_range(lo..=hi).min(remaining);
            // Never strand a single human as a "group"; fold it in.
            if remaining - size == 1 {
                size += 1;
            }
            size = size.min(remaining);

            let leader_radius = sample_radius(&mut rng);
            // Leaders reserve extra room so neighboring groups stay apart.
            let mut leader_pos = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let p = sample_point(&mut rng, half, leader_radius + config.spawn_margin);
                let room = spec.intra_group_spacing + config.spawn_margin;
                if humans
                    .iter()
                    .all(|h| p.distance(h.position) > leader_radius + h.radius + room)
                    && p.distance(robot.position) > leader_radius + robot.radius + room
                {
                    leader_pos = Some(p);
                    break;
                }
            }
            let leader_pos = leader_pos.ok_or(ScenarioError::Placement {
                entity: "group leader",
                attempts: PLACEMENT_ATTEMPTS,
            })?;
            let goal = sample_point(&mut rng, half, leader_radius + config.spawn_margin);

            let group_start = humans.len();
            let mut members = Vec::with_capacity(size);
            let mut offsets = Vec::with_capacity(size);
            for k in 0..size {
                let radius = if k == 0 { leader_radius } else { sample_radius(&mut rng) };
                let pos = if k == 0 {
                    leader_pos
                } else {
                    let mut found = None;
                    for _ in 0..PLACEMENT_ATTEMPTS {
                        let th = rng.gen_range(0.0..std::f64::consts::TAU);
                        let rr = spec.intra_group_spacing * rng.gen_range(0.8..1.2);
                        let p = clamp_to_arena(
                            leader_pos + Vec2::new(rr * th.cos(), rr * th.sin()),
                            half,
                            radius + config.spawn_margin,
                        );
                        let clear_outside = humans[..group_start]
                            .iter()
                            .all(|h| p.distance(h.position) > radius + h.radius + config.spawn_margin)
                            && p.distance(robot.position)
                                > radius + robot.radius + config.spawn_margin;
                        let not_coincident = humans[group_start..]
                            .iter()
                            .all(|h| p.distance(h.position) > 0.3 * (radius + h.radius));
                        if clear_outside && not_coincident {
                            found = Some(p);
                            break;
                        }
                    }
                    found.ok_or(ScenarioError::Placement {
                        entity: "group member",
                        attempts: PLACEMENT_ATTEMPTS,
                    })?
                };
                let offset = if spec.shared_goal { pos - leader_pos } else { Vec2::ZERO };
                let member_goal = if spec.shared_goal {
                    clamp_to_arena(goal + offset, half, radius + config.spawn_margin)
                } else {
                    sample_point(&mut rng, half, radius + config.spawn_margin)
                };
                members.push(humans.len());
                offsets.push(offset);
                humans.push(AgentState {
                    position: pos,
                    velocity: Vec2::ZERO,
                    radius,
                    goal: member_goal,
                    max_speed: config.human_vmax,
                    behavior: config.behavior,
                });
            }
            groups.push(Group { members, offsets });
            remaining -= size;
        }
    } else {
        for _ in 0..config.human_count {
            let radius = sample_radius(&mut rng);
            let pos = place_human(&mut rng, &humans, &robot, radius, None)?;
            let goal = sample_point(&mut rng, half, radius + config.spawn_margin);
            humans.push(AgentState {
                position: pos,
                velocity: Vec2::ZERO,
                radius,
                goal,
                max_speed: config.human_vmax,
                behavior: config.behavior,
            });
        }
    }

    // Rushing assignment: round(fraction * H) humans, chosen by a seeded shuffle.
    let rushing_count = (config.rushing_fraction * config.human_count as f64).round() as usize;
    if rushing_count > 0 {
        let mut indices: Vec<usize> = (0..config.human_count).collect();
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        for &i in indices.iter().take(rushing_count) {
            humans[i].max_speed = config.rushing_vmax;
        }
    }

    Ok(WorldState {
        humans,
        robot,
        step_index: 0,
        dt: config.dt,
        time_limit: config.time_limit,
        robot_visible: config.robot_visible,
        terminal: None,
        groups,
    })
}

/// Periodically replaces human goals with fresh uniform arena points.
///
/// On steps divisible by the period (excluding step 0, the spawn state), each
/// human independently resamples with the configured probability. Members of
/// a cohesive group resample together: one draw per group, applied to the
/// shared goal with each member's formation offset.
pub fn resample_goals(world: &mut WorldState, config: &ScenarioConfig, rng: &mut ChaCha8Rng) {
    let period = config.goal_resample.period;
    if world.step_index == 0 || world.step_index % period != 0 {
        return;
    }
    let half = (config.arena.0 / 2.0, config.arena.1 / 2.0);
    let p = config.goal_resample.probability;

    if world.groups.is_empty() {
        for h in world.humans.iter_mut() {
            if rng.gen_range(0.0..1.0) < p {
                h.goal = sample_point(rng, half, h.radius + config.spawn_margin);
            }
        }
    } else {
        let groups = world.groups.clone();
        for group in &groups {
            if rng.gen_range(0.0..1.0) < p {
                let inset = config.human_radius_range.1 + config.spawn_margin;
                let goal = sample_point(rng, half, inset);
                for (&member, &offset) in group.members.iter().zip(&group.offsets) {
                    let r = world.humans[member].radius;
                    world.humans[member].goal =
                        clamp_to_arena(goal + offset, half, r + config.spawn_margin);
                }
            }
        }
    }
}
