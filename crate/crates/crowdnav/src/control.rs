//! Per-robot sensing snapshots and the decentralized control strategies:
//! greedy, platoon, and adaptive platoon, all driving the same artificial
//! potential field controller.

use serde::{Deserialize, Serialize};

use crate::crowd::CrowdAgent;
use crate::error::SimError;
use crate::geometry::{segment_intersects_disk, EnvironmentSpec, Vec2, COINCIDENT_EPS};

pub type RobotId = u32;

/// Robot hardware and controller parameters. Angles are stored in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    /// Robot body diameter d_r (m).
    pub body_diameter: f64,
    /// Actuator speed limit (m/s).
    pub max_speed: f64,
    /// Sensing range r_s (m).
    pub sensing_range: f64,
    /// Goal attraction gain.
    pub goal_gain: f64,
    /// Robot repulsion gain.
    pub robot_gain: f64,
    /// Crowd repulsion gain.
    pub crowd_gain: f64,
    /// Boundary repulsion gain.
    pub boundary_gain: f64,
    /// Platoon pause threshold r_p: a leader pauses when its follower is
    /// further away than this.
    pub pause_distance: f64,
    /// Adaptive adoption range r_beta.
    pub adopt_range: f64,
    /// Adaptive drop angle alpha (rad).
    pub drop_angle: f64,
    /// Adaptive adoption angle beta (rad).
    pub adopt_angle: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            body_diameter: 0.3,
            max_speed: 0.6,
            sensing_range: 1.5,
            goal_gain: 3.5,
            robot_gain: 0.2,
            crowd_gain: 0.1,
            boundary_gain: 0.1,
            pause_distance: 0.6,
            adopt_range: 0.6,
            drop_angle: 20.0_f64.to_radians(),
            adopt_angle: 5.0_f64.to_radians(),
        }
    }
}

impl RobotParams {
    pub fn radius(&self) -> f64 {
        self.body_diameter / 2.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positives = [
            self.body_diameter,
            self.max_speed,
            self.sensing_range,
            self.goal_gain,
            self.robot_gain,
            self.crowd_gain,
            self.boundary_gain,
            self.pause_distance,
            self.adopt_range,
            self.drop_angle,
            self.adopt_angle,
        ];
        if positives.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(SimError::InvalidConfig(
                "robot parameters must be strictly positive and finite".into(),
            ));
        }
        if self.pause_distance >= self.sensing_range {
            return Err(SimError::InvalidConfig(
                "pause_distance must be below sensing_range".into(),
            ));
        }
        if self.adopt_range >= self.sensing_range {
            return Err(SimError::InvalidConfig(
                "adopt_range must be below sensing_range".into(),
            ));
        }
        Ok(())
    }
}

/// One robot's local view of the world, all positions relative to itself and
/// strictly within sensing range.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorSnapshot {
    /// IDs and relative positions of sensed robots.
    pub neighbors: Vec<(RobotId, Vec2)>,
    /// Relative positions of sensed crowd agents.
    pub crowd_rel: Vec<Vec2>,
    /// Relative position of the nearest solid boundary point, if in range.
    pub boundary_rel: Option<Vec2>,
}

impl SensorSnapshot {
    pub fn neighbor(&self, id: RobotId) -> Option<Vec2> {
        self.neighbors
            .iter()
            .find(|(nid, _)| *nid == id)
            .map(|(_, rel)| *rel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Greedy,
    Platoon,
    AdaptivePlatoon,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Greedy => "greedy",
            StrategyKind::Platoon => "platoon",
            StrategyKind::AdaptivePlatoon => "adaptive-platoon",
        }
    }
}

/// Per-robot strategy state. For platoon the leader link is fixed at
/// initialization; for adaptive platoon it changes at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyState {
    pub kind: StrategyKind,
    /// Current leader, if any.
    pub leader: Option<RobotId>,
    /// Designated follower (platoon pause rule); fixed at initialization.
    pub follower: Option<RobotId>,
    /// Robot currently following us, learned from notifications.
    pub followed_by: Option<RobotId>,
    /// Set when the platoon pause rule fired this step.
    pub paused: bool,
    /// Landmark direction toward the goal region, fixed at time 0.
    pub goal_dir: Vec2,
}

impl StrategyState {
    pub fn new(kind: StrategyKind, id: RobotId, n_robots: usize) -> StrategyState {
        let chain = matches!(kind, StrategyKind::Platoon | StrategyKind::AdaptivePlatoon);
        let has_successor = (id as usize) < n_robots;
        StrategyState {
            kind,
            leader: if chain && id > 1 { Some(id - 1) } else { None },
            follower: if matches!(kind, StrategyKind::Platoon) && has_successor {
                Some(id + 1)
            } else {
                None
            },
            followed_by: if chain && has_successor { Some(id + 1) } else { None },
            paused: false,
            goal_dir: Vec2::new(1.0, 0.0),
        }
    }
}

/// Saturated velocity command; the invariant `|u| <= v_max` is enforced by
/// construction through [`clamp_velocity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand(Vec2);

impl VelocityCommand {
    pub fn vec(self) -> Vec2 {
        self.0
    }
}

/// Scale the desired velocity down to the actuator limit, preserving its
/// direction.
pub fn clamp_velocity(v_des: Vec2, v_max: f64) -> VelocityCommand {
    debug_assert!(v_max > 0.0);
    let n = v_des.norm();
    if n <= v_max {
        VelocityCommand(v_des)
    } else {
        VelocityCommand(v_des * (v_max / n))
    }
}

/// Build the sensing snapshot for the robot at `index` (ID `index + 1`).
/// Neighbors and crowd agents are included iff their minimum-image distance
/// is strictly below the sensing range.
pub fn build_snapshot(
    index: usize,
    robot_positions: &[Vec2],
    crowd: &[CrowdAgent],
    env: &EnvironmentSpec,
    params: &RobotParams,
) -> SensorSnapshot {
    let own = robot_positions[index];
    let r_s = params.sensing_range;
    let mut neighbors = Vec::new();
    for (j, pos) in robot_positions.iter().enumerate() {
        if j == index {
            continue;
        }
        let rel = env.displacement(own, *pos);
        if rel.norm() < r_s {
            neighbors.push((j as RobotId + 1, rel));
        }
    }
    let mut crowd_rel = Vec::new();
    for agent in crowd {
        let rel = env.displacement(own, agent.pos);
        if rel.norm() < r_s {
            crowd_rel.push(rel);
        }
    }
    SensorSnapshot {
        neighbors,
        crowd_rel,
        boundary_rel: env.closest_boundary_point(own, r_s),
    }
}

fn inverse_cube(q: Vec2) -> Vec2 {
    let d = q.norm();
    if d < COINCIDENT_EPS {
        Vec2::ZERO
    } else {
        q * (1.0 / (d * d * d))
    }
}

/// Artificial potential field force: unit attraction toward `goal` plus
/// inverse-square repulsion from sensed robots, crowd agents, and the nearest
/// boundary point. A zero goal drops the attraction term (pure repulsion).
pub fn apf_force(snapshot: &SensorSnapshot, goal: Vec2, params: &RobotParams) -> Vec2 {
    let mut f = Vec2::ZERO;
    if let Some(dir) = goal.normalized() {
        f += dir * params.goal_gain;
    }
    for (_, q) in &snapshot.neighbors {
        f -= inverse_cube(*q) * params.robot_gain;
    }
    for q in &snapshot.crowd_rel {
        f -= inverse_cube(*q) * params.crowd_gain;
    }
    if let Some(q) = snapshot.boundary_rel {
        f -= inverse_cube(q) * params.boundary_gain;
    }
    f
}

/// Fixed landmark direction toward the goal region.
pub fn greedy_goal(state: &StrategyState) -> Vec2 {
    state.goal_dir
}

/// Platoon goal: track the leader while keeping one body diameter of
/// separation. Absent when the leader is out of sensing range.
pub fn platoon_goal(snapshot: &SensorSnapshot, leader: RobotId, d_r: f64) -> Option<Vec2> {
    let rel = snapshot.neighbor(leader)?;
    let dist = rel.norm();
    if dist < COINCIDENT_EPS {
        return Some(Vec2::ZERO);
    }
    Some(rel * (1.0 - d_r / dist))
}

/// Pause rule: true when the designated follower is unseen or trails further
/// than `r_p`.
pub fn platoon_pause(snapshot: &SensorSnapshot, follower: RobotId, r_p: f64) -> bool {
    match snapshot.neighbor(follower) {
        Some(rel) => rel.norm() > r_p,
        None => true,
    }
}

/// One adaptive-platoon update: drop the leader when it is out of range,
/// occluded by a sensed comfort zone, or deviates from the landmark direction
/// by at least `drop_angle`; otherwise, when leaderless, adopt the nearest
/// unfollowed neighbor within `adopt_range` and `adopt_angle` of the landmark
/// direction. `is_followed` holds the notification flags from the previous
/// step, indexed by robot ID minus one.
pub fn adaptive_update(
    state: &StrategyState,
    snapshot: &SensorSnapshot,
    comfort_radius: f64,
    is_followed: &[bool],
    params: &RobotParams,
) -> StrategyState {
    debug_assert_eq!(state.kind, StrategyKind::AdaptivePlatoon);
    let mut next = *state;
    if let Some(leader) = state.leader {
        let keep = match snapshot.neighbor(leader) {
            None => false,
            Some(rel) => {
                !is_occluded(snapshot, rel, comfort_radius)
                    && rel.angle_between(state.goal_dir) < params.drop_angle
            }
        };
        if !keep {
            next.leader = None;
        }
    } else {
        let mut candidates: Vec<(RobotId, Vec2, f64)> = snapshot
            .neighbors
            .iter()
            .map(|(id, rel)| (*id, *rel, rel.norm()))
            .collect();
        candidates.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
        for (id, rel, dist) in candidates {
            let followed = is_followed.get(id as usize - 1).copied().unwrap_or(false);
            if !followed
                && dist < params.adopt_range
                && rel.angle_between(state.goal_dir) <= params.adopt_angle
            {
                next.leader = Some(id);
                break;
            }
        }
    }
    next
}

fn is_occluded(snapshot: &SensorSnapshot, leader_rel: Vec2, comfort_radius: f64) -> bool {
    snapshot
        .crowd_rel
        .iter()
        .any(|&c| segment_intersects_disk(Vec2::ZERO, leader_rel, c, comfort_radius))
}

/// Desired (pre-saturation) velocity for one robot, plus whether the platoon
/// pause rule fired. Saturation and noise are applied by the engine.
pub fn compute_command(
    state: &StrategyState,
    snapshot: &SensorSnapshot,
    params: &RobotParams,
    dt: f64,
) -> (Vec2, bool) {
    match state.kind {
        StrategyKind::Greedy => (apf_force(snapshot, greedy_goal(state), params) * dt, false),
        StrategyKind::Platoon => {
            if let Some(follower) = state.follower {
                if platoon_pause(snapshot, follower, params.pause_distance) {
                    return (Vec2::ZERO, true);
                }
            }
            let goal = match state.leader {
                None => greedy_goal(state),
                Some(leader) => match platoon_goal(snapshot, leader, params.body_diameter) {
                    Some(g) => g,
                    // Leader out of sensing range: hold position.
                    None => return (Vec2::ZERO, false),
                },
            };
            (apf_force(snapshot, goal, params) * dt, false)
        }
        StrategyKind::AdaptivePlatoon => {
            let goal = state
                .leader
                .and_then(|leader| platoon_goal(snapshot, leader, params.body_diameter))
                .unwrap_or(state.goal_dir);
            (apf_force(snapshot, goal, params) * dt, false)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn close(a: Vec2, b: Vec2) -> bool {
        (a - b).norm() < TOL
    }

    #[test]
    fn clamp_under_cap_unchanged() {
        let u = clamp_velocity(Vec2::new(0.3, 0.4), 0.6);
        assert!(close(u.vec(), Vec2::new(0.3, 0.4)));
    }

    #[test]
    fn clamp_scales_to_cap() {
        // Norm 1.0 scaled by 0.6.
        let u = clamp_velocity(Vec2::new(0.6, 0.8), 0.6);
        assert!(close(u.vec(), Vec2::new(0.36, 0.48)));
        assert!((u.vec().norm() - 0.6).abs() < TOL);
    }

    #[test]
    fn clamp_zero() {
        assert!(close(clamp_velocity(Vec2::ZERO, 0.6).vec(), Vec2::ZERO));
    }

    #[test]
    fn apf_goal_only() {
        let p = RobotParams::default();
        let f = apf_force(&SensorSnapshot::default(), Vec2::new(1.0, 0.0), &p);
        assert!(close(f, Vec2::new(3.5, 0.0)));
    }

    #[test]
    fn apf_with_neighbor() {
        let p = RobotParams::default();
        let snap = SensorSnapshot {
            neighbors: vec![(2, Vec2::new(0.5, 0.0))],
            ..Default::default()
        };
        // 3.5 - 0.2 * 0.5 / 0.125 = 2.7
        let f = apf_force(&snap, Vec2::new(1.0, 0.0), &p);
        assert!(close(f, Vec2::new(2.7, 0.0)));
    }

    #[test]
    fn apf_with_crowd_agent() {
        let p = RobotParams::default();
        let snap = SensorSnapshot {
            crowd_rel: vec![Vec2::new(1.0, 0.0)],
            ..Default::default()
        };
        let f = apf_force(&snap, Vec2::new(1.0, 0.0), &p);
        assert!(close(f, Vec2::new(3.4, 0.0)));
    }

    #[test]
    fn apf_zero_goal_is_pure_repulsion() {
        let p = RobotParams::default();
        let snap = SensorSnapshot {
            neighbors: vec![(2, Vec2::new(0.5, 0.0))],
            ..Default::default()
        };
        let f = apf_force(&snap, Vec2::ZERO, &p);
        assert!(close(f, Vec2::new(-0.8, 0.0)));
    }

    #[test]
    fn apf_repulsion_is_inverse_square() {
        let p = RobotParams::default();
        let near = SensorSnapshot {
            neighbors: vec![(2, Vec2::new(0.4, 0.0))],
            ..Default::default()
        };
        let far = SensorSnapshot {
            neighbors: vec![(2, Vec2::new(0.8, 0.0))],
            ..Default::default()
        };
        let f_near = apf_force(&near, Vec2::ZERO, &p).norm();
        let f_far = apf_force(&far, Vec2::ZERO, &p).norm();
        assert!((f_near / f_far - 4.0).abs() < 1e-9);
    }

    #[test]
    fn platoon_goal_examples() {
        let snap = |rel| SensorSnapshot { neighbors: vec![(1, rel)], ..Default::default() };
        let g = platoon_goal(&snap(Vec2::new(0.6, 0.0)), 1, 0.3).unwrap();
        assert!(close(g, Vec2::new(0.3, 0.0)));
        let g = platoon_goal(&snap(Vec2::new(0.3, 0.0)), 1, 0.3).unwrap();
        assert!(close(g, Vec2::ZERO));
        let g = platoon_goal(&snap(Vec2::new(0.0, 0.9)), 1, 0.3).unwrap();
        assert!(close(g, Vec2::new(0.0, 0.6)));
        assert!(platoon_goal(&SensorSnapshot::default(), 1, 0.3).is_none());
    }

    #[test]
    fn platoon_pause_rule() {
        let snap = |d: f64| SensorSnapshot {
            neighbors: vec![(3, Vec2::new(-d, 0.0))],
            ..Default::default()
        };
        assert!(platoon_pause(&snap(0.7), 3, 0.6));
        assert!(!platoon_pause(&snap(0.5), 3, 0.6));
        // Unseen follower counts as too far.
        assert!(platoon_pause(&SensorSnapshot::default(), 3, 0.6));
    }

    fn adaptive_state() -> StrategyState {
        StrategyState::new(StrategyKind::AdaptivePlatoon, 2, 2)
    }

    #[test]
    fn adaptive_drops_leader_beyond_drop_angle() {
        let params = RobotParams::default();
        let state = adaptive_state();
        // atan2(0.2, 0.5) = 21.8 deg >= 20 deg.
        let snap = SensorSnapshot {
            neighbors: vec![(1, Vec2::new(0.5, 0.2))],
            ..Default::default()
        };
        let next = adaptive_update(&state, &snap, 0.15, &[false; 2], &params);
        assert_eq!(next.leader, None);
    }

    #[test]
    fn adaptive_drops_leader_directly_behind() {
        let params = RobotParams::default();
        let state = adaptive_state();
        let snap = SensorSnapshot {
            neighbors: vec![(1, Vec2::new(-0.5, 0.0))],
            ..Default::default()
        };
        let next = adaptive_update(&state, &snap, 0.15, &[false; 2], &params);
        assert_eq!(next.leader, None);
    }

    #[test]
    fn adaptive_keeps_aligned_leader() {
        let params = RobotParams::default();
        let state = adaptive_state();
        let snap = SensorSnapshot {
            neighbors: vec![(1, Vec2::new(0.5, 0.1))],
            ..Default::default()
        };
        // atan2(0.1, 0.5) = 11.3 deg < 20 deg.
        let next = adaptive_update(&state, &snap, 0.15, &[false; 2], &params);
        assert_eq!(next.leader, Some(1));
    }

    #[test]
    fn adaptive_drops_occluded_leader() {
        let params = RobotParams::default();
        let state = adaptive_state();
        let snap = SensorSnapshot {
            neighbors: vec![(1, Vec2::new(0.5, 0.0))],
            crowd_rel: vec![Vec2::new(0.25, 0.05)],
            ..Default::default()
        };
        let next = adaptive_update(&state, &snap, 0.15, &[false; 2], &params);
        assert_eq!(next.leader, None);
    }

    #[test]
    fn adaptive_adopts_nearest_admissible_candidate() {
        let params = RobotParams::default();
        let mut state = adaptive_state();
        state.leader = None;
        // dist 0.502 < 0.6 and atan2(0.04, 0.5) = 4.6 deg <= 5 deg.
        let snap = SensorSnapshot {
            neighbors: vec![(1, Vec2::new(0.5, 0.04))],
            ..Default::default()
        };
        let next = adaptive_update(&state, &snap, 0.15, &[false; 2], &params);
        assert_eq!(next.leader, Some(1));
    }

    #[test]
    fn adaptive_skips_followed_candidate() {
        let params = RobotParams::default();
        let mut state = adaptive_state();
        state.leader = None;
        let snap = SensorSnapshot {
            neighbors: vec![(1, Vec2::new(0.5, 0.0))],
            ..Default::default()
        };
        let next = adaptive_update(&state, &snap, 0.15, &[true, false], &params);
        assert_eq!(next.leader, None);
    }

    #[test]
    fn adaptive_prefers_closer_candidate() {
        let params = RobotParams::default();
        let mut state = StrategyState::new(StrategyKind::AdaptivePlatoon, 3, 3);
        state.leader = None;
        let snap = SensorSnapshot {
            neighbors: vec![(1, Vec2::new(0.55, 0.0)), (2, Vec2::new(0.4, 0.0))],
            ..Default::default()
        };
        let next = adaptive_update(&state, &snap, 0.15, &[false; 3], &params);
        assert_eq!(next.leader, Some(2));
    }

    #[test]
    fn command_greedy_empty_world() {
        let params = RobotParams::default();
        let state = StrategyState::new(StrategyKind::Greedy, 1, 1);
        let (u, paused) = compute_command(&state, &SensorSnapshot::default(), &params, 0.1);
        assert!(close(u, Vec2::new(0.35, 0.0)));
        assert!(!paused);
    }

    #[test]
    fn command_platoon_pauses_on_lagging_follower() {
        let params = RobotParams::default();
        let state = StrategyState::new(StrategyKind::Platoon, 1, 2);
        let snap = SensorSnapshot {
            neighbors: vec![(2, Vec2::new(-0.7, 0.0))],
            ..Default::default()
        };
        let (u, paused) = compute_command(&state, &snap, &params, 0.1);
        assert_eq!(u, Vec2::ZERO);
        assert!(paused);
    }

    #[test]
    fn command_platoon_holds_without_leader_in_range() {
        let params = RobotParams::default();
        // Robot 2 of 2: no follower, leader 1 unseen.
        let state = StrategyState::new(StrategyKind::Platoon, 2, 2);
        let (u, paused) = compute_command(&state, &SensorSnapshot::default(), &params, 0.1);
        assert_eq!(u, Vec2::ZERO);
        assert!(!paused);
    }

    #[test]
    fn command_adaptive_without_leader_matches_greedy() {
        let params = RobotParams::default();
        let greedy = StrategyState::new(StrategyKind::Greedy, 1, 1);
        let mut adaptive = StrategyState::new(StrategyKind::AdaptivePlatoon, 2, 2);
        adaptive.leader = None;
        let snap = SensorSnapshot {
            crowd_rel: vec![Vec2::new(0.8, 0.3)],
            ..Default::default()
        };
        let (ug, _) = compute_command(&greedy, &snap, &params, 0.1);
        let (ua, _) = compute_command(&adaptive, &snap, &params, 0.1);
        assert!(close(ug, ua));
    }
}
