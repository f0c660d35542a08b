//! World state and the synchronous step loop: control, crowd forces,
//! integration, actuation noise, overlap resolution, counter-flow respawn,
//! and the arrival/interception metrics.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{
    adaptive_update, build_snapshot, clamp_velocity, compute_command, RobotId, RobotParams,
    StrategyKind, StrategyState,
};
use crate::crowd::{
    environment_for, respawn_counter_flow, step_crowd, CrowdAgent, CrowdModelParams, Scenario,
};
use crate::error::SimError;
use crate::geometry::{sample_positions, EnvironmentSpec, SimRng, Vec2, COINCIDENT_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Sampling time (s).
    pub dt: f64,
    /// Simulation budget (s); a trial that exceeds it counts as a timeout.
    pub timeout: f64,
    /// Actuation noise: per-component Gaussian std dev as a fraction of the
    /// commanded component.
    pub noise_factor: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams { dt: 0.1, timeout: 900.0, noise_factor: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formation {
    Line,
    Random,
}

impl Formation {
    pub fn label(self) -> &'static str {
        match self {
            Formation::Line => "line",
            Formation::Random => "random",
        }
    }
}

/// Reading of the 0.5 m line spacing: between robot centers, or as the gap
/// between robot bodies (centers 0.5 + d_r apart).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSpacing {
    CenterToCenter,
    Gap,
}

/// Complete description of one trial; together with the seed it determines
/// the run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub scenario: Scenario,
    pub strategy: StrategyKind,
    pub density: f64,
    pub n_robots: usize,
    pub formation: Formation,
    pub seed: u64,
    /// Crowd comfort-zone diameter d_c (m).
    pub comfort_diameter: f64,
    pub line_spacing: LineSpacing,
    /// Permit the random formation with non-greedy strategies.
    pub allow_random_any_strategy: bool,
    pub robot: RobotParams,
    pub crowd: CrowdModelParams,
    pub sim: SimParams,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            scenario: Scenario::Passive,
            strategy: StrategyKind::Greedy,
            density: 0.0,
            n_robots: 10,
            formation: Formation::Line,
            seed: 0,
            comfort_diameter: 0.3,
            line_spacing: LineSpacing::CenterToCenter,
            allow_random_any_strategy: false,
            robot: RobotParams::default(),
            crowd: CrowdModelParams::default(),
            sim: SimParams::default(),
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_robots == 0 {
            return Err(SimError::InvalidConfig("n_robots must be at least 1".into()));
        }
        self.validate_shared()
    }

    /// Validation that also applies to robot-free (baseline) worlds.
    pub(crate) fn validate_shared(&self) -> Result<(), SimError> {
        if !(self.density >= 0.0) || !self.density.is_finite() {
            return Err(SimError::InvalidConfig("density must be non-negative".into()));
        }
        if !(self.comfort_diameter > 0.0) {
            return Err(SimError::InvalidConfig("comfort_diameter must be positive".into()));
        }
        if !(self.sim.dt > 0.0) || !(self.sim.timeout > 0.0) {
            return Err(SimError::InvalidConfig("dt and timeout must be positive".into()));
        }
        if !(self.sim.noise_factor >= 0.0) {
            return Err(SimError::InvalidConfig("noise_factor must be non-negative".into()));
        }
        if self.formation == Formation::Random
            && self.strategy != StrategyKind::Greedy
            && !self.allow_random_any_strategy
        {
            return Err(SimError::InvalidConfig(
                "the random formation is only used with the greedy strategy \
                 (set allow_random_any_strategy to override)"
                    .into(),
            ));
        }
        self.robot.validate()?;
        self.crowd.validate()?;
        Ok(())
    }

    pub fn environment(&self) -> EnvironmentSpec {
        environment_for(self.scenario)
    }
}

/// Number of crowd agents for a density over an area, where each agent
/// occupies a comfort disk of diameter `comfort_diameter`.
pub fn n_crowd(density: f64, area: f64, comfort_diameter: f64) -> usize {
    (density * area / (std::f64::consts::FRAC_PI_4 * comfort_diameter * comfort_diameter)).floor()
        as usize
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub k: u64,
    pub robot_positions: Vec<Vec2>,
    pub strategies: Vec<StrategyState>,
    /// Velocity applied to each robot during the last step.
    pub commands: Vec<Vec2>,
    pub crowd: Vec<CrowdAgent>,
    pub rng: SimRng,
    pub arrivals: Vec<Option<u64>>,
    pub first_entry_k: Option<u64>,
    pub interception_onsets: u64,
    pub interception_steps: u64,
    pub respawns: u64,
    overlap_pairs: HashSet<(RobotId, u32)>,
    followed_flags: Vec<bool>,
    next_agent_id: u32,
}

impl WorldState {
    pub fn all_arrived(&self) -> bool {
        !self.arrivals.is_empty() && self.arrivals.iter().all(Option::is_some)
    }

    pub fn robot_id(index: usize) -> RobotId {
        index as RobotId + 1
    }
}

/// Build the initial world: robots in formation (IDs assigned right to left,
/// robot 1 closest to the crowd region), crowd rejection-sampled in the crowd
/// region, everything at rest, counters zeroed.
pub fn init_trial(config: &TrialConfig) -> Result<WorldState, SimError> {
    config.validate()?;
    init_world(config, &config.environment(), config.n_robots)
}

pub(crate) fn init_world(
    config: &TrialConfig,
    env: &EnvironmentSpec,
    n_robots: usize,
) -> Result<WorldState, SimError> {
    env.validate()?;
    let mut rng = SimRng::seed_from_u64(config.seed);
    let spacing = match config.line_spacing {
        LineSpacing::CenterToCenter => 0.5,
        LineSpacing::Gap => 0.5 + config.robot.body_diameter,
    };
    let mid_y = (env.crowd_region.y_min + env.crowd_region.y_max) / 2.0;
    let mut robot_positions = Vec::with_capacity(n_robots);
    for i in 0..n_robots {
        let x = env.start_x_max - 3.0 - spacing * i as f64;
        let y = match config.formation {
            Formation::Line => mid_y,
            Formation::Random => rng.random_range(
                env.crowd_region.y_min + 0.5..=env.crowd_region.y_max - 0.5,
            ),
        };
        robot_positions.push(Vec2::new(x, y));
    }
    let strategies: Vec<StrategyState> = (0..n_robots)
        .map(|i| StrategyState::new(config.strategy, WorldState::robot_id(i), n_robots))
        .collect();

    let comfort_radius = config.comfort_diameter / 2.0;
    let n_agents = n_crowd(config.density, env.crowd_region.area(), config.comfort_diameter);
    let crowd_positions =
        sample_positions(&env.crowd_region, n_agents, config.comfort_diameter, &mut rng)?;
    let desired_dir = config.scenario.desired_direction();
    let crowd: Vec<CrowdAgent> = crowd_positions
        .into_iter()
        .enumerate()
        .map(|(i, pos)| CrowdAgent {
            id: i as u32,
            pos,
            vel: Vec2::ZERO,
            desired_dir,
            comfort_radius,
        })
        .collect();

    // Initial notification flags: in a chain every robot except the last is
    // being followed.
    let followed_flags = (0..n_robots)
        .map(|i| {
            matches!(config.strategy, StrategyKind::AdaptivePlatoon) && i + 1 < n_robots
        })
        .collect();

    let mut world = WorldState {
        k: 0,
        commands: vec![Vec2::ZERO; n_robots],
        robot_positions,
        strategies,
        crowd,
        rng,
        arrivals: vec![None; n_robots],
        first_entry_k: None,
        interception_onsets: 0,
        interception_steps: 0,
        respawns: 0,
        overlap_pairs: HashSet::new(),
        followed_flags,
        next_agent_id: n_agents as u32,
    };
    // Evaluate entry/arrival on the initial state as well; for the standard
    // formations this never fires because robots start deep in the start
    // region.
    let initial_overlaps = detect_robot_crowd_overlaps(&world, env, &config.robot);
    update_metrics(&mut world, env, &config.robot, initial_overlaps, 0);
    Ok(world)
}

/// Add zero-mean Gaussian noise with per-component std dev
/// `noise_factor * |component|`. The caller re-clamps the result.
pub fn apply_noise(u: Vec2, rng: &mut SimRng, noise_factor: f64) -> Vec2 {
    debug_assert!(noise_factor >= 0.0);
    Vec2::new(
        noisy_component(u.x, rng, noise_factor),
        noisy_component(u.y, rng, noise_factor),
    )
}

fn noisy_component(x: f64, rng: &mut SimRng, noise_factor: f64) -> f64 {
    let sigma = noise_factor * x.abs();
    if sigma > 0.0 {
        x + Normal::new(0.0, sigma).unwrap().sample(rng)
    } else {
        x
    }
}

/// Separate overlapping robot-robot and robot-crowd pairs by half the
/// penetration depth each, then push anyone overlapping a solid wall back
/// inside by the full penetration. A single sequential pass in ascending
/// (id, id) order; residuals from chained overlaps are left for later steps.
pub fn resolve_overlaps(
    robot_positions: &mut [Vec2],
    robot_radius: f64,
    crowd: &mut [CrowdAgent],
    env: &EnvironmentSpec,
) {
    let n = robot_positions.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (robot_positions[i], robot_positions[j]);
            if let Some((da, db)) = pair_separation(a, b, 2.0 * robot_radius, env) {
                robot_positions[i] = a + da;
                robot_positions[j] = b + db;
            }
        }
    }
    for i in 0..n {
        for agent in crowd.iter_mut() {
            let (a, b) = (robot_positions[i], agent.pos);
            let contact = robot_radius + agent.comfort_radius;
            if let Some((da, db)) = pair_separation(a, b, contact, env) {
                robot_positions[i] = a + da;
                agent.pos = b + db;
            }
        }
    }
    for p in robot_positions.iter_mut() {
        resolve_wall_overlap(p, robot_radius, env);
        *p = env.wrap_position(*p);
    }
    for agent in crowd.iter_mut() {
        resolve_wall_overlap(&mut agent.pos, agent.comfort_radius, env);
        for wall in &env.crowd_walls {
            let depth = wall.disk_penetration(agent.pos, agent.comfort_radius);
            if depth > 0.0 {
                agent.pos = Vec2::new(agent.pos.x + wall.inward_x * depth, agent.pos.y);
            }
        }
        agent.pos = env.wrap_position(agent.pos);
    }
}

/// Displacements moving two overlapping disks apart by half the penetration
/// each, along their (minimum-image) center line. `None` when not
/// overlapping. Coincident centers separate along the y axis.
fn pair_separation(
    a: Vec2,
    b: Vec2,
    contact: f64,
    env: &EnvironmentSpec,
) -> Option<(Vec2, Vec2)> {
    let rel = env.displacement(a, b);
    let dist = rel.norm();
    if dist >= contact {
        return None;
    }
    let dir = if dist < COINCIDENT_EPS {
        Vec2::new(0.0, 1.0)
    } else {
        rel * (1.0 / dist)
    };
    let half = (contact - dist) / 2.0;
    Some((dir * (-half), dir * half))
}

fn resolve_wall_overlap(pos: &mut Vec2, radius: f64, env: &EnvironmentSpec) {
    for wall in &env.walls {
        if let Some((depth, dir)) = wall.disk_penetration(*pos, radius) {
            *pos += dir * depth;
        }
    }
}

fn detect_robot_crowd_overlaps(
    world: &WorldState,
    env: &EnvironmentSpec,
    params: &RobotParams,
) -> HashSet<(RobotId, u32)> {
    let r_r = params.radius();
    let mut pairs = HashSet::new();
    for (i, &pos) in world.robot_positions.iter().enumerate() {
        for agent in &world.crowd {
            let contact = r_r + agent.comfort_radius;
            if env.displacement(pos, agent.pos).norm_sq() < contact * contact {
                pairs.insert((WorldState::robot_id(i), agent.id));
            }
        }
    }
    pairs
}

/// Record first entry into the crowd region, per-robot arrivals (strict
/// first-crossing semantics), and comfort-zone interceptions. Interceptions
/// count overlap onsets: a pair contributes again only after separating.
pub fn update_metrics(
    world: &mut WorldState,
    env: &EnvironmentSpec,
    params: &RobotParams,
    current_overlaps: HashSet<(RobotId, u32)>,
    k: u64,
) {
    let r = params.radius();
    if world.first_entry_k.is_none()
        && world
            .robot_positions
            .iter()
            .any(|&p| env.crowd_region.intersects_disk_interior(p, r))
    {
        world.first_entry_k = Some(k);
    }
    for (i, &pos) in world.robot_positions.iter().enumerate() {
        if world.arrivals[i].is_none() && env.region_contains_disk(env.goal_x_min, pos, r) {
            world.arrivals[i] = Some(k);
        }
    }
    let onsets = current_overlaps
        .iter()
        .filter(|p| !world.overlap_pairs.contains(p))
        .count() as u64;
    world.interception_onsets += onsets;
    world.interception_steps += current_overlaps.len() as u64;
    world.overlap_pairs = current_overlaps;
}

/// Advance the world by one step. All sensing and decisions read the state at
/// time k; integration, overlap resolution, respawn, and metrics follow.
pub fn step(
    world: &mut WorldState,
    config: &TrialConfig,
    env: &EnvironmentSpec,
) -> Result<(), SimError> {
    let dt = config.sim.dt;
    let rp = &config.robot;
    let n = world.robot_positions.len();

    let snapshots: Vec<_> = (0..n)
        .map(|i| build_snapshot(i, &world.robot_positions, &world.crowd, env, rp))
        .collect();

    if config.strategy == StrategyKind::AdaptivePlatoon {
        let flags = std::mem::take(&mut world.followed_flags);
        for i in 0..n {
            world.strategies[i] = adaptive_update(
                &world.strategies[i],
                &snapshots[i],
                config.comfort_diameter / 2.0,
                &flags,
                rp,
            );
        }
        resolve_adoption_races(&mut world.strategies);
        // Notifications for the next step: every held leader is followed.
        let mut new_flags = vec![false; n];
        let mut followed_by = vec![None; n];
        for i in 0..n {
            if let Some(leader) = world.strategies[i].leader {
                new_flags[leader as usize - 1] = true;
                followed_by[leader as usize - 1] = Some(WorldState::robot_id(i));
            }
        }
        for i in 0..n {
            world.strategies[i].followed_by = followed_by[i];
        }
        world.followed_flags = new_flags;
    }

    let mut applied = Vec::with_capacity(n);
    for i in 0..n {
        let (u_des, paused) = compute_command(&world.strategies[i], &snapshots[i], rp, dt);
        world.strategies[i].paused = paused;
        let clamped = clamp_velocity(u_des, rp.max_speed).vec();
        let noisy = apply_noise(clamped, &mut world.rng, config.sim.noise_factor);
        applied.push(clamp_velocity(noisy, rp.max_speed).vec());
    }

    // Crowd forces are evaluated against the robot positions at time k.
    let new_crowd = step_crowd(&world.crowd, &world.robot_positions, &config.crowd, env, dt);
    for i in 0..n {
        world.robot_positions[i] = env.wrap_position(world.robot_positions[i] + applied[i] * dt);
    }
    world.crowd = new_crowd;
    world.commands = applied;

    // Interceptions are what overlap resolution has to undo, so detect them
    // before resolving.
    let current_overlaps = detect_robot_crowd_overlaps(world, env, rp);
    {
        let WorldState { robot_positions, crowd, .. } = world;
        resolve_overlaps(robot_positions, rp.radius(), crowd, env);
    }

    if config.scenario == Scenario::CounterFlow {
        let spawned =
            respawn_counter_flow(&mut world.crowd, env, &mut world.rng, &mut world.next_agent_id)?;
        world.respawns += spawned as u64;
    }

    let k_new = world.k + 1;
    update_metrics(world, env, rp, current_overlaps, k_new);
    world.k = k_new;
    Ok(())
}

/// Simultaneous adoptions of the same leader are decided in favor of the
/// lowest follower ID; everyone else stays leaderless this step.
fn resolve_adoption_races(strategies: &mut [StrategyState]) {
    let n = strategies.len();
    let mut claimed = vec![false; n];
    for i in 0..n {
        if let Some(leader) = strategies[i].leader {
            let slot = &mut claimed[leader as usize - 1];
            if *slot {
                strategies[i].leader = None;
            } else {
                *slot = true;
            }
        }
    }
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// True when some robot failed to arrive within the simulation budget.
    pub timeout: bool,
    /// Time from the first robot entering the crowd region to the last
    /// arrival (s); absent on timeout.
    pub time_to_goal: Option<f64>,
    /// Comfort-zone interception onsets over the whole trial.
    pub interceptions: u64,
    /// Timesteps spent with a robot inside some comfort zone (the
    /// per-timestep variant of the disruption metric).
    pub interception_steps: u64,
    /// Per-robot arrival times (s), indexed by robot ID minus one.
    pub per_robot_arrival: Vec<Option<f64>>,
    /// Time of first contact with the crowd region (s).
    pub first_entry_time: Option<f64>,
    /// Counter-flow respawn count.
    pub respawns: u64,
    /// Steps simulated.
    pub steps: u64,
}

/// Run a trial to completion: until every robot has arrived or the simulated
/// time budget is exhausted. Arrived robots keep simulating under their
/// strategy until the trial ends.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult, SimError> {
    run_trial_observed(config, |_| {})
}

/// Like [`run_trial`], invoking `observer` on the initial state and after
/// every step (for tracing).
pub fn run_trial_observed(
    config: &TrialConfig,
    mut observer: impl FnMut(&WorldState),
) -> Result<TrialResult, SimError> {
    let env = config.environment();
    let mut world = init_trial(config)?;
    observer(&world);
    while !world.all_arrived() && (world.k as f64) * config.sim.dt < config.sim.timeout {
        step(&mut world, config, &env)?;
        observer(&world);
    }
    Ok(trial_result(&world, config))
}

fn trial_result(world: &WorldState, config: &TrialConfig) -> TrialResult {
    let dt = config.sim.dt;
    let timeout = !world.all_arrived();
    let time_to_goal = if timeout {
        None
    } else {
        let last = world.arrivals.iter().map(|a| a.unwrap()).max().unwrap_or(0);
        let entry = world.first_entry_k.unwrap_or(0);
        Some((last.saturating_sub(entry)) as f64 * dt)
    };
    TrialResult {
        timeout,
        time_to_goal,
        interceptions: world.interception_onsets,
        interception_steps: world.interception_steps,
        per_robot_arrival: world
            .arrivals
            .iter()
            .map(|a| a.map(|k| k as f64 * dt))
            .collect(),
        first_entry_time: world.first_entry_k.map(|k| k as f64 * dt),
        respawns: world.respawns,
        steps: world.k,
    }
}
