//! Batch drivers for the paper-scale studies: strategy x density sweeps,
//! the robot-free crowd baseline, and deterministic aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{RobotParams, StrategyKind};
use crate::crowd::{mean_flow_velocity, CrowdModelParams, Scenario};
use crate::engine::{
    init_world, run_trial, step, Formation, LineSpacing, SimParams, TrialConfig, TrialResult,
};
use crate::error::SimError;

pub use crate::engine::n_crowd;

/// Declarative description of a sweep: the Cartesian product of strategies,
/// formations, densities, robot counts, and seeds, sharing one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub scenario: Scenario,
    pub strategies: Vec<StrategyKind>,
    pub densities: Vec<f64>,
    pub n_robots: Vec<usize>,
    pub formations: Vec<Formation>,
    pub seeds: Vec<u64>,
    pub comfort_diameter: f64,
    pub line_spacing: LineSpacing,
    pub allow_random_any_strategy: bool,
    pub robot: RobotParams,
    pub crowd: CrowdModelParams,
    pub sim: SimParams,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            scenario: Scenario::Passive,
            strategies: vec![StrategyKind::Greedy],
            densities: vec![0.1],
            n_robots: vec![10],
            formations: vec![Formation::Line],
            seeds: (0..30).collect(),
            comfort_diameter: 0.3,
            line_spacing: LineSpacing::CenterToCenter,
            allow_random_any_strategy: false,
            robot: RobotParams::default(),
            crowd: CrowdModelParams::default(),
            sim: SimParams::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.strategies.is_empty()
            || self.densities.is_empty()
            || self.n_robots.is_empty()
            || self.formations.is_empty()
            || self.seeds.is_empty()
        {
            return Err(SimError::InvalidConfig(
                "sweep lists must all be non-empty".into(),
            ));
        }
        if self.densities.iter().any(|d| !(0.0..=0.5).contains(d)) {
            return Err(SimError::InvalidConfig(
                "sweep densities must lie in [0, 0.5]".into(),
            ));
        }
        for config in self.configs() {
            config.validate()?;
        }
        Ok(())
    }

    /// All trial configurations in deterministic enumeration order.
    pub fn configs(&self) -> Vec<TrialConfig> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &formation in &self.formations {
                for &density in &self.densities {
                    for &n_robots in &self.n_robots {
                        for &seed in &self.seeds {
                            out.push(TrialConfig {
                                scenario: self.scenario,
                                strategy,
                                density,
                                n_robots,
                                formation,
                                seed,
                                comfort_diameter: self.comfort_diameter,
                                line_spacing: self.line_spacing,
                                allow_random_any_strategy: self.allow_random_any_strategy,
                                robot: self.robot,
                                crowd: self.crowd,
                                sim: self.sim,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Identifies a trial within a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialKey {
    pub scenario: Scenario,
    pub strategy: StrategyKind,
    pub formation: Formation,
    pub density: f64,
    pub n_robots: usize,
    pub seed: u64,
}

impl TrialKey {
    pub fn of(config: &TrialConfig) -> TrialKey {
        TrialKey {
            scenario: config.scenario,
            strategy: config.strategy,
            formation: config.formation,
            density: config.density,
            n_robots: config.n_robots,
            seed: config.seed,
        }
    }

    /// Key without the seed: trials sharing it aggregate into one row.
    fn group(&self) -> (StrategyKind, Formation, String, usize) {
        (self.strategy, self.formation, format!("{:.6}", self.density), self.n_robots)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub key: TrialKey,
    pub result: Result<TrialResult, String>,
}

/// Order statistics of one sweep configuration over its seeds. Timeout trials
/// are excluded from the time quartiles and reported in `timeouts`;
/// interception quartiles cover every completed-or-timed-out trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: Scenario,
    pub strategy: StrategyKind,
    pub formation: Formation,
    pub density: f64,
    pub n_robots: usize,
    pub n_trials: usize,
    pub failures: usize,
    pub timeouts: usize,
    pub time_q1: Option<f64>,
    pub time_median: Option<f64>,
    pub time_q3: Option<f64>,
    pub interceptions_q1: Option<f64>,
    pub interceptions_median: Option<f64>,
    pub interceptions_q3: Option<f64>,
}

/// Linear-interpolation quartiles of an unsorted sample.
pub fn quartiles(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some((
        percentile(&sorted, 0.25),
        percentile(&sorted, 0.5),
        percentile(&sorted, 0.75),
    ))
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = p * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (idx - lo as f64)
    }
}

/// Aggregate the trials of one configuration. Errors on an empty input.
pub fn aggregate(key: &TrialKey, trials: &[&TrialResult]) -> Result<AggregateRow, SimError> {
    if trials.is_empty() {
        return Err(SimError::EmptyInput("cannot aggregate zero trials".into()));
    }
    let times: Vec<f64> = trials.iter().filter_map(|t| t.time_to_goal).collect();
    let interceptions: Vec<f64> = trials.iter().map(|t| t.interceptions as f64).collect();
    let timeouts = trials.iter().filter(|t| t.timeout).count();
    let tq = quartiles(&times);
    let iq = quartiles(&interceptions);
    Ok(AggregateRow {
        scenario: key.scenario,
        strategy: key.strategy,
        formation: key.formation,
        density: key.density,
        n_robots: key.n_robots,
        n_trials: trials.len(),
        failures: 0,
        timeouts,
        time_q1: tq.map(|q| q.0),
        time_median: tq.map(|q| q.1),
        time_q3: tq.map(|q| q.2),
        interceptions_q1: iq.map(|q| q.0),
        interceptions_median: iq.map(|q| q.1),
        interceptions_q3: iq.map(|q| q.2),
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub rows: Vec<AggregateRow>,
}

/// Run every combination of the sweep. Trials run in parallel on up to
/// `jobs` threads (`None`: rayon's default); outputs are ordered by the
/// deterministic enumeration order, so the job count never changes them.
/// Individual trial failures are recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<SweepOutput, SimError> {
    spec.validate()?;
    let configs = spec.configs();
    let results: Vec<Result<TrialResult, String>> = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| {
                configs
                    .par_iter()
                    .map(|c| run_trial(c).map_err(|e| e.to_string()))
                    .collect()
            })
        }
        None => configs
            .par_iter()
            .map(|c| run_trial(c).map_err(|e| e.to_string()))
            .collect(),
    };
    let records: Vec<TrialRecord> = configs
        .iter()
        .zip(results)
        .map(|(config, result)| TrialRecord { key: TrialKey::of(config), result })
        .collect();
    let rows = aggregate_records(&records);
    Ok(SweepOutput { records, rows })
}

/// Group records by configuration (in first-appearance order) and aggregate.
pub fn aggregate_records(records: &[TrialRecord]) -> Vec<AggregateRow> {
    let mut order: Vec<(StrategyKind, Formation, String, usize)> = Vec::new();
    for record in records {
        let group = record.key.group();
        if !order.contains(&group) {
            order.push(group);
        }
    }
    order
        .into_iter()
        .filter_map(|group| {
            let members: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.key.group() == group)
                .collect();
            let ok: Vec<&TrialResult> = members
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .collect();
            let failures = members.len() - ok.len();
            let key = &members[0].key;
            match aggregate(key, &ok) {
                Ok(mut row) => {
                    row.n_trials = members.len();
                    row.failures = failures;
                    Some(row)
                }
                // Every trial of the group failed: emit an all-absent row.
                Err(_) => Some(AggregateRow {
                    scenario: key.scenario,
                    strategy: key.strategy,
                    formation: key.formation,
                    density: key.density,
                    n_robots: key.n_robots,
                    n_trials: members.len(),
                    failures,
                    timeouts: 0,
                    time_q1: None,
                    time_median: None,
                    time_q3: None,
                    interceptions_q1: None,
                    interceptions_median: None,
                    interceptions_q3: None,
                }),
            }
        })
        .collect()
}

/// One row of the crowd-only baseline study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub density: f64,
    pub n_agents: usize,
    pub n_seeds: usize,
    pub failures: usize,
    pub flow_q1: Option<f64>,
    pub flow_median: Option<f64>,
    pub flow_q3: Option<f64>,
}

/// Simulate the crowd in isolation (zero robots) and report the time-averaged
/// mean flow velocity per density. The first half of each run is discarded as
/// warm-up; the statistic is the quartiles over seeds of the trailing-half
/// average.
pub fn crowd_baseline(
    scenario: Scenario,
    densities: &[f64],
    seeds: &[u64],
    duration: f64,
    crowd: &CrowdModelParams,
    jobs: Option<usize>,
) -> Result<Vec<BaselineRow>, SimError> {
    if scenario == Scenario::Passive {
        return Err(SimError::NoFlowDirection);
    }
    if densities.is_empty() || seeds.is_empty() {
        return Err(SimError::EmptyInput("densities and seeds must be non-empty".into()));
    }
    crowd.validate()?;
    let run_one = |density: f64, seed: u64| baseline_flow(scenario, density, seed, duration, crowd);
    let combos: Vec<(f64, u64)> = densities
        .iter()
        .flat_map(|&d| seeds.iter().map(move |&s| (d, s)))
        .collect();
    let flows: Vec<Result<f64, SimError>> = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| combos.par_iter().map(|&(d, s)| run_one(d, s)).collect())
        }
        None => combos.par_iter().map(|&(d, s)| run_one(d, s)).collect(),
    };
    let mut rows = Vec::with_capacity(densities.len());
    for (di, &density) in densities.iter().enumerate() {
        let per_seed: Vec<&Result<f64, SimError>> = flows
            [di * seeds.len()..(di + 1) * seeds.len()]
            .iter()
            .collect();
        let ok: Vec<f64> = per_seed.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let q = quartiles(&ok);
        rows.push(BaselineRow {
            density,
            n_agents: n_crowd(density, 50.0, 0.3),
            n_seeds: seeds.len(),
            failures: seeds.len() - ok.len(),
            flow_q1: q.map(|q| q.0),
            flow_median: q.map(|q| q.1),
            flow_q3: q.map(|q| q.2),
        });
    }
    Ok(rows)
}

/// Trailing-half average of the crowd's mean flow velocity for one seed.
fn baseline_flow(
    scenario: Scenario,
    density: f64,
    seed: u64,
    duration: f64,
    crowd: &CrowdModelParams,
) -> Result<f64, SimError> {
    let config = TrialConfig {
        scenario,
        density,
        seed,
        crowd: *crowd,
        n_robots: 1, // placeholder; the world below is built with zero robots
        ..Default::default()
    };
    config.validate_shared()?;
    let env = config.environment();
    let mut world = init_world(&config, &env, 0)?;
    if world.crowd.is_empty() {
        return Err(SimError::EmptyCrowd);
    }
    let steps = (duration / config.sim.dt).round() as u64;
    let warmup = steps / 2;
    let mut sum = 0.0;
    let mut samples = 0u64;
    for k in 1..=steps {
        step(&mut world, &config, &env)?;
        if k > warmup {
            sum += mean_flow_velocity(&world.crowd, scenario)?;
            samples += 1;
        }
    }
    Ok(sum / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartile_examples() {
        let (_, median, _) = quartiles(&[10.0, 20.0, 30.0]).unwrap();
        assert!((median - 20.0).abs() < 1e-12);
        let (q1, median, q3) = quartiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((median - 2.5).abs() < 1e-12);
        assert!(q1 <= median && median <= q3);
        assert!(quartiles(&[]).is_none());
    }

    #[test]
    fn aggregate_single_trial_is_identity() {
        let key = TrialKey {
            scenario: Scenario::Passive,
            strategy: StrategyKind::Greedy,
            formation: Formation::Line,
            density: 0.0,
            n_robots: 1,
            seed: 0,
        };
        let result = TrialResult {
            timeout: false,
            time_to_goal: Some(15.0),
            interceptions: 3,
            interception_steps: 12,
            per_robot_arrival: vec![Some(20.0)],
            first_entry_time: Some(5.0),
            respawns: 0,
            steps: 200,
        };
        let row = aggregate(&key, &[&result]).unwrap();
        assert_eq!(row.time_median, Some(15.0));
        assert_eq!(row.interceptions_median, Some(3.0));
        assert_eq!(row.timeouts, 0);
    }

    #[test]
    fn aggregate_all_timeouts() {
        let key = TrialKey {
            scenario: Scenario::Passive,
            strategy: StrategyKind::Platoon,
            formation: Formation::Line,
            density: 0.3,
            n_robots: 10,
            seed: 0,
        };
        let timeout_trial = TrialResult {
            timeout: true,
            time_to_goal: None,
            interceptions: 40,
            interception_steps: 100,
            per_robot_arrival: vec![None; 10],
            first_entry_time: Some(8.0),
            respawns: 0,
            steps: 9000,
        };
        let row = aggregate(&key, &[&timeout_trial, &timeout_trial]).unwrap();
        assert_eq!(row.timeouts, 2);
        assert!(row.time_median.is_none());
        assert_eq!(row.interceptions_median, Some(40.0));
    }

    #[test]
    fn aggregate_empty_errors() {
        let key = TrialKey {
            scenario: Scenario::Passive,
            strategy: StrategyKind::Greedy,
            formation: Formation::Line,
            density: 0.0,
            n_robots: 1,
            seed: 0,
        };
        assert!(aggregate(&key, &[]).is_err());
    }

    #[test]
    fn sweep_counts_and_grouping() {
        let spec = SweepSpec {
            densities: vec![0.0],
            n_robots: vec![1],
            seeds: vec![0, 1, 2],
            sim: SimParams { noise_factor: 0.0, ..Default::default() },
            ..Default::default()
        };
        let out = run_sweep(&spec, Some(2)).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].n_trials, 3);
    }

    #[test]
    fn empty_density_crashes_baseline() {
        let err = crowd_baseline(
            Scenario::PerpendicularFlow,
            &[],
            &[0],
            10.0,
            &CrowdModelParams::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::EmptyInput(_)));
    }

    #[test]
    fn baseline_rejects_passive() {
        let err = crowd_baseline(
            Scenario::Passive,
            &[0.1],
            &[0],
            10.0,
            &CrowdModelParams::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::NoFlowDirection));
    }

    #[test]
    fn lone_perpendicular_agent_reaches_desired_speed() {
        // Density chosen so the crowd has exactly one agent; an isolated
        // agent converges to its desired velocity, so the trailing-half flow
        // average lands within 5% of v0.
        let density = 0.0015;
        assert_eq!(n_crowd(density, 50.0, 0.3), 1);
        let params = CrowdModelParams::default();
        let rows = crowd_baseline(
            Scenario::PerpendicularFlow,
            &[density],
            &[0, 1],
            60.0,
            &params,
            None,
        )
        .unwrap();
        let flow = rows[0].flow_median.unwrap();
        assert!(
            (flow - params.desired_speed).abs() / params.desired_speed < 0.05,
            "flow {flow}"
        );
    }

    #[test]
    fn greedy_no_slower_than_platoon_in_empty_world() {
        // The pause rule can only delay the group; validated by running both.
        let base = SweepSpec {
            densities: vec![0.0],
            n_robots: vec![10],
            seeds: vec![0, 1, 2],
            sim: SimParams { noise_factor: 0.0, ..Default::default() },
            ..Default::default()
        };
        let greedy = run_sweep(&base, None).unwrap();
        let platoon = run_sweep(
            &SweepSpec { strategies: vec![StrategyKind::Platoon], ..base },
            None,
        )
        .unwrap();
        let tg = greedy.rows[0].time_median.unwrap();
        let tp = platoon.rows[0].time_median.unwrap();
        assert!(tg <= tp, "greedy {tg} platoon {tp}");
    }
}
