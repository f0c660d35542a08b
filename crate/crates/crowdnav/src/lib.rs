//! Deterministic headless simulator for groups of robots navigating dense
//! agent crowds.
//!
//! Robots are holonomic disks driven by an artificial potential field
//! controller under one of three decentralized strategies (greedy, platoon,
//! adaptive platoon); the crowd follows a social force model and can be
//! passive, flow against the robots, or cross their path. The
//! [`experiments`] module runs seeded sweeps over strategies and crowd
//! densities and aggregates time-to-goal and comfort-zone interception
//! statistics; [`svg`] renders snapshots and the sweep plots.
//!
//! Every trial is fully determined by its [`engine::TrialConfig`], including
//! the RNG seed: rerunning a configuration reproduces traces and results bit
//! for bit.

pub mod config;
pub mod control;
pub mod crowd;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod report;
pub mod svg;
pub mod trace;

pub use control::{RobotParams, StrategyKind};
pub use crowd::{CrowdAgent, CrowdModelParams, Scenario};
pub use engine::{
    run_trial, run_trial_observed, Formation, SimParams, TrialConfig, TrialResult,
};
pub use error::SimError;
pub use experiments::{crowd_baseline, run_sweep, SweepSpec};
pub use geometry::{EnvironmentSpec, SimRng, Vec2};
