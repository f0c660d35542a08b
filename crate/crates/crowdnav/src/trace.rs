//! Per-step trajectory traces: a header line describing the trial followed by
//! one row per simulated step (including the initial state).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::control::RobotId;
use crate::engine::{TrialConfig, WorldState};
use crate::error::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub config: TrialConfig,
    pub dt: f64,
    pub robot_ids: Vec<RobotId>,
    pub robot_radius: f64,
    pub comfort_radius: f64,
}

/// One simulated step: robot entries are (x, y, paused, leader id or 0);
/// crowd entries are (x, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: u64,
    pub robots: Vec<(f64, f64, u8, u32)>,
    pub crowd: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn row_for_step(&self, k: u64) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    pub fn row_for_time(&self, t: f64) -> Option<&TraceRow> {
        if t < 0.0 {
            return None;
        }
        self.row_for_step((t / self.header.dt).round() as u64)
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for row in &self.rows {
            serde_json::to_writer(&mut w, row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Trace, SimError> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| SimError::EmptyInput("trace file is empty".into()))?
            .map_err(|e| SimError::InvalidConfig(format!("trace read: {e}")))?;
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|e| SimError::InvalidConfig(format!("trace header: {e}")))?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line.map_err(|e| SimError::InvalidConfig(format!("trace read: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: TraceRow = serde_json::from_str(&line)
                .map_err(|e| SimError::InvalidConfig(format!("trace row: {e}")))?;
            rows.push(row);
        }
        Ok(Trace { header, rows })
    }
}

/// Observer that accumulates a [`Trace`] while a trial runs.
pub struct TraceRecorder {
    trace: Trace,
}

impl TraceRecorder {
    pub fn new(config: &TrialConfig) -> TraceRecorder {
        TraceRecorder {
            trace: Trace {
                header: TraceHeader {
                    config: config.clone(),
                    dt: config.sim.dt,
                    robot_ids: (1..=config.n_robots as RobotId).collect(),
                    robot_radius: config.robot.radius(),
                    comfort_radius: config.comfort_diameter / 2.0,
                },
                rows: Vec::new(),
            },
        }
    }

    pub fn record(&mut self, world: &WorldState) {
        self.trace.rows.push(TraceRow {
            k: world.k,
            robots: world
                .robot_positions
                .iter()
                .zip(&world.strategies)
                .map(|(p, s)| (p.x, p.y, s.paused as u8, s.leader.unwrap_or(0)))
                .collect(),
            crowd: world.crowd.iter().map(|a| (a.pos.x, a.pos.y)).collect(),
        });
    }

    pub fn finish(self) -> Trace {
        self.trace
    }
}
