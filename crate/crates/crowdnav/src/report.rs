//! Persistent outputs: trial records as JSON lines, aggregates and baselines
//! as CSV, and the run manifest. Floats are written with Rust's shortest
//! round-trip formatting, so reruns are byte-identical.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::control::StrategyKind;
use crate::crowd::Scenario;
use crate::engine::{Formation, TrialResult};
use crate::error::SimError;
use crate::experiments::{AggregateRow, BaselineRow, TrialRecord};

#[derive(Serialize)]
struct TrialLine<'a> {
    scenario: &'a str,
    strategy: &'a str,
    formation: &'a str,
    density: f64,
    n_robots: usize,
    seed: u64,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a TrialResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// One JSON object per trial, in sweep enumeration order.
pub fn trials_jsonl(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for record in records {
        let line = TrialLine {
            scenario: record.key.scenario.label(),
            strategy: record.key.strategy.label(),
            formation: record.key.formation.label(),
            density: record.key.density,
            n_robots: record.key.n_robots,
            seed: record.key.seed,
            ok: record.result.is_ok(),
            result: record.result.as_ref().ok(),
            error: record.result.as_ref().err().map(String::as_str),
        };
        out.push_str(&serde_json::to_string(&line).expect("trial record serializes"));
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const AGGREGATE_CSV_HEADER: &str = "scenario,strategy,formation,density,n_robots,n_trials,\
failures,timeouts,time_q1,time_median,time_q3,interceptions_q1,interceptions_median,\
interceptions_q3";

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scenario.label(),
            r.strategy.label(),
            r.formation.label(),
            r.density,
            r.n_robots,
            r.n_trials,
            r.failures,
            r.timeouts,
            opt(r.time_q1),
            opt(r.time_median),
            opt(r.time_q3),
            opt(r.interceptions_q1),
            opt(r.interceptions_median),
            opt(r.interceptions_q3),
        ));
    }
    out
}

/// Parse an aggregate CSV produced by [`aggregate_csv`] (used by `plot`).
pub fn parse_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>, SimError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::EmptyInput("empty aggregate csv".into()))?;
    if header != AGGREGATE_CSV_HEADER {
        return Err(SimError::InvalidConfig("unrecognized aggregate csv header".into()));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(SimError::InvalidConfig(format!(
                "aggregate csv line {}: expected 14 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| SimError::InvalidConfig(format!("aggregate csv line {}: {what}", idx + 2));
        let parse_f = |s: &str, what: &str| -> Result<f64, SimError> {
            s.parse().map_err(|_| bad(what))
        };
        let parse_u = |s: &str, what: &str| -> Result<usize, SimError> {
            s.parse().map_err(|_| bad(what))
        };
        let parse_opt = |s: &str, what: &str| -> Result<Option<f64>, SimError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(what))
            }
        };
        rows.push(AggregateRow {
            scenario: parse_scenario(fields[0]).ok_or_else(|| bad("scenario"))?,
            strategy: parse_strategy(fields[1]).ok_or_else(|| bad("strategy"))?,
            formation: parse_formation(fields[2]).ok_or_else(|| bad("formation"))?,
            density: parse_f(fields[3], "density")?,
            n_robots: parse_u(fields[4], "n_robots")?,
            n_trials: parse_u(fields[5], "n_trials")?,
            failures: parse_u(fields[6], "failures")?,
            timeouts: parse_u(fields[7], "timeouts")?,
            time_q1: parse_opt(fields[8], "time_q1")?,
            time_median: parse_opt(fields[9], "time_median")?,
            time_q3: parse_opt(fields[10], "time_q3")?,
            interceptions_q1: parse_opt(fields[11], "interceptions_q1")?,
            interceptions_median: parse_opt(fields[12], "interceptions_median")?,
            interceptions_q3: parse_opt(fields[13], "interceptions_q3")?,
        });
    }
    Ok(rows)
}

pub fn parse_scenario(label: &str) -> Option<Scenario> {
    match label {
        "passive" => Some(Scenario::Passive),
        "counter-flow" => Some(Scenario::CounterFlow),
        "perpendicular-flow" => Some(Scenario::PerpendicularFlow),
        _ => None,
    }
}

pub fn parse_strategy(label: &str) -> Option<StrategyKind> {
    match label {
        "greedy" => Some(StrategyKind::Greedy),
        "platoon" => Some(StrategyKind::Platoon),
        "adaptive-platoon" => Some(StrategyKind::AdaptivePlatoon),
        _ => None,
    }
}

pub fn parse_formation(label: &str) -> Option<Formation> {
    match label {
        "line" => Some(Formation::Line),
        "random" => Some(Formation::Random),
        _ => None,
    }
}

pub const BASELINE_CSV_HEADER: &str =
    "density,n_agents,n_seeds,failures,flow_q1,flow_median,flow_q3";

pub fn baseline_csv(rows: &[BaselineRow]) -> String {
    let mut out = String::from(BASELINE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.density,
            r.n_agents,
            r.n_seeds,
            r.failures,
            opt(r.flow_q1),
            opt(r.flow_median),
            opt(r.flow_q3),
        ));
    }
    out
}

/// Run manifest: records how a sweep was produced. The config text is stored
/// verbatim so the hash can be recomputed from the manifest alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub config_path: String,
    pub config_sha256: String,
    pub output_dir: String,
    pub seeds: Vec<u64>,
    pub config_text: String,
}

impl RunManifest {
    pub fn new(
        config_path: &str,
        config_text: &str,
        output_dir: &str,
        seeds: Vec<u64>,
    ) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            config_path: config_path.to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            output_dir: output_dir.to_string(),
            seeds,
            config_text: config_text.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serializes");
        out.push('\n');
        out
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    let mut out = String::with_capacity(digest.len() * 2);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::TrialKey;

    fn sample_row() -> AggregateRow {
        AggregateRow {
            scenario: Scenario::CounterFlow,
            strategy: StrategyKind::Platoon,
            formation: Formation::Line,
            density: 0.3,
            n_robots: 10,
            n_trials: 30,
            failures: 0,
            timeouts: 3,
            time_q1: Some(100.5),
            time_median: Some(120.0),
            time_q3: Some(140.25),
            interceptions_q1: Some(10.0),
            interceptions_median: Some(12.0),
            interceptions_q3: Some(15.0),
        }
    }

    #[test]
    fn aggregate_csv_roundtrip() {
        let mut missing = sample_row();
        missing.time_q1 = None;
        missing.time_median = None;
        missing.time_q3 = None;
        let rows = vec![sample_row(), missing];
        let text = aggregate_csv(&rows);
        let back = parse_aggregate_csv(&text).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn trial_lines_include_errors() {
        let key = TrialKey {
            scenario: Scenario::Passive,
            strategy: StrategyKind::Greedy,
            formation: Formation::Line,
            density: 0.1,
            n_robots: 10,
            seed: 4,
        };
        let records = vec![TrialRecord {
            key,
            result: Err("placement failed".into()),
        }];
        let text = trials_jsonl(&records);
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains("\"ok\":false"));
        assert!(text.contains("placement failed"));
    }

    #[test]
    fn manifest_hash_matches_stored_text() {
        let manifest = RunManifest::new("spec.toml", "densities = [0.1]\n", "out", vec![0, 1]);
        assert_eq!(manifest.config_sha256, sha256_hex(manifest.config_text.as_bytes()));
        let json = manifest.to_json();
        assert!(json.contains("config_sha256"));
    }
}
