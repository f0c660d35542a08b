//! TOML parsing for trial configs and sweep specs. Every parameter has the
//! standard default, so an empty document describes the stock setup.

use crate::engine::TrialConfig;
use crate::experiments::SweepSpec;

/// Parse a trial config document. The returned error carries line/column
/// diagnostics from the TOML parser.
pub fn parse_trial_config(text: &str) -> Result<TrialConfig, toml::de::Error> {
    toml::from_str(text)
}

pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, toml::de::Error> {
    toml::from_str(text)
}
