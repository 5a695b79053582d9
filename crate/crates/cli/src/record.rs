use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Self-describing result of one command: the full configuration is echoed
/// next to its hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub results: serde_json::Value,
    pub warnings: Vec<String>,
    /// Files written next to the record, relative to the output directory.
    pub files: Vec<String>,
}

pub fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}
