//! Serializable result records shared by the library, tests, and the CLI.

use serde::{Deserialize, Serialize};

/// Schema version of the JSON summary emitted by experiments.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// One Monte Carlo sample of an asymptotic linking estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub start: Vec<f64>,
    pub crossings_flow: i64,
    pub crossings_closure: i64,
    pub horizon: f64,
    pub value: f64,
}

/// Summary of one experiment run, emitted as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub estimate: f64,
    pub stderr: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub elapsed_sec: f64,
    #[serde(default)]
    pub details: serde_json::Value,
}
