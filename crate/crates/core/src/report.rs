//! JSON report written by the `estimate` and `roundtrip` commands.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::{DropDiagnostics, EstimationConfig, SampleCounts, ScenarioEstimate};
use crate::model::{GlobalKfParams, ScenarioParams};
use crate::roundtrip::{Check, RoundtripReport, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripSection {
    pub target: ScenarioParams,
    pub drawn_kf: Option<GlobalKfParams>,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    /// The only field that differs between identical runs.
    pub generated_at_unix_s: u64,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: EstimationConfig,
    pub estimate: ScenarioParams,
    pub counts: SampleCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roundtrip: Option<RoundtripSection>,
    pub drops: Vec<DropDiagnostics>,
}

fn now_unix_s() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

impl ReportFile {
    pub fn from_estimate(command: &str, config: EstimationConfig, est: ScenarioEstimate) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at_unix_s: now_unix_s(),
            command: command.to_string(),
            preset: None,
            seed: None,
            config,
            estimate: est.params,
            counts: est.counts,
            roundtrip: None,
            drops: est.drops,
        }
    }

    pub fn from_roundtrip(
        config: EstimationConfig,
        report: RoundtripReport,
        tolerances: Tolerances,
        seed: u64,
    ) -> Self {
        let section = RoundtripSection {
            target: report.target.clone(),
            drawn_kf: report.drawn_kf,
            tolerances,
            checks: report.checks,
            passed: report.passed,
        };
        let mut file = Self::from_estimate("roundtrip", config, report.estimate);
        file.preset = Some(report.target.key());
        file.seed = Some(seed);
        file.roundtrip = Some(section);
        file
    }
}

pub fn write_report(path: &Path, report: &ReportFile) -> Result<()> {
    crate::io::write_json(path, report)
}
