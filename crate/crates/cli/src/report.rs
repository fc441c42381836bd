//! Run reports (JSON) and the flat CSV row shared by every command.

use std::io::Write;

use ddp_fpm::runtime::{ExperimentConfig, ExperimentResult};
use serde::{Deserialize, Serialize};

use crate::settings::Settings;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn build_id() -> &'static str {
    env!("FPMSIM_BUILD_ID")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub build: String,
    pub settings: Settings,
    /// The experiment as actually run, after exhaustive-mode adjustments.
    pub experiment: ExperimentConfig,
    pub population: usize,
    pub result: ExperimentResult,
}

impl RunReport {
    pub fn new(settings: Settings, experiment: ExperimentConfig, population: usize, result: ExperimentResult) -> Self {
        RunReport { schema_version: SCHEMA_VERSION, build: build_id().to_string(), settings, experiment, population, result }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports always serialise");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let report: RunReport = serde_json::from_str(text).map_err(|e| CliError::Config(format!("not a run report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "report schema {} is not supported (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn row(&self) -> CsvRow {
        let analyst = &self.experiment.analyst;
        let r = &self.result;
        CsvRow {
            f: analyst.f,
            epsilon: analyst.noise.epsilon,
            k: analyst.noise.k,
            p: analyst.noise.p,
            tau: analyst.tau,
            strategy: analyst.strategy.to_string(),
            f1: Some(r.f1),
            precision: Some(r.precision),
            recall: Some(r.recall),
            owners: Some(r.owners_used),
            rounds: Some(r.rounds),
            seed: self.experiment.seed,
            status: if r.exhausted { "exhausted".into() } else { "ok".into() },
        }
    }
}

/// One CSV line. Result fields are empty when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub f: f64,
    pub epsilon: f64,
    pub k: usize,
    pub p: usize,
    pub tau: u64,
    pub strategy: String,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub owners: Option<usize>,
    pub rounds: Option<usize>,
    pub seed: u64,
    /// `ok`, `exhausted`, or `error: <message>`.
    pub status: String,
}

pub fn write_rows<W: Write>(out: W, rows: &[CsvRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| CliError::Io(e.to_string()))
}
