//! Report generation behind the command-line tool.

pub mod analyze;
pub mod config;
pub mod csv;
pub mod oracle_check;
pub mod sweep;

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::Error;

pub const SCHEMA: &str = "greens-lab/1";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Compute(String),
    #[error("theorem check failed: {0}")]
    Theorem(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Compute(_) => 1,
            CliError::Theorem(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::WitnessConstructionFailed { .. } => CliError::Theorem(e.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Inadmissible = 2,
    TheoremViolation = 3,
}

/// Wall-clock stage timings, recorded only on request so that default
/// reports stay byte-reproducible.
#[derive(Debug)]
pub(crate) struct Stopwatch {
    enabled: bool,
    start: Instant,
    stages: BTreeMap<String, f64>,
}

impl Stopwatch {
    pub(crate) fn new(enabled: bool) -> Self {
        Stopwatch {
            enabled,
            start: Instant::now(),
            stages: BTreeMap::new(),
        }
    }

    pub(crate) fn lap(&mut self, stage: &str) {
        if self.enabled {
            let now = Instant::now();
            self.stages
                .insert(stage.to_string(), now.duration_since(self.start).as_secs_f64());
            self.start = now;
        }
    }

    pub(crate) fn finish(self) -> Option<BTreeMap<String, f64>> {
        self.enabled.then_some(self.stages)
    }
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Compute(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
