//! Experiment orchestration: configs, reports, summaries, golden checks.
//!
//! Everything here is deterministic given (config, seed): reports carry no
//! timestamps, rational numbers render as "p/q", and maps are ordered, so a
//! report can serve as a byte-exact golden artifact.

mod claims;
mod config;
mod report;
mod run;

pub use claims::{claim_anchor, is_registered_claim, ClaimAnchor, CLAIM_REGISTRY};
pub use config::{ExperimentConfig, OracleSettings, ParamSettings, DEFAULT_N_GRID};
pub use report::{
    emit_summary, report_from_json, report_json, summary_reports_from_json, write_report,
    ExperimentReport, ReportRow, Summary, SCHEMA_VERSION,
};
pub use run::{run_experiment, verify_golden, GoldenCheck};

use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Anything the harness can fail on: bad configs, schema drift between
/// artifacts, or an error bubbling up from one of the library layers.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("report schema mismatch: {left} vs {right}")]
    SchemaMismatch { left: u32, right: u32 },
    #[error(transparent)]
    Utm(#[from] crate::utm::UtmError),
    #[error(transparent)]
    Dist(#[from] crate::dist::DistError),
    #[error(transparent)]
    Extrapolate(#[from] crate::extrapolate::ExtrapolateError),
    #[error(transparent)]
    Gapk(#[from] crate::gapk::GapkError),
    #[error(transparent)]
    Qprg(#[from] crate::qprg::QprgError),
    #[error(transparent)]
    Classical(#[from] crate::classical::ClassicalError),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// The process exit code for a harness failure: 4 when some execution
/// budget ran out (rerun with a larger `MCLAB_BUDGET` or smaller grid),
/// 3 for everything else.
pub fn error_exit_code(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Utm(crate::utm::UtmError::BudgetExceeded { .. })
        | HarnessError::Qprg(crate::qprg::QprgError::BudgetExceeded { .. })
        | HarnessError::Classical(crate::classical::ClassicalError::BudgetExceeded { .. }) => 4,
        _ => 3,
    }
}

/// Writes `bytes` to `path` through a sibling temp file and a rename, so a
/// crash mid-write never leaves a half-written artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}
