//! Report artifacts: typed rows, JSON persistence, CSV/JSON summaries.
//!
//! Reports are machine artifacts, so they are JSON, carry a schema version,
//! render every exact value losslessly as a "p/q" string, and contain no
//! timestamps: the same (config, seed, code version) must produce the same
//! bytes.

use super::{atomic_write, HarnessError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Bumped whenever a field changes meaning; summaries refuse to mix
/// versions.
pub const SCHEMA_VERSION: u32 = 1;

/// One measured-versus-bound record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Registered claim id this row gives evidence for.
    pub claim: String,
    /// Output length of the cell; 0 for grid-independent rows.
    pub n: u32,
    /// Everything else that pins the cell down, stringly but losslessly.
    pub params: BTreeMap<String, String>,
    /// The measured value, exact "p/q" where the quantity is rational.
    pub measured: String,
    /// The bound it was checked against.
    pub bound: String,
    pub pass: bool,
    /// Flags like "degenerate" or "known-counterexample"; empty when
    /// unremarkable.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// One experiment run: provenance plus rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    /// Digest of the exact config that produced this report.
    pub config_digest: String,
    pub code_version: String,
    /// Fingerprint of the oracle table used, or "none".
    pub oracle_fingerprint: String,
    pub rows: Vec<ReportRow>,
    pub all_pass: bool,
}

/// Canonical byte form: pretty JSON plus a trailing newline, so golden
/// comparisons and diffs stay readable.
pub fn report_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization never fails");
    s.push('\n');
    s
}

pub fn report_from_json(text: &str) -> Result<ExperimentReport, HarnessError> {
    serde_json::from_str(text)
        .map_err(|e| HarnessError::ConfigInvalid(format!("report parse: {e}")))
}

/// Writes `report-<stem>.json` atomically under `dir`, creating it if
/// needed, and returns the path.
pub fn write_report(
    report: &ExperimentReport,
    dir: &Path,
    stem: &str,
) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("report-{stem}.json"));
    atomic_write(&path, report_json(report).as_bytes())?;
    Ok(path)
}

/// A cross-experiment summary in both shapes: CSV for eyeballs, JSON (with
/// the full reports, exact fractions intact) for machines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub csv: String,
    pub json: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryDoc {
    schema_version: u32,
    reports: Vec<ExperimentReport>,
}

/// Aggregates reports: one CSV row per (experiment, n) with pass/fail
/// counts, ordered by (experiment, n); the JSON side carries the reports
/// verbatim in the same experiment order. All inputs must share a schema
/// version.
pub fn emit_summary(reports: &[ExperimentReport]) -> Result<Summary, HarnessError> {
    for w in reports.windows(2) {
        if w[0].schema_version != w[1].schema_version {
            return Err(HarnessError::SchemaMismatch {
                left: w[0].schema_version,
                right: w[1].schema_version,
            });
        }
    }
    let mut ordered: Vec<&ExperimentReport> = reports.iter().collect();
    ordered.sort_by(|a, b| a.experiment.cmp(&b.experiment).then(a.seed.cmp(&b.seed)));

    // (experiment, n) -> (rows, passes, failures), BTreeMap for the stable
    // output order.
    let mut cells: BTreeMap<(String, u32), (u64, u64, u64)> = BTreeMap::new();
    for report in &ordered {
        for row in &report.rows {
            let cell = cells.entry((report.experiment.clone(), row.n)).or_insert((0, 0, 0));
            cell.0 += 1;
            if row.pass {
                cell.1 += 1;
            } else {
                cell.2 += 1;
            }
        }
    }
    let mut csv = String::from("experiment,n,rows,passes,failures\n");
    for ((experiment, n), (rows, passes, failures)) in &cells {
        csv.push_str(&format!("{experiment},{n},{rows},{passes},{failures}\n"));
    }

    let doc = SummaryDoc {
        schema_version: reports.first().map_or(SCHEMA_VERSION, |r| r.schema_version),
        reports: ordered.into_iter().cloned().collect(),
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("summary serialization never fails");
    json.push('\n');
    Ok(Summary { csv, json })
}

/// Re-parses a summary's JSON side back into its reports.
pub fn summary_reports_from_json(text: &str) -> Result<Vec<ExperimentReport>, HarnessError> {
    let doc: SummaryDoc = serde_json::from_str(text)
        .map_err(|e| HarnessError::ConfigInvalid(format!("summary parse: {e}")))?;
    for r in &doc.reports {
        if r.schema_version != doc.schema_version {
            return Err(HarnessError::SchemaMismatch {
                left: doc.schema_version,
                right: r.schema_version,
            });
        }
    }
    Ok(doc.reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report(experiment: &str, n: u32, pass: bool) -> ExperimentReport {
        let mut params = BTreeMap::new();
        params.insert("dist".into(), "ramp".into());
        ExperimentReport {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            seed: 7,
            config_digest: "deadbeefdeadbeef".into(),
            code_version: "0.1.0".into(),
            oracle_fingerprint: "none".into(),
            rows: vec![ReportRow {
                claim: "estimate.chain_rule".into(),
                n,
                params,
                measured: "0/1".into(),
                bound: "0/1".into(),
                pass,
                note: String::new(),
            }],
            all_pass: pass,
        }
    }

    #[test]
    fn report_json_round_trips_exactly() {
        let report = sample_report("E1", 8, true);
        let text = report_json(&report);
        assert!(text.ends_with('\n'));
        assert_eq!(report_from_json(&text).unwrap(), report);
    }

    #[test]
    fn empty_summary_is_just_the_header() {
        let s = emit_summary(&[]).unwrap();
        assert_eq!(s.csv, "experiment,n,rows,passes,failures\n");
        assert_eq!(summary_reports_from_json(&s.json).unwrap(), vec![]);
    }

    #[test]
    fn summary_orders_cells_and_round_trips() {
        let reports = vec![
            sample_report("E3", 10, true),
            sample_report("E1", 8, false),
            sample_report("E3", 8, true),
        ];
        let s = emit_summary(&reports).unwrap();
        assert_eq!(
            s.csv,
            "experiment,n,rows,passes,failures\n\
             E1,8,1,0,1\n\
             E3,8,1,1,0\n\
             E3,10,1,1,0\n"
        );
        let parsed = summary_reports_from_json(&s.json).unwrap();
        let mut expected = reports;
        expected.sort_by(|a, b| a.experiment.cmp(&b.experiment));
        assert_eq!(parsed, expected);
    }

    #[test]
    fn mixed_schema_versions_are_refused() {
        let mut old = sample_report("E1", 8, true);
        old.schema_version = 0;
        let err = emit_summary(&[sample_report("E1", 8, true), old]).unwrap_err();
        assert!(matches!(err, HarnessError::SchemaMismatch { left: 1, right: 0 }));
    }

    #[test]
    fn write_report_names_by_stem() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample_report("E1", 8, true);
        let path = write_report(&report, dir.path(), "e1-small").unwrap();
        assert!(path.ends_with("report-e1-small.json"));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(report_from_json(&text).unwrap(), report);
    }
}
