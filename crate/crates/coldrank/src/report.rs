//! Report files and table rendering.
//!
//! The machine-readable report is stable JSON (struct field order, no
//! timestamps) so identical runs produce identical bytes. The text table
//! mirrors the familiar layout for ranking comparisons: one row per
//! model x metadata tier, improvement percentages per metric, with the
//! best and second-best value per column bolded.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Tier;
use crate::metrics::{ImprovementMode, ImprovementValues, MetricVector};
use crate::ranker::Strategy;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One (strategy, tier) cell of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model_id: String,
    pub strategy: Strategy,
    pub tier: Tier,
    /// Trials that produced at least one surviving case.
    pub n_trials: usize,
    pub n_cases: usize,
    pub failure_rate: f64,
    /// More than half of the case attempts failed (or none survived).
    pub failed: bool,
    pub metrics_mean: MetricVector,
    pub metrics_std: MetricVector,
    pub baseline_mean: MetricVector,
    pub improvement: ImprovementValues,
}

/// Machine-readable result of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub run_id: String,
    pub baseline_id: String,
    pub metric_k: usize,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no reports to merge")]
    Empty,

    #[error("report schema version {found} does not match supported version {expected}")]
    SchemaMismatch { found: u32, expected: u32 },

    #[error("reports disagree on metric k: {0} vs {1}")]
    MixedK(usize, usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {source}")]
    Parse {
        path: std::path::PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub fn save_report(path: &Path, report: &RunReport) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
    }
    let mut body = serde_json::to_string_pretty(report).expect("report serializes");
    body.push('\n');
    std::fs::write(path, body).map_err(io)
}

pub fn load_report(path: &Path) -> Result<RunReport, ReportError> {
    let body = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let report: RunReport =
        serde_json::from_str(&body).map_err(|source| ReportError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(ReportError::SchemaMismatch {
            found: report.schema_version,
            expected: REPORT_SCHEMA_VERSION,
        });
    }
    Ok(report)
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub tier: Tier,
    /// `None` renders as FAILED across the metric columns.
    pub values: Option<ImprovementValues>,
    pub failure_rate: Option<f64>,
}

impl TableRow {
    pub fn new(model: impl Into<String>, tier: Tier, values: ImprovementValues) -> Self {
        TableRow {
            model: model.into(),
            tier,
            values: Some(values),
            failure_rate: None,
        }
    }
}

/// Rows of a run's own table.
pub fn report_rows(report: &RunReport) -> Vec<TableRow> {
    report
        .cells
        .iter()
        .map(|cell| TableRow {
            model: format!("{} {}", cell.model_id, cell.strategy),
            tier: cell.tier,
            values: if cell.failed { None } else { Some(cell.improvement) },
            failure_rate: Some(cell.failure_rate),
        })
        .collect()
}

/// Merge several reports into one table's rows. All reports must share the
/// schema version (checked at load) and metric k.
pub fn merge_reports(reports: &[RunReport]) -> Result<(Vec<TableRow>, usize), ReportError> {
    let first = reports.first().ok_or(ReportError::Empty)?;
    let mut rows = Vec::new();
    for report in reports {
        if report.metric_k != first.metric_k {
            return Err(ReportError::MixedK(first.metric_k, report.metric_k));
        }
        rows.extend(report_rows(report));
    }
    Ok((rows, first.metric_k))
}

/// Render a run's table: improvement columns vs its baseline plus the
/// failure-rate column.
pub fn render_run_table(report: &RunReport) -> String {
    render_comparison_table(&report_rows(report), report.metric_k)
}

/// Render an aligned text table with the best and second-best value per
/// metric column bolded as `**value**`.
pub fn render_comparison_table(rows: &[TableRow], k: usize) -> String {
    let metric_headers = [
        "ACC@1".to_string(),
        "RR".to_string(),
        format!("NDCG@{k}"),
        format!("RC@{k}"),
    ];
    let show_failures = rows.iter().any(|row| row.failure_rate.is_some());

    // Top-2 distinct values per metric column decide the bolding.
    let mut bold_thresholds: Vec<(f64, Option<f64>)> = Vec::with_capacity(4);
    for column in 0..4 {
        let mut values: Vec<f64> = rows
            .iter()
            .filter_map(|row| row.values.as_ref().map(|v| v.as_array()[column].value))
            .collect();
        values.sort_by(|a, b| b.partial_cmp(a).expect("finite improvement"));
        values.dedup();
        let best = values.first().copied().unwrap_or(f64::NEG_INFINITY);
        let second = values.get(1).copied();
        bold_thresholds.push((best, second));
    }

    let mut header: Vec<String> = vec!["Model".into(), "MD".into()];
    header.extend(metric_headers.iter().cloned());
    if show_failures {
        header.push("Fail%".into());
    }

    let mut body: Vec<Vec<String>> = Vec::with_capacity(rows.len());
    for row in rows {
        let mut cells = vec![row.model.clone(), row.tier.to_string()];
        match &row.values {
            Some(values) => {
                for (column, value) in values.as_array().iter().enumerate() {
                    let (best, second) = bold_thresholds[column];
                    let bold = value.value == best || Some(value.value) == second;
                    let suffix = match value.mode {
                        ImprovementMode::Percent => "",
                        ImprovementMode::AbsoluteDelta => "d",
                    };
                    let text = format!("{:.2}{suffix}", value.value);
                    cells.push(if bold { format!("**{text}**") } else { text });
                }
            }
            None => {
                for _ in 0..4 {
                    cells.push("FAILED".into());
                }
            }
        }
        if show_failures {
            cells.push(match row.failure_rate {
                Some(rate) => format!("{:.1}", rate * 100.0),
                None => "-".into(),
            });
        }
        body.push(cells);
    }

    let columns = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }

    let render_line = |cells: &[String]| -> String {
        let mut parts = Vec::with_capacity(columns);
        for (i, cell) in cells.iter().enumerate() {
            if i < 2 {
                parts.push(format!("{cell:<width$}", width = widths[i]));
            } else {
                parts.push(format!("{cell:>width$}", width = widths[i]));
            }
        }
        parts.join("  ").trim_end().to_string()
    };

    let mut lines = Vec::with_capacity(body.len() + 2);
    lines.push(render_line(&header));
    lines.push("-".repeat(widths.iter().sum::<usize>() + 2 * (columns - 1)));
    for row in &body {
        lines.push(render_line(row));
    }
    lines.join("\n")
}

/// Render a single row the way the comparison table would, given
/// already-known bold flags. Used for row-level fixtures.
pub fn render_row(model: &str, tier: Tier, values: &ImprovementValues, bold: [bool; 4]) -> String {
    let mut parts = vec![model.to_string(), tier.to_string()];
    for (value, bold) in values.as_array().iter().zip(bold) {
        let text = format!("{:.2}", value.value);
        parts.push(if bold { format!("**{text}**") } else { text });
    }
    parts.join("  ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::improvement_values;

    fn metrics(values: [f64; 4], k: usize) -> MetricVector {
        MetricVector {
            acc_at_1: values[0],
            rr: values[1],
            ndcg_at_k: values[2],
            recall_at_k: values[3],
            k,
        }
    }

    fn values_of(raw: [f64; 4]) -> ImprovementValues {
        // Baseline 1.0 everywhere turns "model = 1 + x/100" into exactly x%.
        let model = metrics(
            [
                1.0 + raw[0] / 100.0,
                1.0 + raw[1] / 100.0,
                1.0 + raw[2] / 100.0,
                1.0 + raw[3] / 100.0,
            ],
            3,
        );
        improvement_values(&model, &metrics([1.0; 4], 3))
    }

    #[test]
    fn best_and_second_best_are_bolded_per_column() {
        let rows = vec![
            TableRow::new("A", Tier::V1, values_of([10.0, 5.0, 1.0, 7.0])),
            TableRow::new("B", Tier::V2, values_of([20.0, -2.0, 2.0, 8.0])),
            TableRow::new("C", Tier::V3, values_of([30.0, 1.0, 3.0, 9.0])),
        ];
        let table = render_comparison_table(&rows, 3);
        // ACC@1: 30 and 20 bold, 10 plain.
        assert!(table.contains("**30.00**"));
        assert!(table.contains("**20.00**"));
        assert!(!table.contains("**10.00**"));
        // RR: 5 and 1 bold, -2 plain.
        assert!(table.contains("**5.00**"));
        assert!(table.contains("**1.00**"));
        assert!(!table.contains("**-2.00**"));
        assert!(table.contains("NDCG@3"));
        assert!(table.contains("RC@3"));
    }

    #[test]
    fn failed_rows_render_failed_markers() {
        let rows = vec![
            TableRow::new("A", Tier::V1, values_of([10.0, 5.0, 1.0, 7.0])),
            TableRow {
                model: "B".into(),
                tier: Tier::V4,
                values: None,
                failure_rate: Some(0.75),
            },
        ];
        let table = render_comparison_table(&rows, 3);
        assert!(table.contains("FAILED"));
        assert!(table.contains("75.0"));
        assert!(table.contains("Fail%"));
    }

    #[test]
    fn save_load_round_trip_checks_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let report = RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            run_id: "abc123".into(),
            baseline_id: "random".into(),
            metric_k: 3,
            cells: vec![],
        };
        save_report(&path, &report).unwrap();
        assert_eq!(load_report(&path).unwrap(), report);

        let mut bad = report;
        bad.schema_version = 999;
        save_report(&path, &bad).unwrap();
        assert!(matches!(
            load_report(&path),
            Err(ReportError::SchemaMismatch { found: 999, .. })
        ));
    }

    #[test]
    fn merge_rejects_empty_input() {
        assert!(matches!(merge_reports(&[]), Err(ReportError::Empty)));
    }

    #[test]
    fn row_fixture_renders_bolded_values_in_order() {
        let row = render_row("Llama-405B", Tier::V4, &values_of([28.33, 22.46, 12.90, 31.42]), [true; 4]);
        assert_eq!(row, "Llama-405B  V4  **28.33**  **22.46**  **12.90**  **31.42**");
    }
}
