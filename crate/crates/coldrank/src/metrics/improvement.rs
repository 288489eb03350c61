//! Percent-improvement reporting against a baseline.

use serde::{Deserialize, Serialize};

use super::{MetricVector, MetricsError};
use crate::catalog::Tier;

/// How an [`ImprovementValue`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImprovementMode {
    /// `100 * (model - baseline) / baseline`.
    Percent,
    /// `model - baseline`; used when the baseline is zero.
    AbsoluteDelta,
}

/// One metric's improvement over the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementValue {
    pub value: f64,
    pub mode: ImprovementMode,
}

impl ImprovementValue {
    fn compute(model: f64, baseline: f64) -> Self {
        if baseline > 0.0 {
            ImprovementValue {
                value: 100.0 * (model - baseline) / baseline,
                mode: ImprovementMode::Percent,
            }
        } else {
            ImprovementValue {
                value: model - baseline,
                mode: ImprovementMode::AbsoluteDelta,
            }
        }
    }
}

/// Per-metric improvements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementValues {
    pub acc_at_1: ImprovementValue,
    pub rr: ImprovementValue,
    pub ndcg_at_k: ImprovementValue,
    pub recall_at_k: ImprovementValue,
}

impl ImprovementValues {
    pub fn as_array(&self) -> [ImprovementValue; 4] {
        [self.acc_at_1, self.rr, self.ndcg_at_k, self.recall_at_k]
    }
}

/// Improvement of one model cell over one baseline cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub model_id: String,
    pub baseline_id: String,
    pub tier: Tier,
    pub n_trials: usize,
    pub failure_rate: f64,
    pub values: ImprovementValues,
}

/// Per-metric percent improvement, falling back to the absolute difference
/// when the baseline mean is zero.
pub fn improvement_values(model: &MetricVector, baseline: &MetricVector) -> ImprovementValues {
    ImprovementValues {
        acc_at_1: ImprovementValue::compute(model.acc_at_1, baseline.acc_at_1),
        rr: ImprovementValue::compute(model.rr, baseline.rr),
        ndcg_at_k: ImprovementValue::compute(model.ndcg_at_k, baseline.ndcg_at_k),
        recall_at_k: ImprovementValue::compute(model.recall_at_k, baseline.recall_at_k),
    }
}

/// Build a full report, refusing to compare means that were taken over
/// different case sets.
#[allow(clippy::too_many_arguments)]
pub fn improvement_report(
    model: &MetricVector,
    baseline: &MetricVector,
    model_case_ids: &[String],
    baseline_case_ids: &[String],
    model_id: &str,
    baseline_id: &str,
    tier: Tier,
    n_trials: usize,
    failure_rate: f64,
) -> Result<ImprovementReport, MetricsError> {
    if model_case_ids != baseline_case_ids {
        return Err(MetricsError::CaseSetMismatch(format!(
            "model covers {} cases, baseline covers {}",
            model_case_ids.len(),
            baseline_case_ids.len()
        )));
    }
    Ok(ImprovementReport {
        model_id: model_id.to_string(),
        baseline_id: baseline_id.to_string(),
        tier,
        n_trials,
        failure_rate,
        values: improvement_values(model, baseline),
    })
}
