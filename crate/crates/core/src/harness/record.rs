//! Machine-readable scenario records.
//!
//! One JSON object per scenario run, written as a line to `records.jsonl`.
//! Records are a pure function of the configuration: timing lives on the
//! in-memory report and is printed to stdout only, never serialized, so two
//! runs with the same config produce byte-identical files.

use super::config::ExperimentConfig;
use crate::bigkey::{FillPolicy, RetainPolicy};
use serde::{Deserialize, Serialize};
use std::time::Duration;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub scenario: String,
    pub config: ExperimentConfig,
    pub pass: bool,
    #[serde(flatten)]
    pub outcome: ScenarioOutcome,
}

/// Scenario run plus wall-clock; the duration is deliberately not part of
/// the serialized record.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub record: ResultRecord,
    pub wall: Duration,
}

impl ResultRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioOutcome {
    KnownMetric(KnownMetricOutcome),
    Majority(MajorityOutcome),
    AdaptiveAttack(AdaptiveOutcome),
    PacLearn(PacOutcome),
    Incompressibility(IncompressibilityOutcome),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownMetricOutcome {
    pub protected_set: Vec<usize>,
    /// `{n, sorted T}` descriptor of the training-time metric.
    pub metric: String,
    pub model_bits_declared: usize,
    pub model_bits_recomputed: usize,
    pub expected_model_bits: usize,
    pub clean_trials: usize,
    pub clean_correct: usize,
    pub exhaustive_flips: usize,
    pub exhaustive_misclassified: usize,
    pub random_trials: usize,
    pub random_misclassified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityOutcome {
    pub model_bits_declared: usize,
    pub model_bits_recomputed: usize,
    pub expected_model_bits: usize,
    pub trials: usize,
    pub misclassified: usize,
    /// The adaptive attack pointed at this full-key subject; the expected
    /// outcome is an abort.
    pub attack_aborted: bool,
    pub attack_abort_reason: Option<String>,
    pub attack_detected_sensitive: Vec<usize>,
    pub attack_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveOutcome {
    pub subject: String,
    pub subject_stored: Vec<usize>,
    pub subject_bits_declared: usize,
    pub subject_bits_recomputed: usize,
    /// n/2 * ell.
    pub size_bound_bits: usize,
    pub within_size_bound: bool,
    pub runs: Vec<AttackRunRecord>,
    pub detection_exact_runs: usize,
    pub aborted_runs: usize,
    /// Largest fooling gap over non-aborted runs, if any.
    pub max_fooling_gap: Option<f64>,
    pub admissibility_all_confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRunRecord {
    pub run_index: usize,
    pub target_class: u8,
    pub gate_advantage: f64,
    pub above_threshold: bool,
    pub outcome: String,
    pub abort_reason: Option<String>,
    pub detected_sensitive: Vec<usize>,
    /// Per-feature |mu' - mu| from the walk, in walk order.
    pub sensitivity_gaps: Vec<f64>,
    pub detection_exact: bool,
    pub detection_precision: f64,
    pub detection_recall: f64,
    pub chosen_protected: Vec<usize>,
    /// `{n, sorted T}` descriptor of the after-the-fact metric, on success.
    pub chosen_metric: Option<String>,
    pub pr_clean_b: Option<f64>,
    pub pr_adversarial_b: Option<f64>,
    pub fooling_gap: Option<f64>,
    pub admissible_ok: usize,
    pub admissible_total: usize,
    pub oracle_queries: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacOutcome {
    pub seeds: usize,
    pub reconstruct_exact: usize,
    pub share_count: usize,
    pub overhead_bits: usize,
    pub distinct_z_failures: usize,
    pub clean_trials: usize,
    pub clean_correct: usize,
    pub clean_advantage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompressibilityOutcome {
    pub trials_per_cell: usize,
    pub cells: Vec<IncompressibilityCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompressibilityCell {
    pub rho: f64,
    pub retain: RetainPolicy,
    pub fill: FillPolicy,
    pub successes: usize,
    pub rate: f64,
    pub ok: bool,
}

impl ResultRecord {
    /// One deterministic summary line per scenario.
    pub fn summary_line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let details = match &self.outcome {
            ScenarioOutcome::KnownMetric(o) => format!(
                "model_bits={} clean={}/{} flip_errors={}/{} perturb_errors={}/{}",
                o.model_bits_recomputed,
                o.clean_correct,
                o.clean_trials,
                o.exhaustive_misclassified,
                o.exhaustive_flips,
                o.random_misclassified,
                o.random_trials,
            ),
            ScenarioOutcome::Majority(o) => format!(
                "model_bits={} perturb_errors={}/{} attack_aborted={}",
                o.model_bits_recomputed, o.misclassified, o.trials, o.attack_aborted,
            ),
            ScenarioOutcome::AdaptiveAttack(o) => format!(
                "subject={} bits={} detection_exact={}/{} aborted={}/{} max_gap={} admissible_all={}",
                o.subject,
                o.subject_bits_recomputed,
                o.detection_exact_runs,
                o.runs.len(),
                o.aborted_runs,
                o.runs.len(),
                o.max_fooling_gap
                    .map(|g| format!("{g:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                o.admissibility_all_confirmed,
            ),
            ScenarioOutcome::PacLearn(o) => format!(
                "reconstructed={}/{} shares_t={} overhead_bits={} advantage={:.3}",
                o.reconstruct_exact, o.seeds, o.share_count, o.overhead_bits, o.clean_advantage,
            ),
            ScenarioOutcome::Incompressibility(o) => {
                // bias is only meaningful below full key knowledge
                let worst = o
                    .cells
                    .iter()
                    .filter(|c| c.rho < 1.0)
                    .map(|c| (c.rate - 0.5).abs())
                    .fold(0.0f64, f64::max);
                format!(
                    "cells={} trials_per_cell={} worst_partial_bias={:.4}",
                    o.cells.len(),
                    o.trials_per_cell,
                    worst,
                )
            }
        };
        format!("{:<22} {:<4} {}", self.scenario, status, details)
    }
}

/// Render the human-readable summary table for a set of records.
pub fn render_summary(records: &[ResultRecord]) -> String {
    let mut out = String::new();
    out.push_str("scenario               pass details\n");
    out.push_str("--------               ---- -------\n");
    for r in records {
        out.push_str(&r.summary_line());
        out.push('\n');
    }
    let all = records.iter().all(|r| r.pass);
    out.push_str(&format!(
        "overall: {} ({}/{} scenarios pass)\n",
        if all { "PASS" } else { "FAIL" },
        records.iter().filter(|r| r.pass).count(),
        records.len()
    ));
    out
}
