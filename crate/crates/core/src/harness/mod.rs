//! Seeded, reproducible experiment runner.
//!
//! Wires state generation, learners, classifiers and the attack into the
//! headline scenarios and emits machine-readable results: `records.jsonl`
//! (one JSON record per scenario) plus a human `summary.txt`. Identical
//! configurations produce byte-identical files.

mod config;
mod experiments;
mod record;

pub use config::{ConfigError, ExperimentConfig, SubjectSpec};
pub use experiments::{
    run_adaptive_attack, run_incompressibility, run_known_metric, run_majority, run_pac_learning,
    DETECTION_EXACT_FRACTION, INCOMPRESSIBILITY_TOLERANCE, RHO_GRID,
};
pub use record::{
    render_summary, AdaptiveOutcome, AttackRunRecord, IncompressibilityCell,
    IncompressibilityOutcome, KnownMetricOutcome, MajorityOutcome, PacOutcome, ResultRecord,
    RunReport, ScenarioOutcome, RECORD_SCHEMA_VERSION,
};

use std::io::Write;
use std::path::Path;

/// Scenario names in the order `run_all` executes them.
pub const SCENARIOS: [&str; 5] = [
    "known-metric",
    "majority",
    "adaptive-attack",
    "pac-learn",
    "incompressibility",
];

/// Run one scenario by name.
pub fn run_scenario(name: &str, cfg: &ExperimentConfig) -> Result<RunReport, ConfigError> {
    match name {
        "known-metric" => run_known_metric(cfg),
        "majority" => run_majority(cfg),
        "adaptive-attack" => run_adaptive_attack(cfg),
        "pac-learn" => run_pac_learning(cfg),
        "incompressibility" => run_incompressibility(cfg),
        other => Err(ConfigError::Invalid(format!("unknown scenario {other:?}"))),
    }
}

/// Run every scenario in order.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<RunReport>, ConfigError> {
    SCENARIOS
        .iter()
        .map(|name| run_scenario(name, cfg))
        .collect()
}

/// Write `records.jsonl` and `summary.txt` under `out_dir`, creating it if
/// needed. Files are truncated first; a record line is flushed as each
/// scenario lands.
pub fn write_results(out_dir: &Path, reports: &[RunReport]) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut records = std::fs::File::create(out_dir.join("records.jsonl"))?;
    for report in reports {
        writeln!(records, "{}", report.record.to_json_line())?;
        records.flush()?;
    }
    let summary: Vec<ResultRecord> = reports.iter().map(|r| r.record.clone()).collect();
    std::fs::write(out_dir.join("summary.txt"), render_summary(&summary))?;
    Ok(())
}
