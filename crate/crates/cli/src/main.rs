//! Experiment runner CLI.
//!
//! Scenarios are pure functions of the effective configuration, which is
//! assembled as: built-in defaults, then `--config <file>`, then individual
//! flag overrides. `--dump-config` prints the effective configuration in the
//! accepted file format and exits.
//!
//! Exit codes: 0 when every executed scenario passes its criterion, 1 when a
//! scenario fails, 2 on usage or configuration errors.

use bigkeylab_core::harness::{
    render_summary, run_scenario, ExperimentConfig, ResultRecord, RunReport, SubjectSpec,
    SCENARIOS,
};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "bigkeylab",
    version,
    about = "Robust-classification experiments under adaptively chosen weighted-Hamming metrics"
)]
struct Cli {
    /// Configuration file (key = value with [sections]; see --dump-config)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; every run is a pure function of the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for records.jsonl and summary.txt
    /// (default: $BIGKEYLAB_OUT or ./results)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Fooling-measurement trials per attack run
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Independent seeded runs in the adaptive-attack scenario
    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Feature count n
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Secret-key size in bits
    #[arg(long, global = true)]
    ell_bits: Option<usize>,

    /// Protected-set size of the metric class
    #[arg(long, global = true)]
    t_class: Option<usize>,

    /// Estimator accuracy target
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// Estimator confidence parameter
    #[arg(long, global = true)]
    lambda_est: Option<u32>,

    /// Samples for the clean-advantage gate
    #[arg(long, global = true)]
    gate_trials: Option<usize>,

    /// Minimum clean advantage for fooling to be asserted
    #[arg(long, global = true)]
    epsilon_threshold: Option<f64>,

    /// Random admissible perturbations in the robustness scenarios
    #[arg(long, global = true)]
    perturb_trials: Option<usize>,

    /// Trials per cell in the incompressibility scenario
    #[arg(long, global = true)]
    incompr_trials: Option<usize>,

    /// Reconstruction seeds in the share-learning scenario
    #[arg(long, global = true)]
    pac_seeds: Option<usize>,

    /// Adaptive-attack subject: partial-keys:0,1,2 | all-keys | known-metric:<i>
    #[arg(long, global = true)]
    subject: Option<String>,

    /// Print the effective configuration and exit
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Small model, protected set known at training time
    KnownMetric,
    /// Full-key majority model against random class metrics
    Majority,
    /// Adaptive metric-choosing attack against the configured subject
    AdaptiveAttack,
    /// State reconstruction from share-augmented samples
    PacLearn,
    /// Partial-key decryption advantage grid
    Incompressibility,
    /// Every scenario, in order
    All,
}

impl Command {
    fn scenarios(self) -> Vec<&'static str> {
        match self {
            Command::KnownMetric => vec!["known-metric"],
            Command::Majority => vec!["majority"],
            Command::AdaptiveAttack => vec!["adaptive-attack"],
            Command::PacLearn => vec!["pac-learn"],
            Command::Incompressibility => vec!["incompressibility"],
            Command::All => SCENARIOS.to_vec(),
        }
    }
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(runs) = cli.runs {
        cfg.attack_runs = runs;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(ell) = cli.ell_bits {
        cfg.ell_bits = ell;
    }
    if let Some(t) = cli.t_class {
        cfg.t_class = t;
    }
    if let Some(delta) = cli.delta {
        cfg.delta = delta;
    }
    if let Some(le) = cli.lambda_est {
        cfg.lambda_est = le;
    }
    if let Some(g) = cli.gate_trials {
        cfg.gate_trials = g;
    }
    if let Some(e) = cli.epsilon_threshold {
        cfg.epsilon_threshold = e;
    }
    if let Some(p) = cli.perturb_trials {
        cfg.perturb_trials = p;
    }
    if let Some(i) = cli.incompr_trials {
        cfg.incompr_trials = i;
    }
    if let Some(p) = cli.pac_seeds {
        cfg.pac_seeds = p;
    }
    if let Some(subject) = &cli.subject {
        cfg.subject = SubjectSpec::parse(subject)?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("BIGKEYLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let cfg = match effective_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("bigkeylab: {msg}");
            return ExitCode::from(2);
        }
    };

    if cli.dump_config {
        print!("{}", cfg.dump());
        return ExitCode::SUCCESS;
    }

    let Some(command) = cli.command else {
        eprintln!("bigkeylab: no scenario given; see --help");
        return ExitCode::from(2);
    };

    let mut reports: Vec<RunReport> = Vec::new();
    for name in command.scenarios() {
        eprintln!("running {name} ...");
        match run_scenario(name, &cfg) {
            Ok(report) => {
                eprintln!(
                    "  {} in {:.2}s",
                    if report.record.pass { "pass" } else { "FAIL" },
                    report.wall.as_secs_f64()
                );
                reports.push(report);
            }
            Err(e) => {
                eprintln!("bigkeylab: {name}: {e}");
                return ExitCode::from(2);
            }
        }
    }

    let dir = out_dir(&cli);
    if let Err(e) = bigkeylab_core::harness::write_results(&dir, &reports) {
        eprintln!("bigkeylab: cannot write results to {}: {e}", dir.display());
        return ExitCode::from(2);
    }

    let records: Vec<ResultRecord> = reports.iter().map(|r| r.record.clone()).collect();
    print!("{}", render_summary(&records));
    println!("records: {}", dir.join("records.jsonl").display());

    if records.iter().all(|r| r.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
