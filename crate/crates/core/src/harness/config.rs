//! Experiment configuration: a diffable key-value file with sections.
//!
//! Every run is a pure function of this struct. `dump` prints the effective
//! configuration in exactly the format `parse` accepts, so a dumped config
//! reproduces its run bit for bit.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// The classifier the adaptive attack is aimed at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubjectSpec {
    /// Majority vote over the keys of the listed features.
    PartialKeys(BTreeSet<usize>),
    /// Majority vote over all n keys.
    AllKeys,
    /// Single committed feature, as trained for a known metric.
    KnownMetric(usize),
}

impl fmt::Display for SubjectSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubjectSpec::PartialKeys(s) => {
                let idx: Vec<String> = s.iter().map(|i| i.to_string()).collect();
                write!(f, "partial-keys:{}", idx.join(","))
            }
            SubjectSpec::AllKeys => write!(f, "all-keys"),
            SubjectSpec::KnownMetric(i) => write!(f, "known-metric:{i}"),
        }
    }
}

impl SubjectSpec {
    /// Parse `partial-keys:0,1,2`, `all-keys` or `known-metric:3`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), Some(r.trim())),
            None => (s.trim(), None),
        };
        match (kind, rest) {
            ("all-keys", None) => Ok(SubjectSpec::AllKeys),
            ("partial-keys", Some(list)) => {
                let stored = parse_index_list(list)?;
                Ok(SubjectSpec::PartialKeys(stored))
            }
            ("partial-keys", None) => Ok(SubjectSpec::PartialKeys(BTreeSet::new())),
            ("known-metric", Some(i)) => Ok(SubjectSpec::KnownMetric(
                i.parse().map_err(|_| format!("bad feature index {i:?}"))?,
            )),
            _ => Err(format!("unknown subject {s:?}")),
        }
    }
}

fn parse_index_list(list: &str) -> Result<BTreeSet<usize>, String> {
    let mut out = BTreeSet::new();
    for part in list.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.insert(part.parse().map_err(|_| format!("bad index {part:?}"))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Feature count n.
    pub n: usize,
    /// Secret-key size in bits.
    pub ell_bits: usize,
    /// Security parameter: nonce and field-element width.
    pub lambda: u32,
    /// Protected-set size of the metric class.
    pub t_class: usize,
    /// Estimator accuracy target.
    pub delta: f64,
    /// Estimator confidence parameter (Hoeffding exponent).
    pub lambda_est: u32,
    /// Fooling-measurement trials per attack run.
    pub trials: usize,
    /// Independent seeded attack runs in the adaptive scenario.
    pub attack_runs: usize,
    /// Samples for the clean-advantage gate before attacking.
    pub gate_trials: usize,
    /// Minimum estimated clean advantage for fooling to be asserted.
    pub epsilon_threshold: f64,
    /// Random admissible perturbations in the robustness scenarios.
    pub perturb_trials: usize,
    /// Trials per (rho, policy) cell in the incompressibility scenario.
    pub incompr_trials: usize,
    /// Reconstruction seeds in the share-learning scenario.
    pub pac_seeds: usize,
    /// Root of the seed-derivation tree.
    pub master_seed: u64,
    /// Payload-mask hash; only sha-256 is wired in.
    pub hash: String,
    /// Adaptive-attack subject.
    pub subject: SubjectSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 8,
            ell_bits: 1024,
            lambda: 128,
            t_class: 5, // n/2 + 1
            delta: 0.05,
            lambda_est: 64,
            trials: 200,
            attack_runs: 100,
            gate_trials: 2000,
            epsilon_threshold: 0.1,
            perturb_trials: 1000,
            incompr_trials: 10_000,
            pac_seeds: 100,
            master_seed: 7,
            hash: "sha-256".to_string(),
            subject: SubjectSpec::PartialKeys([0, 1, 2].into_iter().collect()),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.lambda == 0 || !self.lambda.is_multiple_of(8) || self.lambda > crate::bigkey::MAX_LAMBDA {
            return fail(format!("lambda must be a positive multiple of 8 up to 128, got {}", self.lambda));
        }
        if self.lambda != 128 {
            return fail("the share field is instantiated at lambda = 128".to_string());
        }
        if !self.ell_bits.is_multiple_of(8) || self.ell_bits < self.lambda as usize {
            return fail(format!(
                "ell_bits must be a multiple of 8 and at least lambda, got {}",
                self.ell_bits
            ));
        }
        if self.t_class == 0 || self.t_class > self.n {
            return fail(format!("t_class must be in 1..=n, got {}", self.t_class));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return fail(format!("delta must be in (0, 1/2], got {}", self.delta));
        }
        if self.lambda_est < 1 {
            return fail("lambda_est must be at least 1".to_string());
        }
        if self.trials == 0 || self.perturb_trials == 0 || self.incompr_trials == 0 {
            return fail("trial counts must be positive".to_string());
        }
        if self.attack_runs == 0 || self.gate_trials == 0 || self.pac_seeds == 0 {
            return fail("run counts must be positive".to_string());
        }
        if !(0.0..=0.5).contains(&self.epsilon_threshold) {
            return fail(format!(
                "epsilon_threshold must be in [0, 1/2], got {}",
                self.epsilon_threshold
            ));
        }
        if self.hash != "sha-256" {
            return fail(format!("unsupported hash {:?}; only sha-256 is wired in", self.hash));
        }
        let subject_indices: Vec<usize> = match &self.subject {
            SubjectSpec::PartialKeys(s) => s.iter().copied().collect(),
            SubjectSpec::KnownMetric(i) => vec![*i],
            SubjectSpec::AllKeys => vec![],
        };
        if let Some(bad) = subject_indices.iter().find(|&&i| i >= self.n) {
            return fail(format!("subject feature {bad} out of range for n = {}", self.n));
        }
        Ok(())
    }

    /// Effective configuration in the exact format `parse` accepts.
    pub fn dump(&self) -> String {
        format!(
            "# bigkeylab experiment configuration\n\
             [problem]\n\
             n = {}\n\
             ell_bits = {}\n\
             lambda = {}\n\
             \n\
             [metric]\n\
             t_class = {}\n\
             \n\
             [estimator]\n\
             delta = {}\n\
             lambda_est = {}\n\
             \n\
             [attack]\n\
             trials = {}\n\
             runs = {}\n\
             gate_trials = {}\n\
             epsilon_threshold = {}\n\
             \n\
             [scenarios]\n\
             perturb_trials = {}\n\
             incompr_trials = {}\n\
             pac_seeds = {}\n\
             \n\
             [run]\n\
             master_seed = {}\n\
             hash = {}\n\
             \n\
             [subject]\n\
             subject = {}\n",
            self.n,
            self.ell_bits,
            self.lambda,
            self.t_class,
            self.delta,
            self.lambda_est,
            self.trials,
            self.attack_runs,
            self.gate_trials,
            self.epsilon_threshold,
            self.perturb_trials,
            self.incompr_trials,
            self.pac_seeds,
            self.master_seed,
            self.hash,
            self.subject,
        )
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: lineno,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let qualified = format!("{section}.{key}");
            let bad = |msg: String| ConfigError::Parse { line: lineno, msg };
            macro_rules! num {
                () => {
                    value
                        .parse()
                        .map_err(|_| bad(format!("bad numeric value {value:?} for {qualified}")))?
                };
            }
            match qualified.as_str() {
                "problem.n" => cfg.n = num!(),
                "problem.ell_bits" => cfg.ell_bits = num!(),
                "problem.lambda" => cfg.lambda = num!(),
                "metric.t_class" => cfg.t_class = num!(),
                "estimator.delta" => cfg.delta = num!(),
                "estimator.lambda_est" => cfg.lambda_est = num!(),
                "attack.trials" => cfg.trials = num!(),
                "attack.runs" => cfg.attack_runs = num!(),
                "attack.gate_trials" => cfg.gate_trials = num!(),
                "attack.epsilon_threshold" => cfg.epsilon_threshold = num!(),
                "scenarios.perturb_trials" => cfg.perturb_trials = num!(),
                "scenarios.incompr_trials" => cfg.incompr_trials = num!(),
                "scenarios.pac_seeds" => cfg.pac_seeds = num!(),
                "run.master_seed" => cfg.master_seed = num!(),
                "run.hash" => cfg.hash = value.to_string(),
                "subject.subject" => {
                    cfg.subject = SubjectSpec::parse(value).map_err(&bad)?
                }
                _ => {
                    return Err(bad(format!("unknown configuration key {qualified:?}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}
