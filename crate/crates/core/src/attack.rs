//! The adaptive metric-choosing adversary.
//!
//! The attack holds only encryption handles and black-box oracle access to a
//! classifier. It walks the features once, estimating at each step whether
//! re-encrypting that feature to the target class shifts the classifier's
//! output distribution by at least 3δ. Features whose flip goes unnoticed
//! accumulate into the insensitive set J and stay flipped in later probe
//! distributions; noticed features are marked sensitive and their flip is
//! reverted, so the classifier's behavior on the running hybrid never drifts
//! far from its behavior on clean samples.
//!
//! Crafting then starts from a fresh sample of the opposite class and
//! re-encrypts exactly the sensitive features to the target class — the
//! result is distributed as the final hybrid, every feature the classifier
//! provably reads says "target class", and the perturbation touches no
//! feature of any metric that protects a set disjoint from the sensitive
//! ones. The metric is chosen after the fact as the smallest such set in the
//! configured class; if none exists the attack aborts, which is the expected
//! outcome against classifiers that read more than half the features.

use crate::bigkey::EncHandle;
use crate::learn::ClassifierOracle;
use crate::metric::{metric_class_contains, ProtectedMetric};
use crate::task::{samp_with_handles, HybridSpec, Instance};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("bad estimator parameters: {0}")]
    BadParams(String),
}

/// Accuracy/confidence knobs for the Hoeffding estimator: m = ceil(λ/δ²)
/// samples bound the estimation error by δ except with probability
/// 2·exp(-2λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    delta: f64,
    lambda_est: u32,
}

impl EstimatorParams {
    pub fn new(delta: f64, lambda_est: u32) -> Result<Self, AttackError> {
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(AttackError::BadParams(format!(
                "delta must be in (0, 1/2], got {delta}"
            )));
        }
        if lambda_est < 1 {
            return Err(AttackError::BadParams("lambda_est must be >= 1".into()));
        }
        Ok(Self { delta, lambda_est })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lambda_est(&self) -> u32 {
        self.lambda_est
    }

    /// m = ceil(λ/δ²).
    pub fn sample_count(&self) -> usize {
        ((self.lambda_est as f64) / (self.delta * self.delta)).ceil() as usize
    }
}

/// Empirical mean of m independent Bernoulli trials.
pub fn estimate_mean<F>(mut trial: F, params: &EstimatorParams, rng: &mut ChaCha12Rng) -> f64
where
    F: FnMut(&mut ChaCha12Rng) -> bool,
{
    let m = params.sample_count();
    let mut hits = 0usize;
    for _ in 0..m {
        if trial(rng) {
            hits += 1;
        }
    }
    hits as f64 / m as f64
}

/// Per-step estimates from the sensitivity walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    pub index: usize,
    pub mu: f64,
    pub mu_prime: f64,
    pub gap: f64,
}

/// What the walk learned about the classifier's read set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub sensitive: BTreeSet<usize>,
    pub insensitive: BTreeSet<usize>,
    pub steps: Vec<StepEstimate>,
    /// Oracle queries spent by the walk: exactly 2·n·m.
    pub queries: u64,
}

/// Walk the features, keeping flips the classifier does not notice.
pub fn probe_sensitivity(
    oracle: &ClassifierOracle,
    handles: &[EncHandle],
    b: u8,
    params: &EstimatorParams,
    rng: &mut ChaCha12Rng,
) -> SensitivityReport {
    let n = handles.len();
    let start_queries = oracle.query_count();
    let mut insensitive: BTreeSet<usize> = BTreeSet::new();
    let mut sensitive: BTreeSet<usize> = BTreeSet::new();
    let mut steps = Vec::with_capacity(n);
    // one sample buffer reused across all 2*n*m trials
    let mut scratch = samp_with_handles(handles, 1 - b, rng);

    for j in 0..n {
        let base = HybridSpec::new(insensitive.clone());
        let mu = estimate_mean(
            |r| {
                crate::task::samp_hybrid_into(&mut scratch, handles, &base, 1 - b, r);
                oracle.classify(&scratch) == b
            },
            params,
            rng,
        );
        let mut with_j = insensitive.clone();
        with_j.insert(j);
        let spec_j = HybridSpec::new(with_j);
        let mu_prime = estimate_mean(
            |r| {
                crate::task::samp_hybrid_into(&mut scratch, handles, &spec_j, 1 - b, r);
                oracle.classify(&scratch) == b
            },
            params,
            rng,
        );
        let gap = (mu_prime - mu).abs();
        steps.push(StepEstimate {
            index: j,
            mu,
            mu_prime,
            gap,
        });
        if gap < 3.0 * params.delta {
            insensitive.insert(j); // flip kept
        } else {
            sensitive.insert(j); // flip reverted
        }
    }

    SensitivityReport {
        sensitive,
        insensitive,
        steps,
        queries: oracle.query_count() - start_queries,
    }
}

/// Why the attack gave up. A first-class outcome, not a failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    /// Too few insensitive features remain to assemble a protected set of
    /// the required size.
    TooManySensitive {
        sensitive: usize,
        available: usize,
        t_class: usize,
    },
}

/// Adversarial example plus the after-the-fact metric, or an explicit abort.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackOutcome {
    Success {
        adversarial: Instance,
        protected: BTreeSet<usize>,
        report: SensitivityReport,
    },
    Abort {
        reason: AbortReason,
        report: SensitivityReport,
    },
}

impl AttackOutcome {
    pub fn report(&self) -> &SensitivityReport {
        match self {
            AttackOutcome::Success { report, .. } | AttackOutcome::Abort { report, .. } => report,
        }
    }

    pub fn is_abort(&self) -> bool {
        matches!(self, AttackOutcome::Abort { .. })
    }
}

/// Choose the protected set: the lexicographically smallest t_class indices
/// disjoint from the sensitive set, or None if fewer than t_class remain.
fn choose_protected(n: usize, t_class: usize, sensitive: &BTreeSet<usize>) -> Option<BTreeSet<usize>> {
    let available: Vec<usize> = (0..n).filter(|i| !sensitive.contains(i)).collect();
    if available.len() < t_class {
        return None;
    }
    Some(available[..t_class].iter().copied().collect())
}

/// Perturb a sample of class `1 - b` into an adversarial example for class
/// `b`: re-encrypt exactly the sensitive features and pick a disjoint
/// protected set.
pub fn craft(
    x: &Instance,
    report: &SensitivityReport,
    handles: &[EncHandle],
    b: u8,
    t_class: usize,
    rng: &mut ChaCha12Rng,
) -> AttackOutcome {
    let n = handles.len();
    let Some(protected) = choose_protected(n, t_class, &report.sensitive) else {
        return AttackOutcome::Abort {
            reason: AbortReason::TooManySensitive {
                sensitive: report.sensitive.len(),
                available: n - report.sensitive.len(),
                t_class,
            },
            report: report.clone(),
        };
    };

    let mut adversarial = x.clone();
    for &i in &report.sensitive {
        adversarial.set_feature(i, crate::bigkey::enc(&handles[i], b, rng));
    }

    debug_assert!(metric_class_contains(n, t_class, &protected));
    debug_assert!(protected.is_disjoint(&report.sensitive));
    debug_assert!(ProtectedMetric::new(n, protected.clone())
        .expect("protected indices in range")
        .is_admissible(x, &adversarial)
        .expect("dimensions match"));

    AttackOutcome::Success {
        adversarial,
        protected,
        report: report.clone(),
    }
}

/// Fooling measurements over the configured trial count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoolingStats {
    pub trials: usize,
    /// Crafted examples the oracle classified as the target class b.
    pub adversarial_hits: usize,
    /// Clean class-b samples the oracle classified as b.
    pub clean_hits: usize,
    pub pr_adversarial_b: f64,
    pub pr_clean_b: f64,
    /// |Pr[C(clean b) = b] - Pr[C(crafted) = b]|.
    pub gap: f64,
    /// Crafted examples confirmed admissible under the chosen metric, with
    /// the metric confirmed to lie in the configured class.
    pub admissible_ok: usize,
}

/// Full attack run: probe, then craft.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRun {
    pub outcome: AttackOutcome,
    /// Present on success; an abort crafts nothing.
    pub stats: Option<FoolingStats>,
}

/// Probe the oracle, then craft and score `fooling_trials` adversarial
/// examples from fresh samples of class `1 - b`, measuring the clean-side
/// rate on fresh class-b samples. Oracle queries: 2·n·m for the probe plus
/// 2·fooling_trials for the measurements.
pub fn full_attack(
    oracle: &ClassifierOracle,
    handles: &[EncHandle],
    b: u8,
    params: &EstimatorParams,
    t_class: usize,
    fooling_trials: usize,
    rng: &mut ChaCha12Rng,
) -> AttackRun {
    let report = probe_sensitivity(oracle, handles, b, params, rng);
    let n = handles.len();

    let Some(protected) = choose_protected(n, t_class, &report.sensitive) else {
        let x = samp_with_handles(handles, 1 - b, rng);
        let outcome = craft(&x, &report, handles, b, t_class, rng);
        debug_assert!(outcome.is_abort());
        return AttackRun {
            outcome,
            stats: None,
        };
    };
    let metric = ProtectedMetric::new(n, protected.clone()).expect("indices in range");

    let mut adversarial_hits = 0usize;
    let mut clean_hits = 0usize;
    let mut admissible_ok = 0usize;
    let mut first_example: Option<Instance> = None;

    for _ in 0..fooling_trials {
        let x = samp_with_handles(handles, 1 - b, rng);
        let crafted = match craft(&x, &report, handles, b, t_class, rng) {
            AttackOutcome::Success { adversarial, .. } => adversarial,
            AttackOutcome::Abort { .. } => unreachable!("protected set exists"),
        };
        if metric.is_admissible(&x, &crafted).expect("dimensions match")
            && metric_class_contains(n, t_class, &protected)
        {
            admissible_ok += 1;
        }
        if oracle.classify(&crafted) == b {
            adversarial_hits += 1;
        }
        if first_example.is_none() {
            first_example = Some(crafted);
        }

        let clean = samp_with_handles(handles, b, rng);
        if oracle.classify(&clean) == b {
            clean_hits += 1;
        }
    }

    let pr_adversarial_b = adversarial_hits as f64 / fooling_trials.max(1) as f64;
    let pr_clean_b = clean_hits as f64 / fooling_trials.max(1) as f64;
    let stats = FoolingStats {
        trials: fooling_trials,
        adversarial_hits,
        clean_hits,
        pr_adversarial_b,
        pr_clean_b,
        gap: (pr_clean_b - pr_adversarial_b).abs(),
        admissible_ok,
    };
    let adversarial = first_example.unwrap_or_else(|| samp_with_handles(handles, 1 - b, rng));
    AttackRun {
        outcome: AttackOutcome::Success {
            adversarial,
            protected,
            report,
        },
        stats: Some(stats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{learn_all, learn_known_metric, learn_partial, ClassifierOracle};
    use crate::rng::Seed;
    use crate::task::{gen, ProblemState};

    fn state(seed: u64) -> ProblemState {
        gen(128, 1024, 8, &mut Seed::from_master(seed).rng()).unwrap()
    }

    fn params() -> EstimatorParams {
        EstimatorParams::new(0.05, 64).unwrap()
    }

    fn set(idx: &[usize]) -> BTreeSet<usize> {
        idx.iter().copied().collect()
    }

    #[test]
    fn estimator_params_validation() {
        assert!(EstimatorParams::new(0.0, 64).is_err());
        assert!(EstimatorParams::new(0.6, 64).is_err());
        assert!(EstimatorParams::new(0.05, 0).is_err());
        assert_eq!(params().sample_count(), 25_600);
    }

    #[test]
    fn estimator_constants_are_exact() {
        let mut rng = Seed::from_master(1).rng();
        let fast = EstimatorParams::new(0.1, 4).unwrap(); // m = 400
        assert_eq!(estimate_mean(|_| false, &fast, &mut rng), 0.0);
        assert_eq!(estimate_mean(|_| true, &fast, &mut rng), 1.0);
    }

    #[test]
    fn estimator_tracks_a_fair_coin() {
        use rand_chacha::rand_core::RngCore;
        let mut rng = Seed::from_master(2).rng();
        let mu = estimate_mean(|r| r.next_u32() & 1 == 1, &params(), &mut rng);
        assert!((0.45..=0.55).contains(&mu), "estimate {mu}");
    }

    /// A 3-of-3 majority absorbs the first probed stored key: its lone flip
    /// cannot move the vote, so the walk keeps it flipped and only the
    /// remaining members show up as sensitive.
    #[test]
    fn probe_against_partial_majority_detects_all_but_first_member() {
        let st = state(3);
        let oracle = ClassifierOracle::new(learn_partial(&st, &set(&[1, 3, 5])).unwrap());
        let mut rng = Seed::from_master(4).rng();
        let report = probe_sensitivity(&oracle, &st.handles(), 1, &params(), &mut rng);
        assert_eq!(report.sensitive, set(&[3, 5]));
        assert_eq!(report.queries, 2 * 8 * 25_600);
        assert_eq!(oracle.query_count(), report.queries);
    }

    #[test]
    fn probe_against_single_key_subject_is_exact() {
        let st = state(5);
        let oracle = ClassifierOracle::new(learn_known_metric(&set(&[3, 6]), &st).unwrap());
        let mut rng = Seed::from_master(6).rng();
        for b in [0u8, 1] {
            let report = probe_sensitivity(&oracle, &st.handles(), b, &params(), &mut rng);
            assert_eq!(report.sensitive, set(&[3]));
        }
    }

    #[test]
    fn probe_against_blind_subject_finds_nothing() {
        let st = state(7);
        let oracle = ClassifierOracle::new(learn_partial(&st, &set(&[])).unwrap());
        let mut rng = Seed::from_master(8).rng();
        let report = probe_sensitivity(&oracle, &st.handles(), 1, &params(), &mut rng);
        assert!(report.sensitive.is_empty());
        assert!(report.steps.iter().all(|s| s.gap == 0.0));
    }

    #[test]
    fn craft_with_no_sensitive_features_is_identity() {
        let st = state(9);
        let mut rng = Seed::from_master(10).rng();
        let report = SensitivityReport {
            sensitive: BTreeSet::new(),
            insensitive: (0..8).collect(),
            steps: vec![],
            queries: 0,
        };
        let x = crate::task::samp(&st, 0, &mut rng);
        match craft(&x, &report, &st.handles(), 1, 5, &mut rng) {
            AttackOutcome::Success {
                adversarial,
                protected,
                ..
            } => {
                assert_eq!(adversarial, x);
                assert_eq!(protected, set(&[0, 1, 2, 3, 4]));
            }
            AttackOutcome::Abort { .. } => panic!("unexpected abort"),
        }
    }

    #[test]
    fn craft_flips_sensitive_and_protects_disjoint_set() {
        let st = state(11);
        let mut rng = Seed::from_master(12).rng();
        let report = SensitivityReport {
            sensitive: set(&[0, 1, 2]),
            insensitive: (3..8).collect(),
            steps: vec![],
            queries: 0,
        };
        let x = crate::task::samp(&st, 0, &mut rng);
        match craft(&x, &report, &st.handles(), 1, 5, &mut rng) {
            AttackOutcome::Success {
                adversarial,
                protected,
                ..
            } => {
                assert_eq!(protected, set(&[3, 4, 5, 6, 7]));
                let metric = ProtectedMetric::new(8, protected).unwrap();
                assert_eq!(
                    metric.dist(&x, &adversarial).unwrap(),
                    crate::metric::Rational::new(3, 8)
                );
                for i in 0..3 {
                    assert_eq!(crate::bigkey::dec(st.key(i), adversarial.feature(i)), 1);
                }
                for i in 3..8 {
                    assert_eq!(adversarial.feature(i), x.feature(i));
                }
            }
            AttackOutcome::Abort { .. } => panic!("unexpected abort"),
        }
    }

    #[test]
    fn craft_aborts_when_no_disjoint_class_member_exists() {
        let st = state(13);
        let mut rng = Seed::from_master(14).rng();
        let report = SensitivityReport {
            sensitive: (0..7).collect(),
            insensitive: set(&[7]),
            steps: vec![],
            queries: 0,
        };
        let x = crate::task::samp(&st, 0, &mut rng);
        match craft(&x, &report, &st.handles(), 1, 5, &mut rng) {
            AttackOutcome::Abort { reason, .. } => assert_eq!(
                reason,
                AbortReason::TooManySensitive {
                    sensitive: 7,
                    available: 1,
                    t_class: 5
                }
            ),
            AttackOutcome::Success { .. } => panic!("expected abort"),
        }
    }

    #[test]
    fn full_attack_fools_in_bound_subject() {
        let st = state(15);
        let stored = set(&[1, 3, 5]);
        let oracle = ClassifierOracle::new(learn_partial(&st, &stored).unwrap());
        let mut rng = Seed::from_master(16).rng();
        let run = full_attack(&oracle, &st.handles(), 1, &params(), 5, 200, &mut rng);
        let stats = run.stats.expect("in-bound subject yields stats");
        assert!(stats.pr_adversarial_b >= 0.95, "fooling rate {}", stats.pr_adversarial_b);
        assert!(stats.gap <= 0.05, "gap {}", stats.gap);
        assert_eq!(stats.admissible_ok, 200);
        match run.outcome {
            AttackOutcome::Success { protected, report, .. } => {
                assert!(protected.is_disjoint(&report.sensitive));
                assert_eq!(protected.len(), 5);
            }
            AttackOutcome::Abort { .. } => panic!("unexpected abort"),
        }
        // query budget: probe + 2 per fooling trial
        assert_eq!(
            oracle.query_count(),
            2 * 8 * 25_600 + 2 * 200
        );
    }

    #[test]
    fn full_attack_aborts_against_full_key_subject() {
        let st = state(17);
        let oracle = ClassifierOracle::new(learn_all(&st));
        let mut rng = Seed::from_master(18).rng();
        let run = full_attack(&oracle, &st.handles(), 1, &params(), 5, 50, &mut rng);
        assert!(run.stats.is_none());
        match run.outcome {
            AttackOutcome::Abort { reason, report } => {
                assert!(matches!(reason, AbortReason::TooManySensitive { .. }));
                // the walk absorbs flips until the majority threshold, then
                // every further stored feature is sensitive
                assert!(report.sensitive.len() * 2 >= 8, "sensitive {:?}", report.sensitive);
            }
            AttackOutcome::Success { .. } => panic!("expected abort"),
        }
    }
}
