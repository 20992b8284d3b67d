//! Weighted Hamming metrics, the protected-set metric family, and exact
//! perturbation-budget checks.
//!
//! A protected set T induces the two-level weight vector w_i = 1 for i in T
//! and w_i = 1/n otherwise; the metric is the weighted count of differing
//! features. The adversary's budget is normalized to 1, so touching a single
//! protected feature is already inadmissible while flipping every unprotected
//! feature costs at most (n-1)/n. All distance arithmetic is exact: the
//! budget boundary sits exactly at n unprotected flips and must not be
//! smeared by floating point.

use crate::task::Instance;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("instances have {got} features, metric expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("protected index {0} out of range for {1} features")]
    IndexOutOfRange(usize, usize),
    #[error("weight vector entries must be strictly positive")]
    NonPositiveWeight,
}

/// Exact non-negative rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        if num == 0 {
            return Rational::ZERO;
        }
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

}

impl std::ops::Add for Rational {
    type Output = Rational;

    fn add(self, rhs: Rational) -> Rational {
        let num = self.num as u128 * rhs.den as u128 + rhs.num as u128 * self.den as u128;
        let den = self.den as u128 * rhs.den as u128;
        if num == 0 {
            return Rational::ZERO;
        }
        let g = gcd128(num, den);
        Rational {
            num: u64::try_from(num / g).expect("rational overflow"),
            den: u64::try_from(den / g).expect("rational overflow"),
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn gcd128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// General per-feature weights for the weighted Hamming distance. The metric
/// class used by the experiments is the two-level [`ProtectedMetric`]; this
/// type exists for the general distance computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightVector {
    weights: Vec<Rational>,
}

impl WeightVector {
    pub fn new(weights: Vec<Rational>) -> Result<Self, MetricError> {
        if weights.iter().any(|w| w.num == 0) {
            return Err(MetricError::NonPositiveWeight);
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sum of weights over differing features.
    pub fn dist(&self, x: &Instance, z: &Instance) -> Result<Rational, MetricError> {
        if x.n() != self.len() || z.n() != self.len() {
            return Err(MetricError::DimensionMismatch {
                expected: self.len(),
                got: if x.n() != self.len() { x.n() } else { z.n() },
            });
        }
        let mut d = Rational::ZERO;
        for (i, w) in self.weights.iter().enumerate() {
            if x.feature(i) != z.feature(i) {
                d = d + *w;
            }
        }
        Ok(d)
    }
}

/// A metric d_T from the protected-set family: indices in T carry weight 1,
/// the rest weight 1/n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedMetric {
    n: usize,
    protected: BTreeSet<usize>,
}

impl ProtectedMetric {
    pub fn new(n: usize, protected: BTreeSet<usize>) -> Result<Self, MetricError> {
        if let Some(&bad) = protected.iter().find(|&&i| i >= n) {
            return Err(MetricError::IndexOutOfRange(bad, n));
        }
        Ok(Self { n, protected })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn protected(&self) -> &BTreeSet<usize> {
        &self.protected
    }

    pub fn is_protected(&self, i: usize) -> bool {
        self.protected.contains(&i)
    }

    /// The induced two-level weight vector.
    pub fn weights(&self) -> WeightVector {
        let weights = (0..self.n)
            .map(|i| {
                if self.is_protected(i) {
                    Rational::ONE
                } else {
                    Rational::new(1, self.n as u64)
                }
            })
            .collect();
        WeightVector::new(weights).expect("two-level weights are positive")
    }

    /// Count differing features, split by protection.
    pub fn delta(&self, x: &Instance, z: &Instance) -> Result<PerturbationDelta, MetricError> {
        if x.n() != self.n || z.n() != self.n {
            return Err(MetricError::DimensionMismatch {
                expected: self.n,
                got: if x.n() != self.n { x.n() } else { z.n() },
            });
        }
        let mut protected_diffs = 0;
        let mut unprotected_diffs = 0;
        for i in 0..self.n {
            if x.feature(i) != z.feature(i) {
                if self.is_protected(i) {
                    protected_diffs += 1;
                } else {
                    unprotected_diffs += 1;
                }
            }
        }
        Ok(PerturbationDelta {
            n: self.n,
            protected_diffs,
            unprotected_diffs,
        })
    }

    /// Exact weighted Hamming distance.
    pub fn dist(&self, x: &Instance, z: &Instance) -> Result<Rational, MetricError> {
        Ok(self.delta(x, z)?.distance())
    }

    /// Budget check `d_T(x, x~) < 1` as a pure integer test: no protected
    /// feature may differ, and fewer than n unprotected features may.
    pub fn is_admissible(&self, x: &Instance, perturbed: &Instance) -> Result<bool, MetricError> {
        let d = self.delta(x, perturbed)?;
        Ok(d.protected_diffs == 0 && d.unprotected_diffs < self.n)
    }

    /// Structured descriptor for experiment logs: `{n, sorted T}`.
    pub fn descriptor(&self) -> String {
        let idx: Vec<String> = self.protected.iter().map(|i| i.to_string()).collect();
        format!("{{n={}, T=[{}]}}", self.n, idx.join(","))
    }
}

/// Outcome of comparing two instances under a protected metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbationDelta {
    n: usize,
    pub protected_diffs: usize,
    pub unprotected_diffs: usize,
}

impl PerturbationDelta {
    /// protected_diffs * 1 + unprotected_diffs / n, exactly.
    pub fn distance(&self) -> Rational {
        Rational::new(
            (self.protected_diffs * self.n + self.unprotected_diffs) as u64,
            self.n as u64,
        )
    }
}

/// Membership in the class C = { d_T : T subset of [n], |T| = t_class }.
pub fn metric_class_contains(n: usize, t_class: usize, protected: &BTreeSet<usize>) -> bool {
    protected.len() == t_class && protected.iter().all(|&i| i < n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use crate::task::{gen, samp};
    use rand_chacha::ChaCha12Rng;

    fn set(idx: &[usize]) -> BTreeSet<usize> {
        idx.iter().copied().collect()
    }

    fn fixture(n: usize) -> (crate::task::ProblemState, ChaCha12Rng) {
        let mut rng = Seed::from_master(100).rng();
        let st = gen(128, 256, n, &mut rng).unwrap();
        (st, rng)
    }

    /// Re-encrypt the listed features of `x` to the given bit.
    fn flip(
        st: &crate::task::ProblemState,
        x: &Instance,
        idx: &[usize],
        bit: u8,
        rng: &mut ChaCha12Rng,
    ) -> Instance {
        let mut feats: Vec<_> = (0..x.n()).map(|i| *x.feature(i)).collect();
        for &i in idx {
            feats[i] = crate::bigkey::enc(&st.handle(i), bit, rng);
        }
        Instance::new(feats)
    }

    #[test]
    fn rational_basics() {
        assert_eq!(Rational::new(2, 8), Rational::new(1, 4));
        assert!(Rational::new(7, 8) < Rational::ONE);
        assert!(Rational::new(9, 8) > Rational::ONE);
        assert_eq!(Rational::new(1, 8) + Rational::new(3, 8), Rational::new(1, 2));
    }

    #[test]
    fn dist_identity_and_single_flips() {
        let (st, mut rng) = fixture(8);
        let m = ProtectedMetric::new(8, set(&[0, 1, 2, 3, 4])).unwrap();
        let x = samp(&st, 0, &mut rng);
        assert_eq!(m.dist(&x, &x).unwrap(), Rational::ZERO);

        let one_unprotected = flip(&st, &x, &[7], 1, &mut rng);
        assert_eq!(m.dist(&x, &one_unprotected).unwrap(), Rational::new(1, 8));

        // touching one protected feature alone already exhausts the budget
        let one_protected = flip(&st, &x, &[2], 1, &mut rng);
        assert_eq!(m.dist(&x, &one_protected).unwrap(), Rational::ONE);
        assert!(m.dist(&x, &one_protected).unwrap() >= Rational::ONE);
        assert!(!m.is_admissible(&x, &one_protected).unwrap());
    }

    #[test]
    fn admissibility_examples() {
        let (st, mut rng) = fixture(8);
        let m = ProtectedMetric::new(8, set(&[0, 1, 2, 3, 4])).unwrap();
        let x = samp(&st, 1, &mut rng);
        assert!(m.is_admissible(&x, &x).unwrap());

        let all = flip(&st, &x, &[0, 1, 2, 3, 4, 5, 6, 7], 0, &mut rng);
        assert!(!m.is_admissible(&x, &all).unwrap());

        let all_unprotected = flip(&st, &x, &[5, 6, 7], 0, &mut rng);
        assert!(m.is_admissible(&x, &all_unprotected).unwrap());
        assert!(m.dist(&x, &all_unprotected).unwrap() < Rational::ONE);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (st, mut rng) = fixture(8);
        let (st4, mut rng4) = fixture(4);
        let m = ProtectedMetric::new(8, set(&[0])).unwrap();
        let x = samp(&st, 0, &mut rng);
        let y = samp(&st4, 0, &mut rng4);
        assert!(matches!(
            m.dist(&x, &y),
            Err(MetricError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn class_membership() {
        assert!(metric_class_contains(8, 5, &set(&[0, 1, 2, 3, 4])));
        assert!(!metric_class_contains(8, 5, &set(&[0, 1, 2, 3])));
        assert!(metric_class_contains(8, 5, &set(&[3, 4, 5, 6, 7])));
        assert!(!metric_class_contains(8, 5, &set(&[4, 5, 6, 7, 8]))); // 8 out of range
        assert!(ProtectedMetric::new(8, set(&[8])).is_err());
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let (st, mut rng) = fixture(8);
        for round in 0..50 {
            let t: BTreeSet<usize> = (0..8).filter(|i| (round >> i) & 1 == 1).collect();
            let m = ProtectedMetric::new(8, t).unwrap();
            let x = samp(&st, 0, &mut rng);
            let y = flip(&st, &x, &[round % 8, (round + 3) % 8], 1, &mut rng);
            let z = flip(&st, &y, &[(round + 5) % 8], 0, &mut rng);

            let dxy = m.dist(&x, &y).unwrap();
            let dyx = m.dist(&y, &x).unwrap();
            let dyz = m.dist(&y, &z).unwrap();
            let dxz = m.dist(&x, &z).unwrap();
            assert_eq!(dxy, dyx);
            assert_eq!(m.dist(&x, &x).unwrap(), Rational::ZERO);
            assert!(dxz <= dxy + dyz, "triangle violated");
            // identity of indiscernibles
            if dxy == Rational::ZERO {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn fast_path_matches_rational_and_weight_vector() {
        let (st, mut rng) = fixture(8);
        for round in 0..40u32 {
            let t: BTreeSet<usize> = (0..8).filter(|i| (round >> i) & 1 == 1).collect();
            let m = ProtectedMetric::new(8, t).unwrap();
            let w = m.weights();
            let x = samp(&st, 0, &mut rng);
            let flips: Vec<usize> = (0..8).filter(|i| ((round * 7) >> i) & 1 == 1).collect();
            let y = flip(&st, &x, &flips, 1, &mut rng);
            let d = m.dist(&x, &y).unwrap();
            assert_eq!(d, w.dist(&x, &y).unwrap());
            assert_eq!(m.is_admissible(&x, &y).unwrap(), d < Rational::ONE);
        }
    }

    #[test]
    fn admissibility_monotone_under_shrinking_protection() {
        let (st, mut rng) = fixture(8);
        let big = ProtectedMetric::new(8, set(&[0, 1, 2, 3, 4])).unwrap();
        let small = ProtectedMetric::new(8, set(&[0, 1])).unwrap();
        for round in 0..30 {
            let x = samp(&st, 0, &mut rng);
            let flips: Vec<usize> = (0..8).filter(|i| (round >> i) & 1 == 1).collect();
            let y = flip(&st, &x, &flips, 1, &mut rng);
            if big.is_admissible(&x, &y).unwrap() {
                assert!(small.is_admissible(&x, &y).unwrap());
            }
        }
    }

    #[test]
    fn descriptor_format() {
        let m = ProtectedMetric::new(8, set(&[4, 1, 6])).unwrap();
        assert_eq!(m.descriptor(), "{n=8, T=[1,4,6]}");
    }
}
