//! Simulation laboratory for binary classification under adaptively chosen
//! weighted-Hamming metrics.
//!
//! The learning problem plants the class bit inside one big-key ciphertext per
//! feature. A classifier that knows the protected feature set ahead of time
//! gets away with storing a single huge key; a classifier that must survive
//! *any* protected set stores all of them. The [`attack`] module implements
//! the adaptive adversary that probes, through black-box oracle access alone,
//! which keys a size-bounded classifier actually uses, then picks the metric
//! after the fact so that every feature it needs to flip is unprotected.
//!
//! Everything is driven by explicit seeded RNG streams (see [`rng`]) so that
//! experiment runs are bit-for-bit reproducible.

pub mod attack;
pub mod bigkey;
pub mod field;
pub mod harness;
pub mod learn;
pub mod metric;
pub mod rng;
pub mod task;

pub use attack::{AbortReason, AttackOutcome, AttackRun, EstimatorParams, FoolingStats, SensitivityReport};
pub use bigkey::{BigKey, Ciphertext, EncHandle, FillPolicy, PartialKey, RetainPolicy};
pub use field::{FieldElem, Poly, F128};
pub use learn::{ClassifierOracle, Model, ModelKind};
pub use metric::{PerturbationDelta, ProtectedMetric, Rational, WeightVector};
pub use rng::Seed;
pub use task::{AugmentedInstance, HybridSpec, Instance, ProblemState};
