//! Learners and classifiers with explicit model-size accounting.
//!
//! Three model kinds exist. A known-metric model stores one key for a feature
//! inside the protected set and classifies by decrypting that single feature.
//! An all-keys model stores every key and takes a majority vote. Partial-key
//! models store an arbitrary key subset and vote over it; they are the
//! subject family the adaptive attack is run against. Model size is counted
//! in bits: each stored key costs ℓ, each explicit feature index costs
//! ceil(log2 n). The all-keys model stores keys in feature order and pays no
//! index cost.
//!
//! Model wire format: kind (1 byte: 1 known-metric, 2 all-keys, 3
//! partial-keys) || n (4 bytes BE) || ℓ in bits (4 bytes BE) || entry count
//! (4 bytes BE) || entries, each feature index (4 bytes BE) || sk (ℓ/8
//! bytes). `declared_bits` is recomputed from the parsed header, never
//! trusted.

use crate::bigkey::mask_bit;
use crate::field::Poly;
use crate::task::{share_count, AugmentedInstance, Instance, ProblemState};
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LearnError {
    #[error("protected set is empty")]
    EmptyProtectedSet,
    #[error("index {0} out of range for {1} features")]
    IndexOutOfRange(usize, usize),
    #[error("malformed model: {0}")]
    MalformedModel(&'static str),
    #[error("need {needed} augmented samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("duplicate share abscissa among the samples used")]
    DuplicateAbscissa,
    #[error("share decoding failed: {0}")]
    ShareDecode(crate::field::FieldError),
    #[error("reconstructed state is malformed")]
    BadReconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    KnownMetric,
    AllKeys,
    PartialKeys,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::KnownMetric => 1,
            ModelKind::AllKeys => 2,
            ModelKind::PartialKeys => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(ModelKind::KnownMetric),
            2 => Some(ModelKind::AllKeys),
            3 => Some(ModelKind::PartialKeys),
            _ => None,
        }
    }
}

pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// A learned hypothesis: stored keys plus the feature indices they decrypt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    kind: ModelKind,
    n: usize,
    ell_bits: usize,
    /// (feature index, raw key bytes), sorted by index.
    entries: Vec<(usize, Vec<u8>)>,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell_bits(&self) -> usize {
        self.ell_bits
    }

    /// Feature indices this model holds keys for.
    pub fn stored_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|(i, _)| *i).collect()
    }

    /// Exact payload size in bits: stored keys plus, for kinds that name
    /// their features explicitly, one ceil(log2 n) index per key.
    pub fn declared_bits(&self) -> usize {
        let k = self.entries.len();
        match self.kind {
            ModelKind::AllKeys => k * self.ell_bits,
            ModelKind::KnownMetric | ModelKind::PartialKeys => {
                k * (self.ell_bits + ceil_log2(self.n) as usize)
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.kind.tag());
        out.extend_from_slice(&(self.n as u32).to_be_bytes());
        out.extend_from_slice(&(self.ell_bits as u32).to_be_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_be_bytes());
        for (idx, key) in &self.entries {
            out.extend_from_slice(&(*idx as u32).to_be_bytes());
            out.extend_from_slice(key);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LearnError> {
        if bytes.len() < 13 {
            return Err(LearnError::MalformedModel("truncated header"));
        }
        let kind = ModelKind::from_tag(bytes[0]).ok_or(LearnError::MalformedModel("bad kind"))?;
        let n = u32::from_be_bytes(bytes[1..5].try_into().unwrap()) as usize;
        let ell_bits = u32::from_be_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let count = u32::from_be_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if ell_bits == 0 || !ell_bits.is_multiple_of(8) {
            return Err(LearnError::MalformedModel("bad key size"));
        }
        let entry_len = 4 + ell_bits / 8;
        if bytes.len() != 13 + count * entry_len {
            return Err(LearnError::MalformedModel("bad body length"));
        }
        let mut entries = Vec::with_capacity(count);
        for chunk in bytes[13..].chunks(entry_len) {
            let idx = u32::from_be_bytes(chunk[..4].try_into().unwrap()) as usize;
            if idx >= n {
                return Err(LearnError::MalformedModel("index out of range"));
            }
            entries.push((idx, chunk[4..].to_vec()));
        }
        if kind == ModelKind::AllKeys && entries.len() != n {
            return Err(LearnError::MalformedModel("all-keys model must store n keys"));
        }
        Ok(Self {
            kind,
            n,
            ell_bits,
            entries,
        })
    }
}

/// Store the single key for i* = min(T); robust whenever the target metric
/// protects i*.
pub fn learn_known_metric(
    protected: &BTreeSet<usize>,
    st: &ProblemState,
) -> Result<Model, LearnError> {
    let &i_star = protected.iter().next().ok_or(LearnError::EmptyProtectedSet)?;
    if i_star >= st.n() {
        return Err(LearnError::IndexOutOfRange(i_star, st.n()));
    }
    Ok(Model {
        kind: ModelKind::KnownMetric,
        n: st.n(),
        ell_bits: st.ell_bits(),
        entries: vec![(i_star, st.key(i_star).sk_bytes().to_vec())],
    })
}

/// Store every key in feature order.
pub fn learn_all(st: &ProblemState) -> Model {
    Model {
        kind: ModelKind::AllKeys,
        n: st.n(),
        ell_bits: st.ell_bits(),
        entries: (0..st.n())
            .map(|i| (i, st.key(i).sk_bytes().to_vec()))
            .collect(),
    }
}

/// Store the keys for an arbitrary feature subset S.
pub fn learn_partial(st: &ProblemState, stored: &BTreeSet<usize>) -> Result<Model, LearnError> {
    if let Some(&bad) = stored.iter().find(|&&i| i >= st.n()) {
        return Err(LearnError::IndexOutOfRange(bad, st.n()));
    }
    Ok(Model {
        kind: ModelKind::PartialKeys,
        n: st.n(),
        ell_bits: st.ell_bits(),
        entries: stored
            .iter()
            .map(|&i| (i, st.key(i).sk_bytes().to_vec()))
            .collect(),
    })
}

fn dec_entry(entry: &(usize, Vec<u8>), x: &Instance) -> u8 {
    let ct = x.feature(entry.0);
    ct.payload() ^ mask_bit(ct.nonce(), &entry.1)
}

/// Decrypt the committed feature i* and output its bit.
pub fn classify_small(h: &Model, x: &Instance) -> Result<u8, LearnError> {
    if h.kind != ModelKind::KnownMetric || h.entries.len() != 1 {
        return Err(LearnError::MalformedModel("expected a known-metric model"));
    }
    if x.n() != h.n {
        return Err(LearnError::MalformedModel("instance width mismatch"));
    }
    Ok(dec_entry(&h.entries[0], x))
}

/// Decrypt every stored feature and output 1 iff strictly more than half of
/// the bits are 1. Ties (and the empty read set) resolve to 0.
pub fn classify_majority(h: &Model, x: &Instance) -> Result<u8, LearnError> {
    if h.kind == ModelKind::KnownMetric {
        return Err(LearnError::MalformedModel("expected a key-set model"));
    }
    if x.n() != h.n {
        return Err(LearnError::MalformedModel("instance width mismatch"));
    }
    let ones: usize = h.entries.iter().map(|e| dec_entry(e, x) as usize).sum();
    Ok(if 2 * ones > h.entries.len() { 1 } else { 0 })
}

/// Reconstruct the problem state from augmented samples: interpolate the
/// share polynomial through the first `t` samples and decode its
/// coefficients. Labels are carried for interface fidelity; reconstruction
/// does not depend on them.
pub fn learn_from_shares(
    samples: &[(u8, AugmentedInstance)],
    lambda: u32,
    ell_bits: usize,
) -> Result<ProblemState, LearnError> {
    let n = samples
        .first()
        .map(|(_, s)| s.base.n())
        .ok_or(LearnError::InsufficientSamples { needed: 1, got: 0 })?;
    let t = share_count(n, ell_bits);
    if samples.len() < t {
        return Err(LearnError::InsufficientSamples {
            needed: t,
            got: samples.len(),
        });
    }
    let points: Vec<_> = samples[..t].iter().map(|(_, s)| (s.z, s.gamma)).collect();
    let poly = Poly::interpolate(&points, t).map_err(|e| match e {
        crate::field::FieldError::DuplicateAbscissa => LearnError::DuplicateAbscissa,
        other => LearnError::ShareDecode(other),
    })?;
    let bytes = crate::field::decode_state(poly.coeffs()).map_err(LearnError::ShareDecode)?;
    ProblemState::from_serialized(&bytes, lambda, ell_bits)
        .map_err(|_| LearnError::BadReconstruction)
}

/// Size gate for the impossibility experiments.
pub fn model_size_ok(h: &Model, bound_bits: usize) -> bool {
    h.declared_bits() <= bound_bits
}

/// Black-box classification oracle. Every call increments the query counter;
/// the attack touches its subject only through this surface.
pub struct ClassifierOracle {
    model: Model,
    queries: AtomicU64,
}

impl ClassifierOracle {
    pub fn new(model: Model) -> Self {
        Self {
            model,
            queries: AtomicU64::new(0),
        }
    }

    pub fn classify(&self, x: &Instance) -> u8 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        match self.model.kind {
            ModelKind::KnownMetric => classify_small(&self.model, x),
            ModelKind::AllKeys | ModelKind::PartialKeys => classify_majority(&self.model, x),
        }
        .expect("oracle model matches its classifier")
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Ground truth for scoring only; the attack never sees this.
    pub fn model(&self) -> &Model {
        &self.model
    }
}
