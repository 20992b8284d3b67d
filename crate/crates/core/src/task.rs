//! The classification problem and its samplers.
//!
//! A problem state holds n independent big keys, one per feature. A clean
//! sample of class b is the vector of n encryptions of b, one under each
//! feature key. Hybrid samplers flip a chosen index set to the opposite
//! class; the augmented sampler appends one Shamir share (z, f(z)) of the
//! serialized state, which is what makes the problem learnable from samples
//! alone.
//!
//! Sampling needs only the encryption handles, so parties without key
//! material (the attack, notably) use the `*_with_handles` variants.
//!
//! Wire formats:
//!   Instance          = feature count (4 bytes BE) || features, each λ/8+1 bytes
//!   AugmentedInstance = Instance || z (λ/8 bytes) || gamma (λ/8 bytes)
//!   ProblemState      = per entry: key_id (8 bytes BE) || sk (ℓ/8 bytes)

use crate::bigkey::{self, BigKey, BigKeyError, Ciphertext, EncHandle};
use crate::field::{encode_state, Poly, F128};
use rand_chacha::rand_core::RngCore;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("hybrid index {0} out of range for {1} features")]
    IndexOutOfRange(usize, usize),
    #[error("malformed serialized input")]
    Malformed,
    #[error(transparent)]
    BigKey(#[from] BigKeyError),
}

/// The secret state: n (handle, key) pairs in feature order.
#[derive(Debug, Clone)]
pub struct ProblemState {
    lambda: u32,
    ell_bits: usize,
    entries: Vec<(EncHandle, BigKey)>,
}

/// Generate n independent feature keys.
pub fn gen(
    lambda: u32,
    ell_bits: usize,
    n: usize,
    rng: &mut impl RngCore,
) -> Result<ProblemState, TaskError> {
    if n < 2 {
        return Err(TaskError::BadParams(format!(
            "need at least 2 features, got {n}"
        )));
    }
    let entries = (0..n)
        .map(|_| bigkey::keygen(lambda, ell_bits, rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProblemState {
        lambda,
        ell_bits,
        entries,
    })
}

impl ProblemState {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn ell_bits(&self) -> usize {
        self.ell_bits
    }

    pub fn handle(&self, i: usize) -> EncHandle {
        self.entries[i].0.clone()
    }

    pub fn handles(&self) -> Vec<EncHandle> {
        self.entries.iter().map(|(h, _)| h.clone()).collect()
    }

    pub fn key(&self, i: usize) -> &BigKey {
        &self.entries[i].1
    }

    pub fn keys(&self) -> Vec<BigKey> {
        self.entries.iter().map(|(_, k)| k.clone()).collect()
    }

    /// Secret keys and their ids, concatenated in feature order. Handles are
    /// capabilities, not data; they are rebuilt on deserialization.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n() * (8 + self.ell_bits / 8));
        for (_, key) in &self.entries {
            out.extend_from_slice(&key.to_bytes());
        }
        out
    }

    pub fn from_serialized(
        bytes: &[u8],
        lambda: u32,
        ell_bits: usize,
    ) -> Result<Self, TaskError> {
        let entry_len = 8 + ell_bits / 8;
        if entry_len == 8 || !bytes.len().is_multiple_of(entry_len) || bytes.is_empty() {
            return Err(TaskError::Malformed);
        }
        let entries = bytes
            .chunks(entry_len)
            .map(|chunk| {
                let key = BigKey::from_bytes(chunk, lambda, ell_bits)?;
                Ok::<_, TaskError>((key.handle(), key))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProblemState {
            lambda,
            ell_bits,
            entries,
        })
    }

    /// The share polynomial f whose coefficients encode the serialized state.
    pub fn share_polynomial(&self) -> Poly<128> {
        Poly::new(encode_state(&self.serialize()))
    }

    /// Number of augmented samples needed to reconstruct the state.
    pub fn share_count(&self) -> usize {
        share_count(self.n(), self.ell_bits)
    }
}

/// Shares needed for a problem with n keys of ℓ bits each: the element count
/// of the encoded serialized state.
pub fn share_count(n: usize, ell_bits: usize) -> usize {
    let data_bits = n * (64 + ell_bits);
    1 + data_bits.div_ceil(128)
}

/// A feature vector of n ciphertexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    features: Vec<Ciphertext>,
}

impl Instance {
    pub fn new(features: Vec<Ciphertext>) -> Self {
        Self { features }
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn feature(&self, i: usize) -> &Ciphertext {
        &self.features[i]
    }

    pub fn set_feature(&mut self, i: usize, ct: Ciphertext) {
        self.features[i] = ct;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.features.len() as u32).to_be_bytes());
        for f in &self.features {
            out.extend_from_slice(&f.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], lambda: u32) -> Result<Self, TaskError> {
        if bytes.len() < 4 {
            return Err(TaskError::Malformed);
        }
        let n = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        let fw = (lambda / 8) as usize + 1;
        if bytes.len() != 4 + n * fw {
            return Err(TaskError::Malformed);
        }
        let features = bytes[4..]
            .chunks(fw)
            .map(|c| Ciphertext::from_bytes(c, lambda))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| TaskError::Malformed)?;
        Ok(Self { features })
    }
}

/// The index set whose features encrypt the flipped class bit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HybridSpec {
    flipped: BTreeSet<usize>,
    /// Bit i mirrors membership of i for i < 128; samplers sit in the inner
    /// loop of the attack's estimates, a tree lookup per feature adds up.
    low_mask: u128,
}

impl HybridSpec {
    pub fn new(flipped: BTreeSet<usize>) -> Self {
        let low_mask = flipped
            .iter()
            .take_while(|&&i| i < 128)
            .fold(0u128, |m, &i| m | 1 << i);
        Self { flipped, low_mask }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn flipped(&self) -> &BTreeSet<usize> {
        &self.flipped
    }

    #[inline]
    fn contains(&self, i: usize) -> bool {
        if i < 128 {
            self.low_mask >> i & 1 == 1
        } else {
            self.flipped.contains(&i)
        }
    }
}

/// A clean sample plus one Shamir share of the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedInstance {
    pub base: Instance,
    pub z: F128,
    pub gamma: F128,
}

impl AugmentedInstance {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.base.to_bytes();
        out.extend_from_slice(&self.z.to_bytes());
        out.extend_from_slice(&self.gamma.to_bytes());
        out
    }
}

/// Sample a clean instance of class `b`: every feature encrypts `b`.
pub fn samp(st: &ProblemState, b: u8, rng: &mut impl RngCore) -> Instance {
    samp_hybrid(st, &HybridSpec::empty(), b, rng).expect("empty hybrid spec is always in range")
}

/// Sample from the hybrid distribution: features in the spec decrypt to
/// `1 - b`, all others to `b`.
pub fn samp_hybrid(
    st: &ProblemState,
    spec: &HybridSpec,
    b: u8,
    rng: &mut impl RngCore,
) -> Result<Instance, TaskError> {
    let handles = st.handles();
    samp_hybrid_with_handles(&handles, spec, b, rng)
}

/// Handle-only sampling, for parties without the secret state.
pub fn samp_with_handles(handles: &[EncHandle], b: u8, rng: &mut impl RngCore) -> Instance {
    let features = handles.iter().map(|h| bigkey::enc(h, b, rng)).collect();
    Instance::new(features)
}

/// Handle-only hybrid sampling.
pub fn samp_hybrid_with_handles(
    handles: &[EncHandle],
    spec: &HybridSpec,
    b: u8,
    rng: &mut impl RngCore,
) -> Result<Instance, TaskError> {
    let n = handles.len();
    if let Some(&bad) = spec.flipped.iter().find(|&&i| i >= n) {
        return Err(TaskError::IndexOutOfRange(bad, n));
    }
    let features = handles
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let bit = if spec.contains(i) { 1 - b } else { b };
            bigkey::enc(h, bit, rng)
        })
        .collect();
    Ok(Instance::new(features))
}

/// In-place variant for sampling loops: overwrites every feature of `out`,
/// which must already have the right width. Range checks are the caller's
/// responsibility. Nonce bytes for all features are drawn in one bulk read
/// of the same stream positions the per-feature path would consume.
pub(crate) fn samp_hybrid_into(
    out: &mut Instance,
    handles: &[EncHandle],
    spec: &HybridSpec,
    b: u8,
    rng: &mut impl RngCore,
) {
    const BULK: usize = 256;
    let n = handles.len();
    debug_assert_eq!(out.n(), n);
    let nl = handles.first().map_or(0, |h| (h.lambda() / 8) as usize);
    if n * nl > BULK {
        for (i, (f, h)) in out.features.iter_mut().zip(handles).enumerate() {
            let bit = if spec.contains(i) { 1 - b } else { b };
            *f = bigkey::enc(h, bit, rng);
        }
        return;
    }
    let mut nonces = [0u8; BULK];
    rng.fill_bytes(&mut nonces[..n * nl]);
    for (i, (f, h)) in out.features.iter_mut().zip(handles).enumerate() {
        let bit = if spec.contains(i) { 1 - b } else { b };
        let mut nonce = [0u8; 16];
        nonce[..nl].copy_from_slice(&nonces[i * nl..(i + 1) * nl]);
        *f = bigkey::enc_with_nonce(h, bit, nonce, nl);
    }
}

/// Sample of class `b` with the share pair appended; the pair adds exactly
/// 2λ bits over the base instance.
pub fn samp_augmented(st: &ProblemState, b: u8, rng: &mut impl RngCore) -> AugmentedInstance {
    let base = samp(st, b, rng);
    let z = F128::random(rng);
    let gamma = st.share_polynomial().eval(z);
    AugmentedInstance { base, z, gamma }
}
