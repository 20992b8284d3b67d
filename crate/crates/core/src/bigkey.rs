//! Big-key bit encryption with huge uniformly random secret keys and compact
//! ciphertexts.
//!
//! `keygen(λ, ℓ)` samples a secret key of exactly ℓ uniform bits. A ciphertext
//! is a fresh λ-bit nonce `s` plus one payload bit `m ^ lsb(H(s || sk))`,
//! where H is SHA-256 over the nonce followed by the *entire* key. Every
//! decryption rehashes all ℓ key bits; there is deliberately no precomputed
//! shortcut, so a party missing even one bit of the key hashes to an unrelated
//! mask. [`partial_key`]/[`dec_attempt`] exist to probe exactly that.
//!
//! Encryption happens through an [`EncHandle`]: a constant-size capability
//! that lets its holder produce ciphertexts without ever reading key bits.
//! Serialized handles carry only the key id and must be re-attached to a key
//! table to become usable again.
//!
//! Wire formats (all sizes independent of ℓ except the key itself):
//!   Ciphertext = nonce (λ/8 bytes) || payload (1 byte, 0x00 or 0x01)
//!   EncHandle  = key_id (8 bytes, big-endian)
//!   BigKey     = key_id (8 bytes, big-endian) || sk (ℓ/8 bytes)

use rand_chacha::rand_core::RngCore;
use sha2::{Digest, Sha256};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BigKeyError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("handle {0:#018x} does not resolve against the supplied keys")]
    UnresolvableHandle(u64),
    #[error("malformed serialized input")]
    Malformed,
}

pub const MAX_LAMBDA: u32 = 128;

fn check_params(lambda: u32, ell_bits: usize) -> Result<(), BigKeyError> {
    if lambda == 0 || !lambda.is_multiple_of(8) || lambda > MAX_LAMBDA {
        return Err(BigKeyError::BadParams(format!(
            "lambda must be a positive multiple of 8 up to {MAX_LAMBDA}, got {lambda}"
        )));
    }
    if !ell_bits.is_multiple_of(8) || ell_bits == 0 {
        return Err(BigKeyError::BadParams(format!(
            "ell must be a positive multiple of 8, got {ell_bits}"
        )));
    }
    if ell_bits < lambda as usize {
        return Err(BigKeyError::BadParams(format!(
            "ell ({ell_bits}) must be at least lambda ({lambda})"
        )));
    }
    Ok(())
}

/// One payload-mask bit: lsb of the first digest byte of SHA-256(nonce || sk).
pub(crate) fn mask_bit(nonce: &[u8], sk: &[u8]) -> u8 {
    let mut h = Sha256::new();
    h.update(nonce);
    h.update(sk);
    h.finalize()[0] & 1
}

/// A secret key of exactly ℓ uniformly random bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigKey {
    key_id: u64,
    lambda: u32,
    sk: Arc<Vec<u8>>,
}

impl BigKey {
    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn len_bits(&self) -> usize {
        self.sk.len() * 8
    }

    pub(crate) fn sk_bytes(&self) -> &[u8] {
        &self.sk
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.sk.len());
        out.extend_from_slice(&self.key_id.to_be_bytes());
        out.extend_from_slice(&self.sk);
        out
    }

    pub fn from_bytes(bytes: &[u8], lambda: u32, ell_bits: usize) -> Result<Self, BigKeyError> {
        check_params(lambda, ell_bits)?;
        if bytes.len() != 8 + ell_bits / 8 {
            return Err(BigKeyError::Malformed);
        }
        let key_id = u64::from_be_bytes(bytes[..8].try_into().unwrap());
        Ok(Self {
            key_id,
            lambda,
            sk: Arc::new(bytes[8..].to_vec()),
        })
    }

    /// Rebuild the matching encryption capability.
    pub fn handle(&self) -> EncHandle {
        EncHandle {
            key_id: self.key_id,
            lambda: self.lambda,
            sk: Arc::clone(&self.sk),
        }
    }
}

/// Encryption capability for one key. Holders can encrypt but have no
/// accessor for the key bits; the serialized form is the 8-byte key id alone.
#[derive(Debug, Clone)]
pub struct EncHandle {
    key_id: u64,
    lambda: u32,
    sk: Arc<Vec<u8>>,
}

impl EncHandle {
    pub fn key_id(&self) -> u64 {
        self.key_id
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn to_bytes(&self) -> [u8; 8] {
        self.key_id.to_be_bytes()
    }

    /// Re-attach a serialized handle to the key table that serves it.
    pub fn resolve(bytes: &[u8], keys: &[BigKey]) -> Result<EncHandle, BigKeyError> {
        if bytes.len() != 8 {
            return Err(BigKeyError::Malformed);
        }
        let key_id = u64::from_be_bytes(bytes.try_into().unwrap());
        keys.iter()
            .find(|k| k.key_id == key_id)
            .map(BigKey::handle)
            .ok_or(BigKeyError::UnresolvableHandle(key_id))
    }
}

/// Ciphertext for a single bit: λ-bit nonce plus one payload bit. Size is
/// independent of ℓ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ciphertext {
    nonce: [u8; 16],
    nonce_len: u8,
    payload: u8,
}

impl Ciphertext {
    pub fn nonce(&self) -> &[u8] {
        &self.nonce[..self.nonce_len as usize]
    }

    pub fn payload(&self) -> u8 {
        self.payload
    }

    pub fn serialized_len(&self) -> usize {
        self.nonce_len as usize + 1
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(self.nonce());
        out.push(self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8], lambda: u32) -> Result<Self, BigKeyError> {
        let nl = (lambda / 8) as usize;
        if lambda == 0 || !lambda.is_multiple_of(8) || lambda > MAX_LAMBDA || bytes.len() != nl + 1 {
            return Err(BigKeyError::Malformed);
        }
        let payload = bytes[nl];
        if payload > 1 {
            return Err(BigKeyError::Malformed);
        }
        let mut nonce = [0u8; 16];
        nonce[..nl].copy_from_slice(&bytes[..nl]);
        Ok(Self {
            nonce,
            nonce_len: nl as u8,
            payload,
        })
    }
}

/// Sample a fresh key of exactly `ell_bits` uniform bits together with its
/// encryption capability.
pub fn keygen(
    lambda: u32,
    ell_bits: usize,
    rng: &mut impl RngCore,
) -> Result<(EncHandle, BigKey), BigKeyError> {
    check_params(lambda, ell_bits)?;
    let key_id = rng.next_u64();
    let mut sk = vec![0u8; ell_bits / 8];
    rng.fill_bytes(&mut sk);
    let key = BigKey {
        key_id,
        lambda,
        sk: Arc::new(sk),
    };
    let handle = key.handle();
    Ok((handle, key))
}

/// Encrypt one bit under the handle's key with a fresh uniform nonce.
pub fn enc(handle: &EncHandle, m: u8, rng: &mut impl RngCore) -> Ciphertext {
    let nl = (handle.lambda / 8) as usize;
    let mut nonce = [0u8; 16];
    rng.fill_bytes(&mut nonce[..nl]);
    enc_with_nonce(handle, m, nonce, nl)
}

/// Shared tail of `enc` for callers that draw nonce bytes in bulk. The nonce
/// must come from the same uniform stream `enc` would have consumed.
pub(crate) fn enc_with_nonce(handle: &EncHandle, m: u8, nonce: [u8; 16], nl: usize) -> Ciphertext {
    debug_assert!(m <= 1);
    let payload = (m & 1) ^ mask_bit(&nonce[..nl], &handle.sk);
    Ciphertext {
        nonce,
        nonce_len: nl as u8,
        payload,
    }
}

/// Decrypt. Under the matching key this returns the encrypted bit; under any
/// other key it returns an unrelated bit rather than an error.
pub fn dec(sk: &BigKey, ct: &Ciphertext) -> u8 {
    ct.payload ^ mask_bit(ct.nonce(), &sk.sk)
}

/// How the retained positions of a partial key are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetainPolicy {
    Prefix,
    RandomSubset,
}

/// How missing key bits are filled in before a decryption attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    Zeros,
    Random,
}

/// A leaked fraction of a key: ⌊ρ·ℓ⌋ bits at recorded positions, the rest
/// erased.
#[derive(Debug, Clone)]
pub struct PartialKey {
    lambda: u32,
    policy: RetainPolicy,
    /// Known key bits; erased positions are zero.
    bits: Vec<u8>,
    /// Bit i of `known` marks whether key bit i was retained.
    known: Vec<u8>,
}

impl PartialKey {
    pub fn policy(&self) -> RetainPolicy {
        self.policy
    }

    pub fn stored_bits(&self) -> usize {
        self.known.iter().map(|b| b.count_ones() as usize).sum()
    }
}

/// Retain a ⌊ρ·ℓ⌋-bit fraction of `sk` and erase the rest.
pub fn partial_key(
    sk: &BigKey,
    rho: f64,
    policy: RetainPolicy,
    rng: &mut impl RngCore,
) -> PartialKey {
    assert!((0.0..=1.0).contains(&rho), "retained fraction must be in [0, 1]");
    let ell = sk.len_bits();
    let keep = (rho * ell as f64).floor() as usize;
    let nbytes = sk.sk.len();
    let mut bits = vec![0u8; nbytes];
    let mut known = vec![0u8; nbytes];

    let positions: Vec<usize> = match policy {
        RetainPolicy::Prefix => (0..keep).collect(),
        RetainPolicy::RandomSubset => {
            // partial Fisher-Yates over bit positions
            let mut idx: Vec<usize> = (0..ell).collect();
            for i in 0..keep {
                let j = i + (rng.next_u64() as usize) % (ell - i);
                idx.swap(i, j);
            }
            idx.truncate(keep);
            idx
        }
    };
    for pos in positions {
        let byte = pos / 8;
        let bit = 7 - (pos % 8); // bit 0 of the key is the MSB of byte 0
        known[byte] |= 1 << bit;
        bits[byte] |= sk.sk[byte] & (1 << bit);
    }
    PartialKey {
        lambda: sk.lambda,
        policy,
        bits,
        known,
    }
}

/// Fill the erased positions per `fill`, hash, and output the resulting
/// guess bit.
pub fn dec_attempt(
    partial: &PartialKey,
    ct: &Ciphertext,
    fill: FillPolicy,
    rng: &mut impl RngCore,
) -> u8 {
    debug_assert_eq!(partial.lambda as usize / 8, ct.nonce().len());
    let mut filled = partial.bits.clone();
    match fill {
        FillPolicy::Zeros => {}
        FillPolicy::Random => {
            let mut noise = vec![0u8; filled.len()];
            rng.fill_bytes(&mut noise);
            for ((f, &k), &r) in filled.iter_mut().zip(&partial.known).zip(&noise) {
                *f |= r & !k;
            }
        }
    }
    ct.payload ^ mask_bit(ct.nonce(), &filled)
}
