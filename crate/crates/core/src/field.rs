//! GF(2^λ) arithmetic, polynomial evaluation/interpolation and the
//! state-to-field-element encoding used by the secret-sharing augmentation.
//!
//! Elements are bit strings of length λ interpreted as polynomials over GF(2)
//! modulo a fixed irreducible reduction polynomial. Two field sizes are
//! instantiated: the production field GF(2^128) with X^128 + X^7 + X^2 + X + 1
//! and a GF(2^8) field (X^8 + X^4 + X^3 + X + 1) small enough for exhaustive
//! cross-checks. Addition is XOR, so every element is its own additive
//! inverse.

use rand_chacha::rand_core::RngCore;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("duplicate abscissa in interpolation input")]
    DuplicateAbscissa,
    #[error("interpolation expects exactly {expected} points, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("state decoding failed: {0}")]
    PaddingCorrupt(&'static str),
}

/// Reduction polynomial for X^λ, low bits only.
const fn reduction_poly(lambda: u32) -> u128 {
    match lambda {
        8 => 0x1B,   // X^8 + X^4 + X^3 + X + 1
        128 => 0x87, // X^128 + X^7 + X^2 + X + 1
        _ => panic!("unsupported field size"),
    }
}

const fn bit_mask(lambda: u32) -> u128 {
    if lambda == 128 {
        u128::MAX
    } else {
        (1u128 << lambda) - 1
    }
}

/// An element of GF(2^L).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElem<const L: u32>(u128);

/// The production field.
pub type F128 = FieldElem<128>;

/// Test field small enough for exhaustive checks.
pub type F8 = FieldElem<8>;

impl<const L: u32> FieldElem<L> {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);

    const MASK: u128 = bit_mask(L);
    const POLY: u128 = reduction_poly(L);

    /// Number of bytes in the canonical encoding.
    pub const BYTES: usize = (L / 8) as usize;

    pub fn new(bits: u128) -> Self {
        debug_assert!(bits & !Self::MASK == 0, "value exceeds field width");
        Self(bits & Self::MASK)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn random(rng: &mut impl RngCore) -> Self {
        let mut buf = [0u8; 16];
        rng.fill_bytes(&mut buf[..Self::BYTES]);
        Self(u128::from_le_bytes(buf) & Self::MASK)
    }

    /// Multiplicative inverse via a^(2^λ - 2).
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        // exponent 2^λ - 2 is λ-1 ones followed by a zero
        let exp: u128 = Self::MASK - 1;
        let mut r = Self::ONE;
        for i in (0..L).rev() {
            r = r * r;
            if exp >> i & 1 == 1 {
                r *= self;
            }
        }
        Ok(r)
    }

    pub fn to_bytes(self) -> Vec<u8> {
        self.0.to_be_bytes()[16 - Self::BYTES..].to_vec()
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::BYTES {
            return None;
        }
        let mut buf = [0u8; 16];
        buf[16 - Self::BYTES..].copy_from_slice(bytes);
        Some(Self(u128::from_be_bytes(buf)))
    }
}

impl<const L: u32> Add for FieldElem<L> {
    type Output = Self;
    // addition in characteristic 2 is XOR
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Self) -> Self {
        Self(self.0 ^ rhs.0)
    }
}

impl<const L: u32> AddAssign for FieldElem<L> {
    #[allow(clippy::suspicious_op_assign_impl)]
    fn add_assign(&mut self, rhs: Self) {
        self.0 ^= rhs.0;
    }
}

impl<const L: u32> Mul for FieldElem<L> {
    type Output = Self;

    /// Carry-less product reduced on the fly: each doubling of the running
    /// operand folds the overflow bit back in through the reduction
    /// polynomial, so no intermediate ever exceeds λ bits.
    fn mul(self, rhs: Self) -> Self {
        let mut acc: u128 = 0;
        let mut a = self.0;
        let mut b = rhs.0;
        for _ in 0..L {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            let carry = a >> (L - 1) & 1;
            a = (a << 1) & Self::MASK;
            if carry == 1 {
                a ^= Self::POLY;
            }
        }
        Self(acc)
    }
}

impl<const L: u32> MulAssign for FieldElem<L> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const L: u32> fmt::Debug for FieldElem<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldElem<{}>({:#x})", L, self.0)
    }
}

/// Polynomial over GF(2^L) with coefficients in ascending order: `coeffs[i]`
/// holds the coefficient of X^i. Trailing zero coefficients are kept so the
/// declared degree bound survives round-trips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly<const L: u32> {
    coeffs: Vec<FieldElem<L>>,
}

impl<const L: u32> Poly<L> {
    pub fn new(coeffs: Vec<FieldElem<L>>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[FieldElem<L>] {
        &self.coeffs
    }

    /// Declared degree bound t (the polynomial has degree < t).
    pub fn degree_bound(&self) -> usize {
        self.coeffs.len()
    }

    /// Horner evaluation.
    pub fn eval(&self, z: FieldElem<L>) -> FieldElem<L> {
        let mut acc = FieldElem::<L>::ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Lagrange interpolation through exactly `t` points with pairwise
    /// distinct abscissas. Returns the unique polynomial of degree < t.
    pub fn interpolate(
        points: &[(FieldElem<L>, FieldElem<L>)],
        t: usize,
    ) -> Result<Self, FieldError> {
        if points.len() != t {
            return Err(FieldError::ArityMismatch {
                expected: t,
                got: points.len(),
            });
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i].0 == points[j].0 {
                    return Err(FieldError::DuplicateAbscissa);
                }
            }
        }
        if t == 0 {
            return Ok(Self::new(Vec::new()));
        }

        // master polynomial M(X) = prod (X - z_j), ascending coefficients;
        // subtraction is addition in characteristic 2
        let mut master = vec![FieldElem::<L>::ZERO; t + 1];
        master[0] = FieldElem::ONE;
        let mut deg = 0;
        for &(z, _) in points {
            // multiply by (X + z) in place
            deg += 1;
            for k in (1..=deg).rev() {
                let lower = master[k - 1];
                master[k] = master[k] * z + lower;
            }
            master[0] *= z;
        }

        let mut acc = vec![FieldElem::<L>::ZERO; t];
        let mut quotient = vec![FieldElem::<L>::ZERO; t];
        for &(z, gamma) in points {
            // synthetic division: Q = M / (X + z), exact since M(z) = 0
            let mut carry = master[t];
            for k in (0..t).rev() {
                quotient[k] = carry;
                carry = master[k] + carry * z;
            }
            debug_assert!(carry.is_zero());

            // denominator Q(z) = prod_{j != i} (z_i - z_j)
            let mut denom = FieldElem::<L>::ZERO;
            for &q in quotient.iter().rev() {
                denom = denom * z + q;
            }
            let scale = gamma * denom.inv()?;
            for (a, &q) in acc.iter_mut().zip(quotient.iter()) {
                *a += q * scale;
            }
        }
        Ok(Self::new(acc))
    }
}

/// Elements occupied by the 64-bit length prefix.
const fn prefix_elems(lambda: u32) -> usize {
    (64usize).div_ceil(lambda as usize)
}

/// Chunk a byte string into λ-bit field elements, preceded by its bit length
/// as a 64-bit big-endian prefix padded to whole elements. The final data
/// chunk is zero-padded on the right. `decode_state` is the exact inverse.
pub fn encode_state<const L: u32>(bytes: &[u8]) -> Vec<FieldElem<L>> {
    let elem_bytes = FieldElem::<L>::BYTES;
    let bit_len = (bytes.len() as u64) * 8;
    let mut out = Vec::with_capacity(prefix_elems(L) + bytes.len().div_ceil(elem_bytes));

    let prefix = bit_len.to_be_bytes();
    for chunk in prefix.chunks(elem_bytes.min(8)) {
        if elem_bytes >= 8 {
            // prefix fits a single wide element, value in the low 64 bits
            out.push(FieldElem::new(bit_len as u128));
            break;
        }
        let mut v = 0u128;
        for &b in chunk {
            v = v << 8 | b as u128;
        }
        out.push(FieldElem::new(v));
    }

    for chunk in bytes.chunks(elem_bytes) {
        let mut v = 0u128;
        for &b in chunk {
            v = v << 8 | b as u128;
        }
        v <<= 8 * (elem_bytes - chunk.len());
        out.push(FieldElem::new(v));
    }
    out
}

pub fn decode_state<const L: u32>(elems: &[FieldElem<L>]) -> Result<Vec<u8>, FieldError> {
    let elem_bytes = FieldElem::<L>::BYTES;
    let np = prefix_elems(L);
    if elems.len() < np {
        return Err(FieldError::PaddingCorrupt("missing length prefix"));
    }
    let bit_len = if elem_bytes >= 8 {
        let v = elems[0].bits();
        if v > u64::MAX as u128 {
            return Err(FieldError::PaddingCorrupt("nonzero prefix padding"));
        }
        v as u64
    } else {
        let mut v: u128 = 0;
        for e in &elems[..np] {
            v = v << L | e.bits();
        }
        v as u64
    };
    if bit_len % 8 != 0 {
        return Err(FieldError::PaddingCorrupt("bit length not byte aligned"));
    }
    let nbytes = (bit_len / 8) as usize;
    let data_elems = nbytes.div_ceil(elem_bytes);
    if elems.len() != np + data_elems {
        return Err(FieldError::PaddingCorrupt("element count mismatch"));
    }

    let mut out = Vec::with_capacity(nbytes);
    for (i, e) in elems[np..].iter().enumerate() {
        let raw = e.bits().to_be_bytes();
        let raw = &raw[16 - elem_bytes..];
        let take = (nbytes - i * elem_bytes).min(elem_bytes);
        out.extend_from_slice(&raw[..take]);
        if raw[take..].iter().any(|&b| b != 0) {
            return Err(FieldError::PaddingCorrupt("nonzero tail padding"));
        }
    }
    Ok(out)
}
