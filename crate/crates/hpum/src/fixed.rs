//! Fixed-point encoding shared by every compute path.
//!
//! All values in the simulator are integer-coded: digital pipelines operate on
//! two's-complement bit patterns and analog arrays store integer conductance
//! levels. Fractional quantities are represented by a binary scale factor
//! (`frac_bits`).

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointSpec {
    pub total_bits: u8,
    pub signed: bool,
    pub frac_bits: u8,
}

impl FixedPointSpec {
    pub fn new(total_bits: u8, signed: bool, frac_bits: u8) -> Self {
        assert!((1..=64).contains(&total_bits));
        assert!(frac_bits <= total_bits);
        Self {
            total_bits,
            signed,
            frac_bits,
        }
    }

    pub fn unsigned(total_bits: u8) -> Self {
        Self::new(total_bits, false, 0)
    }

    pub fn signed(total_bits: u8) -> Self {
        Self::new(total_bits, true, 0)
    }

    /// Smallest representable scaled integer.
    pub fn min_int(&self) -> i64 {
        if self.signed {
            -(1i64 << (self.total_bits - 1))
        } else {
            0
        }
    }

    /// Largest representable scaled integer.
    pub fn max_int(&self) -> i64 {
        if self.signed {
            (1i64 << (self.total_bits - 1)) - 1
        } else if self.total_bits == 64 {
            u64::MAX as i64 // caller works in u64 space for 64-bit unsigned
        } else {
            (1i64 << self.total_bits) - 1
        }
    }

    fn mask(&self) -> u64 {
        if self.total_bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.total_bits) - 1
        }
    }
}

/// Encode a real value as a two's-complement bit pattern under `spec`.
pub fn encode_fixed(value: f64, spec: &FixedPointSpec) -> Result<u64> {
    let scaled = value * (1u64 << spec.frac_bits) as f64;
    let int = scaled.round();
    if int < spec.min_int() as f64 || int > spec.max_int() as f64 {
        return Err(SimError::Overflow {
            value,
            bits: spec.total_bits,
            signed: spec.signed,
        });
    }
    Ok((int as i64 as u64) & spec.mask())
}

/// Encode an already-scaled integer (no rounding).
pub fn encode_int(value: i64, spec: &FixedPointSpec) -> Result<u64> {
    if value < spec.min_int() || value > spec.max_int() {
        return Err(SimError::Overflow {
            value: value as f64,
            bits: spec.total_bits,
            signed: spec.signed,
        });
    }
    Ok((value as u64) & spec.mask())
}

/// Decode a bit pattern back to the scaled integer it represents.
pub fn decode_int(pattern: u64, spec: &FixedPointSpec) -> i64 {
    let p = pattern & spec.mask();
    if spec.signed && spec.total_bits < 64 && (p >> (spec.total_bits - 1)) & 1 == 1 {
        (p as i64) - (1i64 << spec.total_bits)
    } else {
        p as i64
    }
}

/// Decode a bit pattern to a real value.
pub fn decode_fixed(pattern: u64, spec: &FixedPointSpec) -> f64 {
    decode_int(pattern, spec) as f64 / (1u64 << spec.frac_bits) as f64
}
