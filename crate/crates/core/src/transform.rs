//! Chunk-level digit transformation.
//!
//! A chunk is either decimally scaled to integers (when every value has a
//! small enough decimal place and significand) or reinterpreted bitwise and
//! zigzagged. Either way the integer sequence is then delta-coded and
//! zigzagged so that neighbouring values produce small unsigned integers.
//! All arithmetic wraps at the lane width (64 bits for `f64`, 32 for `f32`).

use crate::error::{Error, Result};
use crate::numeric::{decimal_digits, dp_ds_calculate, floor_log10, Float, Precision};

/// Values per chunk unless configured otherwise.
pub const DEFAULT_CHUNK_N: usize = 1025;

#[inline]
pub fn zigzag(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

#[inline]
pub fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

#[inline]
pub fn zigzag32(x: i32) -> u32 {
    ((x << 1) ^ (x >> 31)) as u32
}

#[inline]
pub fn unzigzag32(u: u32) -> i32 {
    ((u >> 1) as i32) ^ -((u & 1) as i32)
}

#[inline]
fn lane_mask<F: Float>() -> u64 {
    u64::MAX >> (64 - F::PRECISION.lane_bits())
}

#[inline]
fn lane_zigzag<F: Float>(x: u64) -> u64 {
    match F::PRECISION {
        Precision::Double => zigzag(x as i64),
        Precision::Single => zigzag32(x as u32 as i32) as u64,
    }
}

#[inline]
fn lane_unzigzag<F: Float>(x: u64) -> u64 {
    match F::PRECISION {
        Precision::Double => unzigzag(x) as u64,
        Precision::Single => unzigzag32(x as u32) as u32 as u64,
    }
}

#[inline]
fn lane_to_signed<F: Float>(x: u64) -> i64 {
    match F::PRECISION {
        Precision::Double => x as i64,
        Precision::Single => x as u32 as i32 as i64,
    }
}

/// Check that `n` values per chunk give byte-aligned bit-plane rows and
/// whole sparse-bitmap bytes, i.e. `n = 64k + 1` for some `k >= 1`.
pub fn validate_chunk_n(n: usize) -> Result<()> {
    if n < 65 || (n - 1) % 64 != 0 {
        return Err(Error::InvalidConfig(format!(
            "chunk size {n} is not of the form 64k + 1"
        )));
    }
    Ok(())
}

/// How a chunk's values are mapped to integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformCase {
    /// `round(v * 10^alpha_max)`.
    Decimal,
    /// Zigzag of the raw IEEE-754 bits.
    Bitwise,
}

/// The two header bytes that select the transform of a chunk.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChunkHeaderMeta {
    pub alpha_max: u8,
    pub beta_hat_max: u8,
}

impl ChunkHeaderMeta {
    pub const fn bitwise(precision: Precision) -> Self {
        let (alpha_max, beta_hat_max) = precision.sentinel();
        ChunkHeaderMeta {
            alpha_max,
            beta_hat_max,
        }
    }

    pub fn case(self, precision: Precision) -> TransformCase {
        if self.alpha_max > precision.max_alpha() || self.beta_hat_max > precision.max_beta() {
            TransformCase::Bitwise
        } else {
            TransformCase::Decimal
        }
    }

    /// Like [`case`](Self::case) but rejects out-of-range bytes that are not the sentinel.
    pub fn validate(self, precision: Precision) -> Result<TransformCase> {
        match self.case(precision) {
            TransformCase::Bitwise if self != Self::bitwise(precision) => {
                Err(Error::MalformedHeader {
                    alpha: self.alpha_max,
                    beta_hat: self.beta_hat_max,
                })
            }
            case => Ok(case),
        }
    }
}

/// Decide the chunk transform from per-value decimal analysis.
pub fn analyze_chunk<F: Float>(values: &[F]) -> ChunkHeaderMeta {
    let prec = F::PRECISION;
    let mut alpha_max = 0u8;
    let mut v_max = F::ZERO;
    for &v in values {
        let meta = dp_ds_calculate(v);
        if meta.is_exception {
            return ChunkHeaderMeta::bitwise(prec);
        }
        alpha_max = alpha_max.max(meta.alpha);
        let mag = v.abs();
        if mag > v_max {
            v_max = mag;
        }
    }
    if v_max == F::ZERO {
        return ChunkHeaderMeta {
            alpha_max,
            beta_hat_max: 0,
        };
    }
    // beta_hat = alpha_max + floor(log10 v_max) + 1, taken on the decimal
    // form of v_max: the digit count of its exactly scaled integer.
    let max_beta = prec.max_beta() as i32;
    if alpha_max as i32 + floor_log10(v_max.to_f64()) + 1 > max_beta + 1 {
        return ChunkHeaderMeta::bitwise(prec);
    }
    let scaled = (v_max * F::pow10(alpha_max as u32)).round();
    let beta_hat_max = decimal_digits(scaled.to_i64() as u64);
    if beta_hat_max as i32 > max_beta {
        return ChunkHeaderMeta::bitwise(prec);
    }
    ChunkHeaderMeta {
        alpha_max,
        beta_hat_max,
    }
}

/// Map values to the integer vector `z` (appended to `out`).
pub fn forward_transform_into<F: Float>(values: &[F], header: ChunkHeaderMeta, out: &mut Vec<u64>) {
    let mask = lane_mask::<F>();
    let case = header.case(F::PRECISION);
    let scale = match case {
        TransformCase::Decimal => F::pow10(header.alpha_max as u32),
        TransformCase::Bitwise => F::ZERO,
    };
    let to_lane = |v: F| -> u64 {
        match case {
            TransformCase::Decimal => ((v * scale).round().to_i64() as u64) & mask,
            TransformCase::Bitwise => lane_zigzag::<F>(v.to_lane()),
        }
    };
    out.reserve(values.len());
    let mut prev = 0u64;
    for (i, &v) in values.iter().enumerate() {
        let g = to_lane(v);
        if i == 0 {
            out.push(g);
        } else {
            out.push(lane_zigzag::<F>(g.wrapping_sub(prev) & mask));
        }
        prev = g;
    }
}

pub fn forward_transform<F: Float>(values: &[F], header: ChunkHeaderMeta) -> Vec<u64> {
    let mut out = Vec::with_capacity(values.len());
    forward_transform_into(values, header, &mut out);
    out
}

/// Invert [`forward_transform`] for the first `out.len()` values.
pub fn inverse_transform_into<F: Float>(
    z: &[u64],
    header: ChunkHeaderMeta,
    out: &mut [F],
) -> Result<()> {
    let case = header.validate(F::PRECISION)?;
    if out.len() > z.len() {
        return Err(Error::corrupt_chunk(format!(
            "{} values requested from a chunk of {}",
            out.len(),
            z.len()
        )));
    }
    let mask = lane_mask::<F>();
    let alpha = header.alpha_max as u32;
    let mut g = 0u64;
    for (i, slot) in out.iter_mut().enumerate() {
        g = if i == 0 {
            z[0] & mask
        } else {
            g.wrapping_add(lane_unzigzag::<F>(z[i])) & mask
        };
        *slot = match case {
            TransformCase::Decimal => F::from_i64(lane_to_signed::<F>(g)) / F::pow10(alpha),
            TransformCase::Bitwise => F::from_lane(lane_unzigzag::<F>(g)),
        };
    }
    Ok(())
}

pub fn inverse_transform<F: Float>(
    z: &[u64],
    header: ChunkHeaderMeta,
    count: usize,
) -> Result<Vec<F>> {
    let mut out = vec![F::ZERO; count];
    inverse_transform_into(z, header, &mut out)?;
    Ok(out)
}
