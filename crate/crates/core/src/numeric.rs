//! Exact decimal-place analysis and the IEEE-754 bit operations it relies on.
//!
//! The central routine is [`dp_ds_calculate`], which finds the number of
//! fractional decimal digits (`alpha`) and significant decimal digits (`beta`)
//! of a float without going through a string. It enumerates decimal scales and
//! stops at the first scale whose rounding residual is within one relative
//! unit in the last place of the scaled product; scales below the true decimal
//! place always leave a residual above that bound as long as `beta` stays
//! within the precision's safe range.

use std::fmt;
use std::ops::{Div, Mul, Sub};

use crate::error::{Error, Result};

/// Floating-point width handled by the codec.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Double,
    Single,
}

impl Precision {
    /// Largest decimal place for which `10^alpha` is exact.
    pub const fn max_alpha(self) -> u8 {
        match self {
            Precision::Double => 22,
            Precision::Single => 10,
        }
    }

    /// Largest decimal significand for which decimal scaling is exact.
    pub const fn max_beta(self) -> u8 {
        match self {
            Precision::Double => 15,
            Precision::Single => 6,
        }
    }

    /// `(alpha, beta)` pair marking an exception.
    pub const fn sentinel(self) -> (u8, u8) {
        (self.max_alpha() + 1, self.max_beta() + 1)
    }

    pub const fn lane_bits(self) -> u32 {
        match self {
            Precision::Double => 64,
            Precision::Single => 32,
        }
    }

    pub const fn value_bytes(self) -> usize {
        match self {
            Precision::Double => 8,
            Precision::Single => 4,
        }
    }

    /// On-disk precision code.
    pub const fn code(self) -> u8 {
        match self {
            Precision::Double => 0,
            Precision::Single => 1,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Precision::Double),
            1 => Some(Precision::Single),
            _ => None,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::Single => "single",
        })
    }
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for f32 {}
}

/// IEEE-754 binary floating-point type supported by the codec (`f64` or `f32`).
///
/// Bit patterns travel through the codec as `u64` "lanes"; for `f32` only the
/// low 32 bits are used.
pub trait Float:
    sealed::Sealed
    + Copy
    + Default
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Mul<Output = Self>
    + Sub<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    const PRECISION: Precision;
    const MANTISSA_BITS: u32;
    const EXPONENT_BITS: u32;
    const BIAS: i32;
    const ZERO: Self;
    /// `2^-MANTISSA_BITS`, the relative weight of the last mantissa bit.
    const LAST_PLACE: Self;

    fn to_lane(self) -> u64;
    fn from_lane(bits: u64) -> Self;
    /// Exact power of ten from the precomputed table.
    ///
    /// Panics if `exp` exceeds [`Precision::max_alpha`].
    fn pow10(exp: u32) -> Self;
    fn abs(self) -> Self;
    /// Round half away from zero.
    fn round(self) -> Self;
    fn to_f64(self) -> f64;
    /// Saturating conversion toward zero.
    fn to_i64(self) -> i64;
    fn from_i64(g: i64) -> Self;
    fn is_finite(self) -> bool;
    fn is_subnormal(self) -> bool;
    fn is_sign_negative(self) -> bool;
    /// Read one value from little-endian bytes (`bytes.len() == value_bytes`).
    fn from_le_slice(bytes: &[u8]) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
}

const POW10_F64: [f64; 23] = [
    1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12, 1e13, 1e14, 1e15, 1e16,
    1e17, 1e18, 1e19, 1e20, 1e21, 1e22,
];

const POW10_F32: [f32; 11] = [1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10];

macro_rules! impl_float {
    ($t:ty, $bits:ty, $prec:expr, $mant:expr, $exp:expr, $bias:expr, $table:ident, $bytes:expr) => {
        impl Float for $t {
            const PRECISION: Precision = $prec;
            const MANTISSA_BITS: u32 = $mant;
            const EXPONENT_BITS: u32 = $exp;
            const BIAS: i32 = $bias;
            const ZERO: Self = 0.0;
            const LAST_PLACE: Self = 1.0 / ((1u64 << $mant) as $t);

            #[inline]
            fn to_lane(self) -> u64 {
                self.to_bits() as u64
            }

            #[inline]
            fn from_lane(bits: u64) -> Self {
                <$t>::from_bits(bits as $bits)
            }

            #[inline]
            fn pow10(exp: u32) -> Self {
                $table[exp as usize]
            }

            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }

            #[inline]
            fn round(self) -> Self {
                <$t>::round(self)
            }

            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }

            #[inline]
            fn to_i64(self) -> i64 {
                self as i64
            }

            #[inline]
            fn from_i64(g: i64) -> Self {
                g as $t
            }

            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }

            #[inline]
            fn is_subnormal(self) -> bool {
                <$t>::is_subnormal(self)
            }

            #[inline]
            fn is_sign_negative(self) -> bool {
                <$t>::is_sign_negative(self)
            }

            #[inline]
            fn from_le_slice(bytes: &[u8]) -> Self {
                let mut raw = [0u8; $bytes];
                raw.copy_from_slice(bytes);
                <$t>::from_le_bytes(raw)
            }

            #[inline]
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
        }
    };
}

impl_float!(f64, u64, Precision::Double, 52, 11, 1023, POW10_F64, 8);
impl_float!(f32, u32, Precision::Single, 23, 8, 127, POW10_F32, 4);

/// Reinterpret the bits of `v` as an unsigned integer (zero-extended for `f32`).
#[inline]
pub fn bits_as_integer<F: Float>(v: F) -> u64 {
    v.to_lane()
}

/// Inverse of [`bits_as_integer`]. Upper bits beyond the lane width are ignored.
#[inline]
pub fn integer_as_bits<F: Float>(u: u64) -> F {
    F::from_lane(u)
}

/// Sign, biased exponent and stored mantissa of an IEEE-754 value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FloatBits {
    pub sign: bool,
    pub exponent: u32,
    pub mantissa: u64,
}

impl FloatBits {
    pub fn of<F: Float>(v: F) -> Self {
        let bits = v.to_lane();
        let mant_mask = (1u64 << F::MANTISSA_BITS) - 1;
        let exp_mask = (1u64 << F::EXPONENT_BITS) - 1;
        FloatBits {
            sign: (bits >> (F::MANTISSA_BITS + F::EXPONENT_BITS)) & 1 == 1,
            exponent: ((bits >> F::MANTISSA_BITS) & exp_mask) as u32,
            mantissa: bits & mant_mask,
        }
    }

    pub fn to_float<F: Float>(self) -> F {
        let bits = ((self.sign as u64) << (F::MANTISSA_BITS + F::EXPONENT_BITS))
            | ((self.exponent as u64) << F::MANTISSA_BITS)
            | self.mantissa;
        F::from_lane(bits)
    }

    /// `(-1)^s * 2^(e - bias) * (1 + m * 2^-mantissa_bits)`, valid for normal numbers.
    pub fn normal_value<F: Float>(self) -> f64 {
        let scale = 2f64.powi(self.exponent as i32 - F::BIAS);
        let frac = 1.0 + self.mantissa as f64 / (1u64 << F::MANTISSA_BITS) as f64;
        let mag = scale * frac;
        if self.sign {
            -mag
        } else {
            mag
        }
    }
}

/// Unit in the last place: `2^floor(log2|v|) * 2^-mantissa_bits`.
pub fn ulp<F: Float>(v: F) -> Result<F> {
    if !v.is_finite() {
        return Err(Error::UndefinedUlp("non-finite values"));
    }
    if v == F::ZERO {
        return Err(Error::UndefinedUlp("zero"));
    }
    if v.is_subnormal() {
        return Err(Error::UndefinedUlp("subnormal values"));
    }
    let e = FloatBits::of(v).exponent;
    let bits = if e > F::MANTISSA_BITS {
        ((e - F::MANTISSA_BITS) as u64) << F::MANTISSA_BITS
    } else {
        // 2^(e - bias - mantissa_bits) falls into the subnormal range
        1u64 << (e - 1)
    };
    Ok(F::from_lane(bits))
}

/// Split a finite positive `f64` into `m * 2^q` with integer `m`.
fn split_f64(x: f64) -> (u64, i32) {
    let fb = FloatBits::of(x);
    if fb.exponent == 0 {
        (fb.mantissa, -1074)
    } else {
        (fb.mantissa | (1 << 52), fb.exponent as i32 - 1075)
    }
}

/// `floor(log2 |x|)` via exponent-field extraction. `x` must be finite and nonzero.
pub fn floor_log2(x: f64) -> i32 {
    let (m, q) = split_f64(x.abs());
    63 - m.leading_zeros() as i32 + q
}

const EXACT_LOG10_RANGE: i32 = 30;

/// Exact test `m * 2^q >= 10^k` for `|k| <= 30` and `m < 2^53`.
fn ge_pow10(m: u64, q: i32, k: i32) -> bool {
    let m = m as u128;
    if k >= 0 {
        let p = 5u128.pow(k as u32);
        let t = q - k;
        if t >= 0 {
            t >= 70 || (m << t) >= p
        } else {
            let s = (-t) as u32;
            p.leading_zeros() > s && m >= (p << s)
        }
    } else {
        let j = -k;
        let mm = m * 5u128.pow(j as u32);
        let s = q + j;
        if s >= 0 {
            true
        } else {
            let r = (-s) as u32;
            r < 128 && mm >= (1u128 << r)
        }
    }
}

/// `floor(log10 |x|)` for finite nonzero `x`.
///
/// Exact (integer arithmetic, no transcendental calls) whenever the result
/// lies in `[-30, 30]`; outside that band the estimate may be off by one,
/// which never matters to the codec because such magnitudes are exceptions.
pub fn floor_log10(x: f64) -> i32 {
    let (m, q) = split_f64(x.abs());
    let log2 = 63 - m.leading_zeros() as i32 + q;
    let mut k = (log2 as f64 * std::f64::consts::LOG10_2).floor() as i32;
    if !(-EXACT_LOG10_RANGE..=EXACT_LOG10_RANGE).contains(&k) {
        return k;
    }
    while k > -EXACT_LOG10_RANGE && !ge_pow10(m, q, k) {
        k -= 1;
    }
    while k < EXACT_LOG10_RANGE && ge_pow10(m, q, k + 1) {
        k += 1;
    }
    k
}

/// Number of decimal digits in `n` (0 for `n == 0`).
pub fn decimal_digits(n: u64) -> u8 {
    let mut digits = 0;
    let mut rest = n;
    while rest > 0 {
        digits += 1;
        rest /= 10;
    }
    digits
}

/// Decimal place / decimal significand of a single value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DecimalMeta {
    pub alpha: u8,
    pub beta: u8,
    pub is_exception: bool,
}

impl DecimalMeta {
    pub const ZERO: DecimalMeta = DecimalMeta {
        alpha: 0,
        beta: 0,
        is_exception: false,
    };

    pub const fn exception(precision: Precision) -> Self {
        let (alpha, beta) = precision.sentinel();
        DecimalMeta {
            alpha,
            beta,
            is_exception: true,
        }
    }

    const fn new(alpha: u8, beta: u8) -> Self {
        DecimalMeta {
            alpha,
            beta,
            is_exception: false,
        }
    }
}

/// Rounding residual `|v*10^i - round(v*10^i)|` and the bound `|v*10^i| * 2^-mantissa_bits`.
#[inline]
pub fn scaled_residual<F: Float>(v: F, i: u32) -> (F, F) {
    let x = v * F::pow10(i);
    let eps = (x - x.round()).abs();
    let mu = x.abs() * F::LAST_PLACE;
    (eps, mu)
}

/// Decimal place and significand of `v`, or the exception sentinel.
pub fn dp_ds_calculate<F: Float>(v: F) -> DecimalMeta {
    dp_ds_with_iterations(v).0
}

/// [`dp_ds_calculate`] that also reports how many scales were tested.
pub fn dp_ds_with_iterations<F: Float>(v: F) -> (DecimalMeta, u32) {
    let prec = F::PRECISION;
    if v == F::ZERO {
        if v.is_sign_negative() {
            // -0.0 would decode as +0.0 through decimal scaling
            return (DecimalMeta::exception(prec), 0);
        }
        return (DecimalMeta::ZERO, 0);
    }
    if !v.is_finite() || v.is_subnormal() {
        return (DecimalMeta::exception(prec), 0);
    }

    let max_alpha = prec.max_alpha() as i32;
    let max_beta = prec.max_beta() as i32;
    let mag = v.abs();
    let exp10 = floor_log10(mag.to_f64());

    // A nonzero value needs alpha >= -floor(log10|v|) - 1 before its scaled
    // form can reach an integer, so smaller scales are skipped.
    let mut alpha = (-exp10 - 1).max(0);
    let mut beta = alpha + exp10 + 1;
    let mut iterations = 0;
    while beta <= max_beta && alpha <= max_alpha {
        iterations += 1;
        let x = mag * F::pow10(alpha as u32);
        let g = x.round();
        if (x - g).abs() <= x * F::LAST_PLACE {
            if g / F::pow10(alpha as u32) != mag {
                return (DecimalMeta::exception(prec), iterations);
            }
            let digits = decimal_digits(g.to_i64() as u64);
            if digits as i32 > max_beta {
                return (DecimalMeta::exception(prec), iterations);
            }
            return (DecimalMeta::new(alpha as u8, digits), iterations);
        }
        alpha += 1;
        beta += 1;
    }
    (DecimalMeta::exception(prec), iterations)
}

fn check_scale<F: Float>(a: u32) -> Result<()> {
    let limit = F::PRECISION.max_alpha();
    if a > limit as u32 {
        return Err(Error::InvalidScale {
            scale: a,
            limit,
            precision: F::PRECISION,
        });
    }
    Ok(())
}

/// `round(v * 10^a)` with round-half-away-from-zero on the floating product.
pub fn decimal_round_scale<F: Float>(v: F, a: u32) -> Result<i64> {
    check_scale::<F>(a)?;
    let g = (v * F::pow10(a)).round();
    let limit = 9_223_372_036_854_775_808.0_f64; // 2^63
    let g64 = g.to_f64();
    if g64.is_nan() || g64.abs() >= limit {
        return Err(Error::ScaleOverflow);
    }
    Ok(g.to_i64())
}

/// `g / 10^a` as a single floating division.
///
/// `a` must not exceed [`Precision::max_alpha`].
#[inline]
pub fn inverse_scale<F: Float>(g: i64, a: u32) -> F {
    F::from_i64(g) / F::pow10(a)
}
