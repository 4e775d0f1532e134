//! Slow reference implementations and synthetic data generators.
//!
//! Nothing here shares code with the fast paths beyond the `Float` trait:
//! decimal analysis goes through shortest round-trip formatting and the
//! chunk encoder works bit by bit with 128-bit arithmetic.

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::Float;
use crate::pipeline::ValueSource;
use crate::transform::DEFAULT_CHUNK_N;

/// Shortest round-tripping decimal of `v`, split into
/// (negative, significant digits without trailing zeros, decimal exponent).
fn shortest_decimal<F: Float>(v: F) -> (bool, String, i32) {
    let s = format!("{v:e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let mut digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }
    (negative, digits, exp)
}

/// Decimal place and significand from the shortest decimal string, or
/// `None` when either exceeds the precision's bounds.
pub fn dp_oracle<F: Float>(v: F) -> Option<(u8, u8)> {
    assert!(v.is_finite(), "dp_oracle needs a finite value");
    if v == F::ZERO {
        return Some((0, 0));
    }
    let (_, digits, exp) = shortest_decimal(v);
    let len = digits.len() as i32;
    let alpha = (len - 1 - exp).max(0);
    let beta = alpha + exp + 1;
    let prec = F::PRECISION;
    if alpha > prec.max_alpha() as i32 || beta > prec.max_beta() as i32 {
        return None;
    }
    Some((alpha as u8, beta as u8))
}

fn lane_bits<F: Float>() -> u32 {
    F::PRECISION.lane_bits()
}

fn lane_mod<F: Float>() -> i128 {
    1i128 << lane_bits::<F>()
}

/// Reduce to the lane width as an unsigned value.
fn to_lane<F: Float>(x: i128) -> u128 {
    x.rem_euclid(lane_mod::<F>()) as u128
}

fn zigzag_lane<F: Float>(u: u128) -> u128 {
    // interpret as signed in the lane, then 2x for non-negative, -2x-1 otherwise
    let m = lane_mod::<F>();
    let s = if (u as i128) >= m / 2 {
        u as i128 - m
    } else {
        u as i128
    };
    let z = if s >= 0 { 2 * s } else { -2 * s - 1 };
    z as u128
}

/// Per-chunk header the slow way.
fn naive_header<F: Float>(values: &[F]) -> Option<(u8, u8, Vec<i128>)> {
    let prec = F::PRECISION;
    let mut parsed = Vec::with_capacity(values.len());
    for &v in values {
        if !v.is_finite() || v.is_subnormal() || (v == F::ZERO && v.is_sign_negative()) {
            return None;
        }
        let (alpha, _) = dp_oracle(v)?;
        parsed.push((v, alpha));
    }
    let alpha_max = parsed.iter().map(|p| p.1).max().unwrap_or(0);
    // Exact integer v * 10^alpha_max from the decimal digits.
    let mut ints = Vec::with_capacity(parsed.len());
    let mut largest: i128 = 0;
    for (v, _) in parsed {
        if v == F::ZERO {
            ints.push(0);
            continue;
        }
        let (negative, digits, exp) = shortest_decimal(v);
        let shift = alpha_max as i32 + exp + 1 - digits.len() as i32;
        let mut g: i128 = digits.parse().unwrap();
        if !(0..=40).contains(&shift) {
            return None;
        }
        for _ in 0..shift {
            g *= 10;
        }
        largest = largest.max(g);
        ints.push(if negative { -g } else { g });
    }
    let beta_hat = if largest == 0 {
        0
    } else {
        largest.to_string().len()
    };
    if beta_hat > prec.max_beta() as usize {
        return None;
    }
    Some((alpha_max, beta_hat as u8, ints))
}

/// Reference chunk encoder. Must produce the same bytes as the fast path.
pub fn naive_chunk_codec<F: Float>(values: &[F]) -> Vec<u8> {
    let n = values.len();
    assert!(n > 1 && (n - 1) % 64 == 0, "chunk size must be 64k + 1");
    let (alpha, beta, g): (u8, u8, Vec<u128>) = match naive_header(values) {
        Some((a, b, ints)) => (a, b, ints.into_iter().map(to_lane::<F>).collect()),
        None => {
            let (a, b) = F::PRECISION.sentinel();
            let g = values
                .iter()
                .map(|v| zigzag_lane::<F>(v.to_lane() as u128))
                .collect();
            (a, b, g)
        }
    };
    let mut z = vec![g[0]];
    for i in 1..n {
        let delta = to_lane::<F>(g[i] as i128 - g[i - 1] as i128);
        z.push(zigzag_lane::<F>(delta));
    }

    let mut width = 0u32;
    for &x in &z[1..] {
        let mut bits = 0;
        while bits < 128 && (x >> bits) != 0 {
            bits += 1;
        }
        width = width.max(bits);
    }

    let row_len = (n - 1) / 8;
    let mut rows = Vec::new();
    for r in 0..width {
        let bit = width - 1 - r;
        let mut row = vec![0u8; row_len];
        for j in 0..n - 1 {
            if (z[j + 1] >> bit) & 1 == 1 {
                row[j / 8] |= 1 << (7 - j % 8);
            }
        }
        rows.push(row);
    }

    let mut out = vec![alpha, beta];
    out.extend_from_slice(&(z[0] as u64).to_le_bytes());
    out.push(width as u8);
    if width == 0 {
        return out;
    }
    let flag_len = (width as usize).div_ceil(8);
    let dense: Vec<bool> = rows
        .iter()
        .map(|row| row.iter().filter(|&&b| b == 0).count() <= (n - 1) / 64)
        .collect();
    let mut flags = vec![0u8; flag_len];
    for (r, &d) in dense.iter().enumerate() {
        if d {
            let p = width as usize - 1 - r;
            flags[flag_len - 1 - p / 8] |= 1 << (p % 8);
        }
    }
    out.extend_from_slice(&flags);
    for (row, d) in rows.iter().zip(dense) {
        if d {
            out.extend_from_slice(row);
            continue;
        }
        let mut bitmap = vec![0u8; (n - 1) / 64];
        for (j, &b) in row.iter().enumerate() {
            if b != 0 {
                bitmap[j / 8] |= 1 << (7 - j % 8);
            }
        }
        out.extend_from_slice(&bitmap);
        out.extend(row.iter().copied().filter(|&b| b != 0));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// Decimal random walk with steps of at most 127 units in the last place.
    RandomWalk,
    /// Independent values with exactly `decimal_places` fractional digits.
    FixedDecimal,
    /// Walk magnitudes with alternating sign.
    SignFlip,
    /// Random walk with one large spike per 1025 values.
    OutlierInjected,
    /// Uniform bit patterns plus a dose of NaN, infinity, zero and subnormals.
    UniformBits,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 5] = [
        SyntheticKind::RandomWalk,
        SyntheticKind::FixedDecimal,
        SyntheticKind::SignFlip,
        SyntheticKind::OutlierInjected,
        SyntheticKind::UniformBits,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::RandomWalk => "random-walk",
            SyntheticKind::FixedDecimal => "fixed-decimal",
            SyntheticKind::SignFlip => "sign-flip",
            SyntheticKind::OutlierInjected => "outlier-injected",
            SyntheticKind::UniformBits => "uniform-bits",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SyntheticKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown dataset kind `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub decimal_places: u8,
    pub value_count: u64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, decimal_places: u8, value_count: u64, seed: u64) -> Self {
        SyntheticSpec {
            kind,
            decimal_places,
            value_count,
            seed,
        }
    }
}

/// Largest walk excursion in last-place units; keeps six significant digits.
const WALK_BOUND: i64 = 999_999;
const MAX_STEP: i64 = 127;

/// Lazy generator for a [`SyntheticSpec`].
pub struct Synthetic<F> {
    spec: SyntheticSpec,
    rng: ChaCha8Rng,
    produced: u64,
    walk: i64,
    spike_at: u64,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Float> Synthetic<F> {
    pub fn new(spec: SyntheticSpec) -> Self {
        assert!(
            spec.decimal_places <= F::PRECISION.max_alpha(),
            "decimal places beyond the precision bound"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let walk = rng.gen_range(-WALK_BOUND / 2..=WALK_BOUND / 2);
        Synthetic {
            spec,
            rng,
            produced: 0,
            walk,
            spike_at: 0,
            _marker: std::marker::PhantomData,
        }
    }

    fn decimal(&self, units: i64) -> F {
        F::from_i64(units) / F::pow10(self.spec.decimal_places as u32)
    }

    fn step(&mut self) -> i64 {
        let mut d = self.rng.gen_range(-MAX_STEP..=MAX_STEP);
        if (self.walk + d).abs() > WALK_BOUND {
            d = -d;
        }
        self.walk += d;
        self.walk
    }

    fn fixed_decimal(&mut self) -> F {
        let max_digits = F::PRECISION.max_beta() as u32;
        let dp = self.spec.decimal_places as u32;
        let digits = self.rng.gen_range(1..=max_digits);
        let lo = 10i64.pow(digits - 1);
        let mut g = self.rng.gen_range(lo..lo * 10);
        if dp > 0 && g % 10 == 0 {
            g += self.rng.gen_range(1..10);
            if g >= lo * 10 {
                g -= 10;
            }
        }
        if self.rng.gen::<bool>() {
            g = -g;
        }
        self.decimal(g)
    }

    fn uniform_bits(&mut self) -> F {
        let lane = F::PRECISION.lane_bits();
        let mask = if lane == 64 {
            u64::MAX
        } else {
            (1u64 << lane) - 1
        };
        let exp_mask = ((1u64 << F::EXPONENT_BITS) - 1) << F::MANTISSA_BITS;
        let sign = 1u64 << (lane - 1);
        let mantissa: u64 = self.rng.gen::<u64>() & ((1u64 << F::MANTISSA_BITS) - 1);
        let bits = match self.rng.gen_range(0..16) {
            0 => exp_mask | mantissa.max(1), // NaN
            1 => exp_mask,                   // +inf
            2 => sign | exp_mask,            // -inf
            3 => 0,                          // +0
            4 => sign,                       // -0
            5 => mantissa.max(1),            // subnormal
            _ => self.rng.gen::<u64>() & mask,
        };
        let bits = if self.rng.gen::<bool>() && bits & exp_mask != exp_mask {
            bits ^ sign
        } else {
            bits
        };
        F::from_lane(bits & mask)
    }

    fn next_value(&mut self) -> F {
        let i = self.produced;
        self.produced += 1;
        match self.spec.kind {
            SyntheticKind::RandomWalk => {
                let g = self.step();
                self.decimal(g)
            }
            SyntheticKind::FixedDecimal => self.fixed_decimal(),
            SyntheticKind::SignFlip => {
                let g = self.step().abs().max(1);
                self.decimal(if i % 2 == 0 { g } else { -g })
            }
            SyntheticKind::OutlierInjected => {
                let block = DEFAULT_CHUNK_N as u64;
                if i % block == 0 {
                    self.spike_at = i + self.rng.gen_range(0..block);
                }
                let g = self.step();
                if i == self.spike_at {
                    let spike = self.rng.gen_range(64..=128) * MAX_STEP;
                    let spike = if self.rng.gen::<bool>() {
                        spike
                    } else {
                        -spike
                    };
                    return self.decimal(g + spike);
                }
                self.decimal(g)
            }
            SyntheticKind::UniformBits => self.uniform_bits(),
        }
    }
}

impl<F: Float> Iterator for Synthetic<F> {
    type Item = F;

    fn next(&mut self) -> Option<F> {
        (self.produced < self.spec.value_count).then(|| self.next_value())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.value_count - self.produced) as usize;
        (left, Some(left))
    }
}

impl<F: Float> ValueSource<F> for Synthetic<F> {
    fn read(&mut self, max: usize) -> io::Result<Option<Vec<F>>> {
        let block: Vec<F> = self.by_ref().take(max).collect();
        Ok((!block.is_empty()).then_some(block))
    }
}

/// Materialize a dataset.
pub fn generate<F: Float>(spec: SyntheticSpec) -> Vec<F> {
    Synthetic::<F>::new(spec).collect()
}

pub fn generate_f64(spec: SyntheticSpec) -> Vec<f64> {
    generate(spec)
}

pub fn generate_f32(spec: SyntheticSpec) -> Vec<f32> {
    generate(spec)
}
