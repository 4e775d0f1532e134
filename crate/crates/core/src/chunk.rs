//! Compressed chunk image.
//!
//! ```text
//! [alpha_max: u8][beta_hat_max: u8][z1: u64 LE][w: u8][flags: ceil(w/8) bytes, BE][rows...]
//! ```
//!
//! Flag bit `w - i` (0 = least significant) describes row `i` (1-based):
//! `1` dense, `0` sparse. Flags are absent when `w == 0`.

use crate::bitplane::{build_planes, decode_rows, encode_rows, unpack_planes, RowScheme};
use crate::error::{Error, Result};
use crate::numeric::Float;
use crate::transform::{
    analyze_chunk, forward_transform_into, inverse_transform_into, ChunkHeaderMeta, TransformCase,
};

/// Fixed prefix of every chunk: two meta bytes, `z1`, and `w`.
pub const CHUNK_PREFIX_LEN: usize = 11;

/// Byte image of one compressed chunk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedChunk {
    bytes: Vec<u8>,
}

impl EncodedChunk {
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

fn flag_bytes(width: u8) -> usize {
    (width as usize).div_ceil(8)
}

/// Compress exactly one chunk of `64k + 1` values.
pub fn compress_chunk<F: Float>(values: &[F]) -> EncodedChunk {
    let mut bytes = Vec::new();
    let mut scratch = Vec::new();
    encode_chunk_into(values, &mut scratch, &mut bytes);
    EncodedChunk { bytes }
}

/// Append the chunk image of `values` to `out`, using `scratch` for the
/// integer vector. Returns the number of bytes written.
pub fn encode_chunk_into<F: Float>(
    values: &[F],
    scratch: &mut Vec<u64>,
    out: &mut Vec<u8>,
) -> usize {
    let start = out.len();
    let header = analyze_chunk(values);
    scratch.clear();
    forward_transform_into(values, header, scratch);
    let img = build_planes(scratch);
    let width = img.width();

    out.push(header.alpha_max);
    out.push(header.beta_hat_max);
    out.extend_from_slice(&scratch[0].to_le_bytes());
    out.push(width);
    if width > 0 {
        let flags = img
            .schemes()
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == RowScheme::Dense)
            .fold(0u64, |acc, (r, _)| acc | 1 << (width as usize - 1 - r));
        out.extend_from_slice(&flags.to_be_bytes()[8 - flag_bytes(width)..]);
        encode_rows(&img, out);
    }
    out.len() - start
}

/// Parsed fixed part of a chunk image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkLayout {
    pub header: ChunkHeaderMeta,
    pub first: u64,
    pub schemes: Vec<RowScheme>,
    /// Bytes before the first row.
    pub prefix_len: usize,
}

impl ChunkLayout {
    pub fn width(&self) -> u8 {
        self.schemes.len() as u8
    }

    pub fn dense_rows(&self) -> usize {
        self.schemes
            .iter()
            .filter(|s| **s == RowScheme::Dense)
            .count()
    }

    pub fn sparse_rows(&self) -> usize {
        self.schemes.len() - self.dense_rows()
    }
}

/// Parse and validate the header, `z1`, width and scheme flags.
pub fn parse_chunk_layout<F: Float>(bytes: &[u8]) -> Result<ChunkLayout> {
    if bytes.len() < CHUNK_PREFIX_LEN {
        return Err(Error::corrupt_chunk(format!(
            "{} bytes is shorter than the {CHUNK_PREFIX_LEN}-byte prefix",
            bytes.len()
        )));
    }
    let header = ChunkHeaderMeta {
        alpha_max: bytes[0],
        beta_hat_max: bytes[1],
    };
    header.validate(F::PRECISION)?;
    let mut raw = [0u8; 8];
    raw.copy_from_slice(&bytes[2..10]);
    let first = u64::from_le_bytes(raw);
    let lane_bits = F::PRECISION.lane_bits();
    if lane_bits < 64 && first >> lane_bits != 0 {
        return Err(Error::corrupt_chunk(format!(
            "first value exceeds {lane_bits} bits"
        )));
    }
    let width = bytes[10];
    if width as u32 > lane_bits {
        return Err(Error::corrupt_chunk(format!(
            "bit width {width} exceeds the {lane_bits}-bit lane"
        )));
    }
    let nflags = flag_bytes(width);
    let flag_src = bytes
        .get(CHUNK_PREFIX_LEN..CHUNK_PREFIX_LEN + nflags)
        .ok_or_else(|| Error::corrupt_chunk("scheme flags truncated"))?;
    let flags = flag_src.iter().fold(0u64, |acc, &b| acc << 8 | b as u64);
    if width < 64 && flags >> width != 0 {
        return Err(Error::corrupt_chunk("nonzero padding bits in scheme flags"));
    }
    let schemes = (0..width as usize)
        .map(|r| {
            if flags >> (width as usize - 1 - r) & 1 == 1 {
                RowScheme::Dense
            } else {
                RowScheme::Sparse
            }
        })
        .collect();
    Ok(ChunkLayout {
        header,
        first,
        schemes,
        prefix_len: CHUNK_PREFIX_LEN + nflags,
    })
}

/// Decode a chunk of `n` values into `out` (`out.len() <= n` real values).
/// Returns the number of bytes the chunk occupied.
pub fn decode_chunk_into<F: Float>(bytes: &[u8], n: usize, out: &mut [F]) -> Result<usize> {
    let layout = parse_chunk_layout::<F>(bytes)?;
    let (img, used) = decode_rows(&bytes[layout.prefix_len..], &layout.schemes, n)?;
    let mut z = Vec::with_capacity(n);
    z.push(layout.first);
    z.extend(unpack_planes(&img));
    inverse_transform_into(&z, layout.header, out)?;
    Ok(layout.prefix_len + used)
}

/// Inverse of [`compress_chunk`], truncated to `count` values.
pub fn decompress_chunk<F: Float>(bytes: &[u8], n: usize, count: usize) -> Result<Vec<F>> {
    if count > n {
        return Err(Error::corrupt_chunk(format!(
            "{count} values requested from a chunk of {n}"
        )));
    }
    let mut out = vec![F::ZERO; count];
    let used = decode_chunk_into(bytes, n, &mut out)?;
    if used != bytes.len() {
        return Err(Error::corrupt_chunk(format!(
            "chunk occupies {used} bytes but {} were supplied",
            bytes.len()
        )));
    }
    Ok(out)
}

/// Transform case recorded in a chunk header.
pub fn chunk_case<F: Float>(layout: &ChunkLayout) -> TransformCase {
    layout.header.case(F::PRECISION)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitplane::row_cost;
    use crate::numeric::Precision;
    use proptest::prelude::*;

    #[test]
    fn all_zero_chunk_is_eleven_bytes() {
        let c = compress_chunk(&[0.0f64; 1025]);
        assert_eq!(c.as_bytes(), &[0u8; 11]);
        let back: Vec<f64> = decompress_chunk(c.as_bytes(), 1025, 1025).unwrap();
        assert!(back.iter().all(|v| v.to_bits() == 0));
    }

    #[test]
    fn constant_chunk() {
        let c = compress_chunk(&[2.5f64; 1025]);
        assert_eq!(c.as_bytes(), &[1, 2, 25, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn bitwise_chunk_carries_sentinel() {
        let mut values = vec![1.0f64; 65];
        values[7] = std::f64::consts::PI;
        let c = compress_chunk(&values);
        assert_eq!(&c.as_bytes()[..2], &[23, 16]);
        let c32 = compress_chunk(&[f32::NAN; 65]);
        assert_eq!(&c32.as_bytes()[..2], &[11, 7]);
    }

    #[test]
    fn sixty_five_value_layout() {
        // deltas: one value needing 10 bits in the first byte, the rest small
        let mut values = vec![0.0f64; 65];
        let mut acc = 0i64;
        let deltas = [0i64, 300, -300, 1, -1, 2, -2, 3];
        for (i, v) in values.iter_mut().enumerate().skip(1) {
            acc += deltas[i % deltas.len()];
            *v = acc as f64;
        }
        let c = compress_chunk(&values);
        let bytes = c.as_bytes();
        let layout = parse_chunk_layout::<f64>(bytes).unwrap();
        assert_eq!(layout.header.alpha_max, 0);
        assert_eq!(layout.width(), 10);
        assert_eq!(layout.prefix_len, 13);
        // zigzag(300) = 600, zigzag(-300) = 599 need 10 bits; the top plane
        // has bits for values in the first byte of every 8-value group
        assert_eq!(bytes[..11], [0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 10]);
        let back: Vec<f64> = decompress_chunk(bytes, 65, 65).unwrap();
        assert_eq!(back, values);
    }

    #[test]
    fn flags_are_big_endian_row_bits() {
        // width 9 with a dense top row and sparse lower rows
        let mut z_values = vec![0.0f64; 65];
        let mut acc = 0i64;
        for v in z_values.iter_mut().skip(1) {
            // zigzag(128) = 256 on every delta: the top plane is all ones
            acc += 128;
            *v = acc as f64;
        }
        let c = compress_chunk(&z_values);
        let layout = parse_chunk_layout::<f64>(c.as_bytes()).unwrap();
        assert_eq!(layout.width(), 9);
        assert_eq!(layout.schemes[0], RowScheme::Dense);
        assert!(layout.schemes[1..].iter().all(|s| *s == RowScheme::Sparse));
        // two flag bytes; bit 8 (row 1) set
        assert_eq!(&c.as_bytes()[11..13], &[0x01, 0x00]);
    }

    #[test]
    fn size_formula() {
        let values: Vec<f64> = (0..1025).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let c = compress_chunk(&values);
        let h = analyze_chunk(&values);
        let mut z = Vec::new();
        forward_transform_into(&values, h, &mut z);
        let img = build_planes(&z);
        let w = img.width() as usize;
        let rows: usize = (0..w).map(|i| row_cost(img.zero_bytes(i), 1025)).sum();
        assert_eq!(c.len(), 11 + w.div_ceil(8) + rows);
    }

    #[test]
    fn truncation_and_corruption() {
        let values: Vec<f64> = (0..129).map(|i| (i as f64).sin()).collect();
        let c = compress_chunk(&values);
        let bytes = c.as_bytes();
        for cut in 0..bytes.len() {
            assert!(
                decompress_chunk::<f64>(&bytes[..cut], 129, 129).is_err(),
                "cut {cut}"
            );
        }
        let mut bad = bytes.to_vec();
        bad[10] = 65;
        assert!(decompress_chunk::<f64>(&bad, 129, 129).is_err());
        let mut bad = compress_chunk(&[0.5f64; 65]).into_bytes();
        bad[1] = 17; // beta_hat out of range but not the sentinel
        assert!(matches!(
            decompress_chunk::<f64>(&bad, 65, 65),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn flag_padding_must_be_zero() {
        let mut values = vec![0.0f64; 65];
        values[1] = 3.0; // width 3, one flag byte
        let mut bytes = compress_chunk(&values).into_bytes();
        assert_eq!(bytes[10], 3);
        bytes[11] |= 0x80;
        assert!(decompress_chunk::<f64>(&bytes, 65, 65).is_err());
    }

    #[test]
    fn single_precision_width_limit() {
        let mut bytes = compress_chunk(&[1.5f32; 65]).into_bytes();
        bytes[10] = 33;
        assert!(decompress_chunk::<f32>(&bytes, 65, 65).is_err());
        let mut bytes = compress_chunk(&[1.5f32; 65]).into_bytes();
        bytes[9] = 1; // high byte of z1
        assert!(decompress_chunk::<f32>(&bytes, 65, 65).is_err());
        assert_eq!(Precision::Single.lane_bits(), 32);
    }

    #[test]
    fn partial_count() {
        let values: Vec<f64> = (0..65).map(|i| i as f64 * 0.25).collect();
        let c = compress_chunk(&values);
        let back: Vec<f64> = decompress_chunk(c.as_bytes(), 65, 10).unwrap();
        assert_eq!(back, values[..10]);
    }

    proptest! {
        #[test]
        fn random_bits_roundtrip(bits in prop::collection::vec(any::<u64>(), 129)) {
            let values: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).collect();
            let c = compress_chunk(&values);
            let back: Vec<f64> = decompress_chunk(c.as_bytes(), 129, 129).unwrap();
            for (a, b) in values.iter().zip(&back) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn random_decimals_roundtrip(digits in prop::collection::vec(-99_999_999i64..99_999_999, 65), places in 0i32..7) {
            let values: Vec<f64> = digits.iter().map(|&d| d as f64 / 10f64.powi(places)).collect();
            let c = compress_chunk(&values);
            let back: Vec<f64> = decompress_chunk(c.as_bytes(), 65, 65).unwrap();
            prop_assert_eq!(back, values);
        }
    }
}
