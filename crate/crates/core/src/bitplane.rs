//! Adaptive transposed bit-plane coding of the delta integers `z[1..]`.
//!
//! The deltas are trimmed to the common bit width `w`, transposed into `w`
//! byte-aligned planes (most significant first), and each plane is stored
//! either verbatim (dense) or as a zero-byte bitmap followed by its non-zero
//! bytes (sparse), whichever is smaller.

use crate::error::{Error, Result};

/// Storage scheme of one bit-plane row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowScheme {
    Sparse,
    Dense,
}

/// Sparse iff the row has more than `(n-1)/64` zero bytes; ties go dense.
#[inline]
pub fn select_scheme(zero_bytes: usize, n: usize) -> RowScheme {
    if zero_bytes > (n - 1) / 64 {
        RowScheme::Sparse
    } else {
        RowScheme::Dense
    }
}

#[inline]
pub fn sparse_cost(zero_bytes: usize, n: usize) -> usize {
    (n - 1) / 64 + ((n - 1) / 8 - zero_bytes)
}

#[inline]
pub fn dense_cost(n: usize) -> usize {
    (n - 1) / 8
}

/// Encoded size of a row under the selected scheme.
#[inline]
pub fn row_cost(zero_bytes: usize, n: usize) -> usize {
    match select_scheme(zero_bytes, n) {
        RowScheme::Sparse => sparse_cost(zero_bytes, n),
        RowScheme::Dense => dense_cost(n),
    }
}

/// Transposed bit-plane matrix of one chunk's deltas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitPlaneImage {
    width: u8,
    row_bytes: usize,
    rows: Vec<u8>,
    zero_bytes: Vec<u32>,
}

impl BitPlaneImage {
    pub fn width(&self) -> u8 {
        self.width
    }

    /// Bytes per row, `(n-1)/8`.
    pub fn row_bytes(&self) -> usize {
        self.row_bytes
    }

    /// Row `i` (0-based); row 0 is the most significant retained bit plane.
    pub fn row(&self, i: usize) -> &[u8] {
        &self.rows[i * self.row_bytes..(i + 1) * self.row_bytes]
    }

    pub fn zero_bytes(&self, i: usize) -> usize {
        self.zero_bytes[i] as usize
    }

    /// Chunk size `n` this image was built for.
    pub fn chunk_n(&self) -> usize {
        self.row_bytes * 8 + 1
    }

    pub fn schemes(&self) -> Vec<RowScheme> {
        let n = self.chunk_n();
        self.zero_bytes
            .iter()
            .map(|&z| select_scheme(z as usize, n))
            .collect()
    }

    /// Sum of [`row_cost`] over all rows.
    pub fn encoded_len(&self) -> usize {
        let n = self.chunk_n();
        self.zero_bytes
            .iter()
            .map(|&z| row_cost(z as usize, n))
            .sum()
    }

    fn from_rows(width: u8, row_bytes: usize, rows: Vec<u8>) -> Self {
        let zero_bytes = if row_bytes == 0 {
            vec![0; width as usize]
        } else {
            rows.chunks_exact(row_bytes)
                .map(|r| r.iter().filter(|&&b| b == 0).count() as u32)
                .collect()
        };
        BitPlaneImage {
            width,
            row_bytes,
            rows,
            zero_bytes,
        }
    }
}

/// In-place transpose of a 64x64 bit matrix; bit 63 of row 0 is the top-left
/// corner. Row `c` of the result holds column `c` of the input, MSB-first.
fn transpose64(a: &mut [u64; 64]) {
    let mut j = 32usize;
    let mut m: u64 = 0x0000_0000_FFFF_FFFF;
    while j != 0 {
        let mut k = 0usize;
        while k < 64 {
            let t = (a[k] ^ (a[k + j] >> j)) & m;
            a[k] ^= t;
            a[k + j] ^= t << j;
            k = (k + j + 1) & !j;
        }
        j >>= 1;
        m ^= m << j;
    }
}

/// Smallest `w` such that every delta fits in `w` bits.
pub fn bit_width(deltas: &[u64]) -> u8 {
    let all = deltas.iter().fold(0u64, |acc, &d| acc | d);
    (64 - all.leading_zeros()) as u8
}

/// Build the plane image from a full integer vector; `z[0]` is excluded.
///
/// Panics unless `z.len() - 1` is a positive multiple of 64.
pub fn build_planes(z: &[u64]) -> BitPlaneImage {
    let deltas = &z[1..];
    assert!(
        !deltas.is_empty() && deltas.len() % 64 == 0,
        "chunk must hold 64k + 1 values"
    );
    let width = bit_width(deltas);
    let row_bytes = deltas.len() / 8;
    let mut rows = vec![0u8; width as usize * row_bytes];
    if width > 0 {
        let mut block = [0u64; 64];
        for (g, group) in deltas.chunks_exact(64).enumerate() {
            block.copy_from_slice(group);
            transpose64(&mut block);
            for r in 0..width as usize {
                let bit = width as usize - 1 - r;
                let word = block[63 - bit];
                let at = r * row_bytes + g * 8;
                rows[at..at + 8].copy_from_slice(&word.to_be_bytes());
            }
        }
    }
    BitPlaneImage::from_rows(width, row_bytes, rows)
}

/// Recover the `n - 1` deltas from a plane image.
pub fn unpack_planes(img: &BitPlaneImage) -> Vec<u64> {
    let count = img.row_bytes * 8;
    let mut out = vec![0u64; count];
    if img.width == 0 {
        return out;
    }
    let mut block = [0u64; 64];
    for (g, group) in out.chunks_exact_mut(64).enumerate() {
        block.fill(0);
        for r in 0..img.width as usize {
            let bit = img.width as usize - 1 - r;
            let at = r * img.row_bytes + g * 8;
            let mut word = [0u8; 8];
            word.copy_from_slice(&img.rows[at..at + 8]);
            block[63 - bit] = u64::from_be_bytes(word);
        }
        transpose64(&mut block);
        group.copy_from_slice(&block);
    }
    out
}

/// Serialize every row in order with its selected scheme.
pub fn encode_rows(img: &BitPlaneImage, out: &mut Vec<u8>) {
    let n = img.chunk_n();
    let bitmap_len = (n - 1) / 64;
    out.reserve(img.encoded_len());
    for i in 0..img.width as usize {
        let row = img.row(i);
        match select_scheme(img.zero_bytes(i), n) {
            RowScheme::Dense => out.extend_from_slice(row),
            RowScheme::Sparse => {
                let start = out.len();
                out.resize(start + bitmap_len, 0);
                for (j, &b) in row.iter().enumerate() {
                    if b != 0 {
                        out[start + j / 8] |= 0x80 >> (j % 8);
                    }
                }
                out.extend(row.iter().copied().filter(|&b| b != 0));
            }
        }
    }
}

/// Parse `schemes.len()` rows from `input`; returns the image and bytes consumed.
pub fn decode_rows(
    input: &[u8],
    schemes: &[RowScheme],
    n: usize,
) -> Result<(BitPlaneImage, usize)> {
    let width = schemes.len();
    if width > 64 {
        return Err(Error::corrupt_chunk(format!(
            "bit width {width} exceeds 64"
        )));
    }
    let row_bytes = (n - 1) / 8;
    let bitmap_len = (n - 1) / 64;
    let mut rows = vec![0u8; width * row_bytes];
    let mut pos = 0usize;
    for (i, scheme) in schemes.iter().enumerate() {
        let row = &mut rows[i * row_bytes..(i + 1) * row_bytes];
        match scheme {
            RowScheme::Dense => {
                let src = input
                    .get(pos..pos + row_bytes)
                    .ok_or_else(|| Error::corrupt_chunk(format!("dense row {i} truncated")))?;
                row.copy_from_slice(src);
                pos += row_bytes;
            }
            RowScheme::Sparse => {
                let bitmap = input
                    .get(pos..pos + bitmap_len)
                    .ok_or_else(|| Error::corrupt_chunk(format!("sparse bitmap {i} truncated")))?;
                pos += bitmap_len;
                let nonzero: usize = bitmap.iter().map(|b| b.count_ones() as usize).sum();
                let payload = input.get(pos..pos + nonzero).ok_or_else(|| {
                    Error::corrupt_chunk(format!(
                        "sparse row {i} claims {nonzero} bytes beyond the input"
                    ))
                })?;
                let mut next = payload.iter();
                for (j, slot) in row.iter_mut().enumerate() {
                    if bitmap[j / 8] & (0x80 >> (j % 8)) != 0 {
                        // count_ones above guarantees enough payload
                        *slot = *next.next().unwrap();
                    }
                }
                pos += nonzero;
            }
        }
    }
    Ok((BitPlaneImage::from_rows(width as u8, row_bytes, rows), pos))
}
