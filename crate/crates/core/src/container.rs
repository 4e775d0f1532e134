//! Archive file format: a fixed header followed by batches.
//!
//! ```text
//! header:  magic "FALCONA\0" | version u16 | precision u8 | chunk_n u32
//!          | batch_values u64 | total_values u64 | batch_count u64
//! batch:   chunk_count u32 | chunk_sizes u32 * chunk_count | payload
//! ```
//!
//! All integers are little-endian. Chunk offsets inside a batch are the
//! exclusive prefix sum of the size array, so any chunk can be located from
//! the size array alone.

use crate::error::{Error, Result};
use crate::numeric::Precision;
use crate::transform::{validate_chunk_n, DEFAULT_CHUNK_N};

pub const MAGIC: [u8; 8] = *b"FALCONA\0";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 8 + 2 + 1 + 4 + 8 + 8 + 8;
/// Values per pipeline batch unless configured otherwise (4096 chunks).
pub const DEFAULT_BATCH_VALUES: usize = DEFAULT_CHUNK_N * 1024 * 4;

/// Chunk and batch geometry shared by the writer and the reader.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodecConfig {
    pub chunk_n: usize,
    pub batch_values: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            chunk_n: DEFAULT_CHUNK_N,
            batch_values: DEFAULT_BATCH_VALUES,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        validate_chunk_n(self.chunk_n)?;
        if u32::try_from(self.chunk_n).is_err() {
            return Err(Error::InvalidConfig(format!(
                "chunk size {} exceeds 32 bits",
                self.chunk_n
            )));
        }
        if self.batch_values == 0 || self.batch_values % self.chunk_n != 0 {
            return Err(Error::InvalidConfig(format!(
                "batch size {} is not a positive multiple of the chunk size {}",
                self.batch_values, self.chunk_n
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub precision: Precision,
    pub chunk_n: u32,
    pub batch_values: u64,
    pub total_values: u64,
    pub batch_count: u64,
}

impl ArchiveHeader {
    pub fn new(precision: Precision, config: CodecConfig, total_values: u64) -> Self {
        let batch_count = total_values.div_ceil(config.batch_values as u64);
        ArchiveHeader {
            precision,
            chunk_n: config.chunk_n as u32,
            batch_values: config.batch_values as u64,
            total_values,
            batch_count,
        }
    }

    pub fn codec_config(&self) -> CodecConfig {
        CodecConfig {
            chunk_n: self.chunk_n as usize,
            batch_values: self.batch_values as usize,
        }
    }

    /// Number of real values in batch `index`.
    pub fn values_in_batch(&self, index: u64) -> u64 {
        let start = index * self.batch_values;
        self.total_values
            .saturating_sub(start)
            .min(self.batch_values)
    }

    /// Number of chunks in batch `index` (the last chunk may be padded).
    pub fn chunks_in_batch(&self, index: u64) -> u64 {
        self.values_in_batch(index).div_ceil(self.chunk_n as u64)
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&MAGIC);
        out[8..10].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        out[10] = self.precision.code();
        out[11..15].copy_from_slice(&self.chunk_n.to_le_bytes());
        out[15..23].copy_from_slice(&self.batch_values.to_le_bytes());
        out[23..31].copy_from_slice(&self.total_values.to_le_bytes());
        out[31..39].copy_from_slice(&self.batch_count.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::corrupt_archive(
                "file shorter than the archive header",
            ));
        }
        if bytes[0..8] != MAGIC {
            return Err(Error::corrupt_archive("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != FORMAT_VERSION {
            return Err(Error::corrupt_archive(format!(
                "unsupported version {version}"
            )));
        }
        let precision = Precision::from_code(bytes[10]).ok_or_else(|| {
            Error::corrupt_archive(format!("unknown precision code {}", bytes[10]))
        })?;
        let header = ArchiveHeader {
            precision,
            chunk_n: le_u32(&bytes[11..15]),
            batch_values: le_u64(&bytes[15..23]),
            total_values: le_u64(&bytes[23..31]),
            batch_count: le_u64(&bytes[31..39]),
        };
        header
            .codec_config()
            .validate()
            .map_err(|e| Error::corrupt_archive(e.to_string()))?;
        if header.batch_count != header.total_values.div_ceil(header.batch_values) {
            return Err(Error::corrupt_archive(format!(
                "{} batches cannot hold {} values",
                header.batch_count, header.total_values
            )));
        }
        Ok(header)
    }
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().unwrap())
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().unwrap())
}

/// Exclusive prefix sum of chunk sizes.
pub fn offsets_from_sizes(sizes: &[u32]) -> Result<Vec<u64>> {
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut running = 0u64;
    for &s in sizes {
        offsets.push(running);
        running = running.checked_add(s as u64).ok_or(Error::OffsetOverflow)?;
    }
    Ok(offsets)
}

/// One compressed batch: the chunk size array and the concatenated chunks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BatchArchive {
    pub chunk_sizes: Vec<u32>,
    pub payload: Vec<u8>,
}

impl BatchArchive {
    /// Serialized size including the count and size array.
    pub fn encoded_len(&self) -> usize {
        4 + 4 * self.chunk_sizes.len() + self.payload.len()
    }
}

pub fn write_batch(batch: &BatchArchive, out: &mut Vec<u8>) {
    out.reserve(batch.encoded_len());
    out.extend_from_slice(&(batch.chunk_sizes.len() as u32).to_le_bytes());
    for s in &batch.chunk_sizes {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.extend_from_slice(&batch.payload);
}

/// Borrowed view of a serialized batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchView<'a> {
    pub chunk_sizes: Vec<u32>,
    pub offsets: Vec<u64>,
    pub payload: &'a [u8],
}

impl<'a> BatchView<'a> {
    pub fn chunk_count(&self) -> usize {
        self.chunk_sizes.len()
    }

    /// Bytes of chunk `i`, located through the offset array only.
    pub fn chunk(&self, i: usize) -> &'a [u8] {
        let start = self.offsets[i] as usize;
        &self.payload[start..start + self.chunk_sizes[i] as usize]
    }

    pub fn encoded_len(&self) -> usize {
        4 + 4 * self.chunk_sizes.len() + self.payload.len()
    }

    pub fn to_owned_batch(&self) -> BatchArchive {
        BatchArchive {
            chunk_sizes: self.chunk_sizes.clone(),
            payload: self.payload.to_vec(),
        }
    }
}

/// Parse one batch from the front of `input`; returns the view and bytes consumed.
pub fn read_batch(input: &[u8]) -> Result<(BatchView<'_>, usize)> {
    if input.len() < 4 {
        return Err(Error::corrupt_archive("batch chunk count truncated"));
    }
    let count = le_u32(&input[0..4]) as usize;
    let sizes_end = count
        .checked_mul(4)
        .and_then(|b| b.checked_add(4))
        .filter(|&end| end <= input.len())
        .ok_or_else(|| Error::corrupt_archive(format!("size array of {count} chunks truncated")))?;
    let chunk_sizes: Vec<u32> = input[4..sizes_end].chunks_exact(4).map(le_u32).collect();
    let offsets = offsets_from_sizes(&chunk_sizes)?;
    let total = offsets
        .last()
        .map_or(0, |o| o + *chunk_sizes.last().unwrap() as u64);
    let remaining = (input.len() - sizes_end) as u64;
    if total > remaining {
        return Err(Error::corrupt_archive(format!(
            "chunk sizes sum to {total} bytes but only {remaining} remain"
        )));
    }
    let end = sizes_end + total as usize;
    Ok((
        BatchView {
            chunk_sizes,
            offsets,
            payload: &input[sizes_end..end],
        },
        end,
    ))
}

/// A parsed archive borrowing its batches from the file bytes.
#[derive(Clone, Debug)]
pub struct Archive<'a> {
    pub header: ArchiveHeader,
    pub batches: Vec<BatchView<'a>>,
}

pub fn parse_archive(bytes: &[u8]) -> Result<Archive<'_>> {
    let header = ArchiveHeader::parse(bytes)?;
    let mut pos = HEADER_LEN;
    let mut batches = Vec::new();
    for index in 0..header.batch_count {
        let (view, used) = read_batch(&bytes[pos..]).map_err(|e| Error::CorruptBatch {
            index,
            source: Box::new(e),
        })?;
        let expected = header.chunks_in_batch(index);
        if view.chunk_count() as u64 != expected {
            return Err(Error::CorruptBatch {
                index,
                source: Box::new(Error::corrupt_archive(format!(
                    "{} chunks stored, {expected} expected",
                    view.chunk_count()
                ))),
            });
        }
        batches.push(view);
        pos += used;
    }
    if pos != bytes.len() {
        return Err(Error::corrupt_archive(format!(
            "{} trailing bytes after the last batch",
            bytes.len() - pos
        )));
    }
    Ok(Archive { header, batches })
}
