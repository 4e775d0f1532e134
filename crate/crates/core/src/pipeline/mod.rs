//! Batch pipeline: the scheduler, its batch kernels, and a sequential
//! reference codec producing the same archive bytes.

pub mod kernel;
pub mod scheduler;
pub mod source;

pub use scheduler::{
    compress_pipeline, compress_slice, decompress_pipeline, default_workers, PipelineConfig,
    PipelineReport, Placement, SlotState, Stage, StageHook, Transition, DEFAULT_STREAMS,
};
pub use source::{RawSource, SliceSource, ValueSource};

use crate::container::{parse_archive, write_batch, ArchiveHeader, CodecConfig};
use crate::error::{Error, Result};
use crate::numeric::Float;

/// Single-threaded reference compressor.
pub fn compress_values<F: Float>(values: &[F], config: CodecConfig) -> Result<Vec<u8>> {
    config.validate()?;
    let header = ArchiveHeader::new(F::PRECISION, config, values.len() as u64);
    let mut out = header.to_bytes().to_vec();
    for batch in values.chunks(config.batch_values) {
        write_batch(
            &kernel::compress_batch_serial(batch, config.chunk_n)?,
            &mut out,
        );
    }
    Ok(out)
}

/// Single-threaded reference decompressor.
pub fn decompress_values<F: Float>(archive: &[u8]) -> Result<Vec<F>> {
    let parsed = parse_archive(archive)?;
    let header = parsed.header;
    if header.precision != F::PRECISION {
        return Err(Error::PrecisionMismatch {
            archive: header.precision,
            requested: F::PRECISION,
        });
    }
    let mut out = vec![F::ZERO; header.total_values as usize];
    for (index, (view, region)) in parsed
        .batches
        .iter()
        .zip(out.chunks_mut(header.batch_values as usize))
        .enumerate()
    {
        kernel::decompress_batch_serial(view, header.chunk_n as usize, region).map_err(|e| {
            Error::CorruptBatch {
                index: index as u64,
                source: Box::new(e),
            }
        })?;
    }
    Ok(out)
}
