//! Batch kernels: one batch of values to one [`BatchArchive`] and back.

use rayon::prelude::*;

use crate::chunk::{decode_chunk_into, encode_chunk_into};
use crate::container::{offsets_from_sizes, BatchArchive, BatchView};
use crate::error::{Error, Result};
use crate::numeric::Float;

/// Split `values` into chunks of `chunk_n`, padding the last with +0.0.
fn chunk_slices<F: Float>(values: &[F], chunk_n: usize) -> (Vec<&[F]>, Option<Vec<F>>) {
    let full = values.len() / chunk_n;
    let slices: Vec<&[F]> = values[..full * chunk_n].chunks_exact(chunk_n).collect();
    let tail = &values[full * chunk_n..];
    let padded = (!tail.is_empty()).then(|| {
        let mut p = tail.to_vec();
        p.resize(chunk_n, F::ZERO);
        p
    });
    (slices, padded)
}

fn assemble(encoded: Vec<Vec<u8>>) -> Result<BatchArchive> {
    let chunk_sizes: Vec<u32> = encoded
        .iter()
        .map(|c| u32::try_from(c.len()).map_err(|_| Error::OffsetOverflow))
        .collect::<Result<_>>()?;
    let offsets = offsets_from_sizes(&chunk_sizes)?;
    let total = offsets
        .last()
        .map_or(0, |o| o + *chunk_sizes.last().unwrap() as u64) as usize;
    let mut payload = vec![0u8; total];

    // Carve the payload into disjoint regions at the computed offsets.
    let mut regions = Vec::with_capacity(encoded.len());
    let mut rest = payload.as_mut_slice();
    for &s in &chunk_sizes {
        let (head, tail) = rest.split_at_mut(s as usize);
        regions.push(head);
        rest = tail;
    }
    regions
        .into_par_iter()
        .zip(encoded.par_iter())
        .for_each(|(dst, src)| dst.copy_from_slice(src));
    Ok(BatchArchive {
        chunk_sizes,
        payload,
    })
}

/// Compress one batch with chunks spread over the current rayon pool.
pub fn compress_batch<F: Float>(values: &[F], chunk_n: usize) -> Result<BatchArchive> {
    let (slices, padded) = chunk_slices(values, chunk_n);
    let mut all = slices;
    if let Some(p) = padded.as_deref() {
        all.push(p);
    }
    let encoded: Vec<Vec<u8>> = all
        .par_iter()
        .map_init(Vec::new, |scratch, chunk| {
            let mut out = Vec::new();
            encode_chunk_into(chunk, scratch, &mut out);
            out
        })
        .collect();
    assemble(encoded)
}

/// Single-threaded reference for [`compress_batch`].
pub fn compress_batch_serial<F: Float>(values: &[F], chunk_n: usize) -> Result<BatchArchive> {
    let (slices, padded) = chunk_slices(values, chunk_n);
    let mut scratch = Vec::new();
    let mut chunk_sizes = Vec::new();
    let mut payload = Vec::new();
    for chunk in slices.into_iter().chain(padded.as_deref()) {
        let n = encode_chunk_into(chunk, &mut scratch, &mut payload);
        chunk_sizes.push(u32::try_from(n).map_err(|_| Error::OffsetOverflow)?);
    }
    Ok(BatchArchive {
        chunk_sizes,
        payload,
    })
}

fn decode_one<F: Float>(
    view: &BatchView<'_>,
    i: usize,
    chunk_n: usize,
    out: &mut [F],
) -> Result<()> {
    let bytes = view.chunk(i);
    let used = decode_chunk_into(bytes, chunk_n, out)?;
    if used != bytes.len() {
        return Err(Error::corrupt_chunk(format!(
            "chunk {i} occupies {used} bytes but its size entry says {}",
            bytes.len()
        )));
    }
    Ok(())
}

fn check_count(view: &BatchView<'_>, values: usize, chunk_n: usize) -> Result<()> {
    let expected = values.div_ceil(chunk_n);
    if view.chunk_count() != expected {
        return Err(Error::corrupt_archive(format!(
            "{} chunks stored for {values} values, {expected} expected",
            view.chunk_count()
        )));
    }
    Ok(())
}

/// Decode a batch into `out`, whose length is the number of real values.
pub fn decompress_batch<F: Float>(
    view: &BatchView<'_>,
    chunk_n: usize,
    out: &mut [F],
) -> Result<()> {
    check_count(view, out.len(), chunk_n)?;
    out.par_chunks_mut(chunk_n)
        .enumerate()
        .try_for_each(|(i, dst)| decode_one(view, i, chunk_n, dst))
}

pub fn decompress_batch_serial<F: Float>(
    view: &BatchView<'_>,
    chunk_n: usize,
    out: &mut [F],
) -> Result<()> {
    check_count(view, out.len(), chunk_n)?;
    for (i, dst) in out.chunks_mut(chunk_n).enumerate() {
        decode_one(view, i, chunk_n, dst)?;
    }
    Ok(())
}
