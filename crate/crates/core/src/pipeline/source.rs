//! Input streams feeding the compression scheduler.

use std::io::{self, Read};
use std::marker::PhantomData;

use crate::numeric::Float;

/// A pull-based stream of values.
pub trait ValueSource<F: Float> {
    /// Read up to `max` values. `Ok(None)` marks the end of the stream; a
    /// shorter-than-`max` result is allowed and is topped up by the caller.
    fn read(&mut self, max: usize) -> io::Result<Option<Vec<F>>>;
}

/// Values held in memory.
pub struct SliceSource<'a, F> {
    values: &'a [F],
    pos: usize,
}

impl<'a, F> SliceSource<'a, F> {
    pub fn new(values: &'a [F]) -> Self {
        SliceSource { values, pos: 0 }
    }
}

impl<F: Float> ValueSource<F> for SliceSource<'_, F> {
    fn read(&mut self, max: usize) -> io::Result<Option<Vec<F>>> {
        if self.pos >= self.values.len() {
            return Ok(None);
        }
        let end = (self.pos + max).min(self.values.len());
        let out = self.values[self.pos..end].to_vec();
        self.pos = end;
        Ok(Some(out))
    }
}

/// Packed little-endian IEEE-754 values from any reader.
pub struct RawSource<R, F> {
    reader: R,
    buf: Vec<u8>,
    _marker: PhantomData<F>,
}

impl<R: Read, F: Float> RawSource<R, F> {
    pub fn new(reader: R) -> Self {
        RawSource {
            reader,
            buf: Vec::new(),
            _marker: PhantomData,
        }
    }
}

impl<R: Read, F: Float> ValueSource<F> for RawSource<R, F> {
    fn read(&mut self, max: usize) -> io::Result<Option<Vec<F>>> {
        let width = F::PRECISION.value_bytes();
        self.buf.resize(max * width, 0);
        let mut filled = 0;
        while filled < self.buf.len() {
            match self.reader.read(&mut self.buf[filled..]) {
                Ok(0) => break,
                Ok(k) => filled += k,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        if filled % width != 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!("input ends inside a {width}-byte value"),
            ));
        }
        if filled == 0 {
            return Ok(None);
        }
        Ok(Some(
            self.buf[..filled]
                .chunks_exact(width)
                .map(F::from_le_slice)
                .collect(),
        ))
    }
}

/// Pull exactly `max` values unless the stream ends first.
pub(crate) fn read_full<F: Float>(
    src: &mut dyn ValueSource<F>,
    max: usize,
) -> io::Result<Option<Vec<F>>> {
    let mut batch: Vec<F> = Vec::new();
    while batch.len() < max {
        match src.read(max - batch.len())? {
            Some(part) if !part.is_empty() => {
                if batch.is_empty() {
                    batch = part;
                } else {
                    batch.extend_from_slice(&part);
                }
            }
            _ => break,
        }
    }
    Ok((!batch.is_empty()).then_some(batch))
}
