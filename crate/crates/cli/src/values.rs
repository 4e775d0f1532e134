//! Reading and writing value files in raw or CSV layout.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use falcon_core::numeric::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// Packed little-endian IEEE-754 values.
    Raw,
    /// One numeric column of a CSV file.
    Csv,
}

/// Float types the CLI can parse from text.
pub trait TextFloat: Float + FromStr + Display {}

impl TextFloat for f64 {}
impl TextFloat for f32 {}

/// Which CSV column to read: a 0-based index or a header name.
#[derive(Clone, Debug)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

pub fn read_raw<F: Float>(path: &Path) -> Result<Vec<F>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .with_context(|| format!("reading {}", path.display()))?;
    let width = F::PRECISION.value_bytes();
    if bytes.len() % width != 0 {
        bail!(
            "{}: {} bytes is not a whole number of {width}-byte values",
            path.display(),
            bytes.len()
        );
    }
    Ok(bytes.chunks_exact(width).map(F::from_le_slice).collect())
}

pub fn read_csv<F: TextFloat>(path: &Path, column: &Column, header: bool) -> Result<Vec<F>> {
    let has_headers = header || matches!(column, Column::Name(_));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let index = match column {
        Column::Index(i) => *i,
        Column::Name(name) => reader
            .headers()?
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no column named `{name}`"))?,
    };
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = record
            .get(index)
            .with_context(|| format!("row {line} has no column {index}"))?;
        let v = field
            .parse::<F>()
            .map_err(|_| anyhow::anyhow!("row {line}: `{field}` is not a number"))?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_values<F: TextFloat>(
    path: &Path,
    layout: Layout,
    column: &Column,
    header: bool,
) -> Result<Vec<F>> {
    match layout {
        Layout::Raw => read_raw(path),
        Layout::Csv => read_csv(path, column, header),
    }
}

pub fn write_values<F: TextFloat>(path: &Path, values: &[F], layout: Layout) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    match layout {
        Layout::Raw => {
            let mut buf = Vec::with_capacity(1 << 16);
            for chunk in values.chunks(8192) {
                buf.clear();
                for &v in chunk {
                    v.write_le(&mut buf);
                }
                w.write_all(&buf)?;
            }
        }
        Layout::Csv => {
            for v in values {
                writeln!(w, "{v}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
