mod values;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use falcon_core::chunk::{chunk_case, parse_chunk_layout};
use falcon_core::container::{parse_archive, ArchiveHeader, CodecConfig, DEFAULT_BATCH_VALUES};
use falcon_core::numeric::{Float, Precision};
use falcon_core::oracle::{Synthetic, SyntheticKind, SyntheticSpec};
use falcon_core::pipeline::{
    compress_pipeline, compress_slice, decompress_pipeline, PipelineConfig, RawSource,
    DEFAULT_STREAMS,
};
use falcon_core::transform::{TransformCase, DEFAULT_CHUNK_N};

use values::{read_values, write_values, Column, Layout, TextFloat};

#[derive(Parser, Debug)]
#[command(name = "falcon", version, about = "Lossless floating-point compressor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compress a value file into an archive.
    Compress {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        input_opts: InputOpts,
        #[command(flatten)]
        codec: CodecOpts,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Restore the values stored in an archive.
    Decompress {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value = "64")]
        precision: PrecisionArg,
        #[arg(long, value_enum, default_value = "raw")]
        format: Layout,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Compress, decompress and compare bit for bit.
    Verify {
        input: PathBuf,
        #[command(flatten)]
        input_opts: InputOpts,
        #[command(flatten)]
        codec: CodecOpts,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Describe an archive's header, batches and chunks.
    Inspect { archive: PathBuf },
    /// Write a synthetic dataset.
    Gen {
        output: PathBuf,
        #[command(flatten)]
        synth: SynthOpts,
        #[arg(long, value_enum, default_value = "64")]
        precision: PrecisionArg,
        #[arg(long, value_enum, default_value = "raw")]
        format: Layout,
    },
    /// Measure ratio and throughput on a file or a synthetic dataset.
    Bench {
        /// Value file; a synthetic dataset is used when omitted.
        input: Option<PathBuf>,
        #[command(flatten)]
        input_opts: InputOpts,
        #[command(flatten)]
        synth: SynthOpts,
        #[command(flatten)]
        codec: CodecOpts,
        #[command(flatten)]
        run: RunOpts,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PrecisionArg {
    #[value(name = "64")]
    Double,
    #[value(name = "32")]
    Single,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Single => Precision::Single,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct InputOpts {
    #[arg(long, value_enum, default_value = "64")]
    precision: PrecisionArg,
    #[arg(long, value_enum, default_value = "raw")]
    format: Layout,
    /// CSV column, as a 0-based index or a header name.
    #[arg(long, default_value = "0")]
    column: Column,
    /// Treat the first CSV row as a header.
    #[arg(long)]
    header: bool,
}

#[derive(Args, Debug, Clone)]
struct CodecOpts {
    #[arg(long, default_value_t = DEFAULT_CHUNK_N)]
    chunk_n: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_VALUES)]
    batch_values: usize,
}

#[derive(Args, Debug, Clone)]
struct RunOpts {
    #[arg(long, default_value_t = DEFAULT_STREAMS)]
    streams: usize,
    #[arg(long, env = "FALCON_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SynthOpts {
    /// Dataset as `kind` or `kind:decimal_places`.
    #[arg(long, default_value = "random-walk:2")]
    spec: String,
    #[arg(long, default_value_t = 1_000_000)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SynthOpts {
    fn spec(&self) -> Result<SyntheticSpec> {
        let (kind, places) = match self.spec.split_once(':') {
            Some((k, p)) => (
                k,
                p.parse()
                    .with_context(|| format!("bad decimal places `{p}`"))?,
            ),
            None => (self.spec.as_str(), 2),
        };
        let kind: SyntheticKind = kind.parse().map_err(anyhow::Error::msg)?;
        Ok(SyntheticSpec::new(kind, places, self.count, self.seed))
    }
}

fn pipeline_config(codec: &CodecOpts, run: &RunOpts) -> PipelineConfig {
    let defaults = PipelineConfig::default();
    PipelineConfig {
        codec: CodecConfig {
            chunk_n: codec.chunk_n,
            batch_values: codec.batch_values,
        },
        streams: run.streams,
        workers: run.workers.unwrap_or(defaults.workers),
        hook: None,
    }
}

fn workers(run: &RunOpts) -> usize {
    run.workers
        .unwrap_or_else(falcon_core::pipeline::default_workers)
}

/// Ordered key=value report.
#[derive(Default)]
struct Report(Vec<(String, String)>);

impl Report {
    fn put(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    fn print(&self) {
        for (k, v) in &self.0 {
            println!("{k}={v}");
        }
    }
}

fn ratio(archive: usize, values: u64, precision: Precision) -> f64 {
    if values == 0 {
        return 0.0;
    }
    archive as f64 / (values as f64 * precision.value_bytes() as f64)
}

fn same_bits<F: Float>(a: &[F], b: &[F]) -> Option<usize> {
    if a.len() != b.len() {
        return Some(a.len().min(b.len()));
    }
    a.iter()
        .zip(b)
        .position(|(x, y)| x.to_lane() != y.to_lane())
}

fn compress_file<F: TextFloat>(
    input: &Path,
    output: &Path,
    opts: &InputOpts,
    config: &PipelineConfig,
) -> Result<Report> {
    let start = Instant::now();
    let (archive, report) = match opts.format {
        Layout::Raw => {
            let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
            let mut src = RawSource::<_, F>::new(BufReader::new(file));
            compress_pipeline(&mut src, config)?
        }
        Layout::Csv => {
            let v: Vec<F> = read_values(input, opts.format, &opts.column, opts.header)?;
            compress_slice(&v, config)?
        }
    };
    let secs = start.elapsed().as_secs_f64();
    fs::write(output, &archive).with_context(|| format!("writing {}", output.display()))?;
    let mut r = Report::default();
    r.put("command", "compress")
        .put("precision", F::PRECISION)
        .put("values", report.total_values)
        .put("batches", report.placements.len())
        .put("archive_bytes", archive.len())
        .put(
            "ratio",
            format!(
                "{:.6}",
                ratio(archive.len(), report.total_values, F::PRECISION)
            ),
        )
        .put("seconds", format!("{secs:.6}"));
    Ok(r)
}

fn decompress_file<F: TextFloat>(
    input: &Path,
    output: &Path,
    layout: Layout,
    run: &RunOpts,
) -> Result<Report> {
    let archive = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let start = Instant::now();
    let values: Vec<F> = decompress_pipeline(&archive, run.streams, workers(run))?;
    let secs = start.elapsed().as_secs_f64();
    write_values(output, &values, layout)?;
    let mut r = Report::default();
    r.put("command", "decompress")
        .put("precision", F::PRECISION)
        .put("values", values.len())
        .put("seconds", format!("{secs:.6}"));
    Ok(r)
}

fn verify_values<F: TextFloat>(values: &[F], config: &PipelineConfig) -> Result<(Report, bool)> {
    let (archive, _) = compress_slice(values, config)?;
    let back: Vec<F> = decompress_pipeline(&archive, config.streams, config.workers)?;
    let mismatch = same_bits(values, &back);
    let mut r = Report::default();
    r.put("command", "verify")
        .put("precision", F::PRECISION)
        .put("values", values.len())
        .put("archive_bytes", archive.len())
        .put(
            "ratio",
            format!(
                "{:.6}",
                ratio(archive.len(), values.len() as u64, F::PRECISION)
            ),
        );
    if let Some(i) = mismatch {
        r.put("first_mismatch", i);
    }
    r.put("status", if mismatch.is_none() { "PASS" } else { "FAIL" });
    Ok((r, mismatch.is_none()))
}

#[derive(Default)]
struct ChunkStats {
    chunks: u64,
    min: u64,
    max: u64,
    sum: u64,
    decimal: u64,
    bitwise: u64,
    dense_rows: u64,
    sparse_rows: u64,
    widths: BTreeMap<u8, u64>,
}

struct Inspection {
    header: ArchiveHeader,
    /// Encoded length and chunk stats per batch.
    batches: Vec<(usize, ChunkStats)>,
    total: ChunkStats,
}

fn inspect_chunks<F: Float>(bytes: &[u8]) -> Result<Inspection> {
    let archive = parse_archive(bytes)?;
    let mut total = ChunkStats {
        min: u64::MAX,
        ..ChunkStats::default()
    };
    let mut per_batch = Vec::new();
    for (index, batch) in archive.batches.iter().enumerate() {
        let mut s = ChunkStats {
            min: u64::MAX,
            ..ChunkStats::default()
        };
        for (i, &size) in batch.chunk_sizes.iter().enumerate() {
            let layout = parse_chunk_layout::<F>(batch.chunk(i))
                .with_context(|| format!("batch {index} chunk {i}"))?;
            for st in [&mut s, &mut total] {
                st.chunks += 1;
                st.min = st.min.min(size as u64);
                st.max = st.max.max(size as u64);
                st.sum += size as u64;
                match chunk_case::<F>(&layout) {
                    TransformCase::Decimal => st.decimal += 1,
                    TransformCase::Bitwise => st.bitwise += 1,
                }
                st.dense_rows += layout.dense_rows() as u64;
                st.sparse_rows += layout.sparse_rows() as u64;
                *st.widths.entry(layout.width()).or_default() += 1;
            }
        }
        per_batch.push((batch.encoded_len(), s));
    }
    Ok(Inspection {
        header: archive.header,
        batches: per_batch,
        total,
    })
}

fn inspect(path: &Path) -> Result<Report> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let header = ArchiveHeader::parse(&bytes)?;
    let Inspection {
        header,
        batches,
        total,
    } = match header.precision {
        Precision::Double => inspect_chunks::<f64>(&bytes)?,
        Precision::Single => inspect_chunks::<f32>(&bytes)?,
    };
    let mut r = Report::default();
    r.put("precision", header.precision)
        .put("chunk_n", header.chunk_n)
        .put("batch_values", header.batch_values)
        .put("total_values", header.total_values)
        .put("batch_count", header.batch_count)
        .put("archive_bytes", bytes.len())
        .put(
            "ratio",
            format!(
                "{:.6}",
                ratio(bytes.len(), header.total_values, header.precision)
            ),
        )
        .put("chunks", total.chunks)
        .put("case_decimal", total.decimal)
        .put("case_bitwise", total.bitwise)
        .put("dense_rows", total.dense_rows)
        .put("sparse_rows", total.sparse_rows);
    if total.chunks > 0 {
        r.put("chunk_bytes_min", total.min)
            .put("chunk_bytes_max", total.max)
            .put(
                "chunk_bytes_mean",
                format!("{:.1}", total.sum as f64 / total.chunks as f64),
            );
    }
    let hist: Vec<String> = total
        .widths
        .iter()
        .map(|(w, c)| format!("{w}:{c}"))
        .collect();
    r.put("width_histogram", hist.join(","));
    for (i, (len, s)) in batches.iter().enumerate() {
        r.put(
            &format!("batch.{i}"),
            format!(
                "bytes={len} chunks={} min={} max={} mean={:.1} decimal={} bitwise={}",
                s.chunks,
                s.min,
                s.max,
                s.sum as f64 / s.chunks.max(1) as f64,
                s.decimal,
                s.bitwise
            ),
        );
    }
    Ok(r)
}

fn bench_values<F: TextFloat>(values: &[F], config: &PipelineConfig) -> Result<(Report, bool)> {
    let start = Instant::now();
    let (archive, _) = compress_slice(values, config)?;
    let c_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let back: Vec<F> = decompress_pipeline(&archive, config.streams, config.workers)?;
    let d_secs = start.elapsed().as_secs_f64();
    let ok = same_bits(values, &back).is_none();
    let raw_bytes = values.len() as f64 * F::PRECISION.value_bytes() as f64;
    let gbps = |secs: f64| {
        if secs > 0.0 {
            raw_bytes / secs / 1e9
        } else {
            0.0
        }
    };
    let mut r = Report::default();
    r.put("command", "bench")
        .put("precision", F::PRECISION)
        .put("values", values.len())
        .put("streams", config.streams)
        .put("workers", config.workers)
        .put("archive_bytes", archive.len())
        .put(
            "ratio",
            format!(
                "{:.6}",
                ratio(archive.len(), values.len() as u64, F::PRECISION)
            ),
        )
        .put("compress_seconds", format!("{c_secs:.6}"))
        .put("decompress_seconds", format!("{d_secs:.6}"))
        .put("compress_gbps", format!("{:.4}", gbps(c_secs)))
        .put("decompress_gbps", format!("{:.4}", gbps(d_secs)))
        .put("roundtrip", if ok { "PASS" } else { "FAIL" });
    Ok((r, ok))
}

fn load<F: TextFloat>(
    input: Option<&Path>,
    opts: &InputOpts,
    synth: Option<&SynthOpts>,
) -> Result<Vec<F>> {
    match (input, synth) {
        (Some(path), _) => read_values(path, opts.format, &opts.column, opts.header),
        (None, Some(s)) => Ok(Synthetic::<F>::new(s.spec()?).collect()),
        (None, None) => bail!("no input given"),
    }
}

fn gen<F: TextFloat>(output: &Path, synth: &SynthOpts, layout: Layout) -> Result<Report> {
    let spec = synth.spec()?;
    let values: Vec<F> = Synthetic::<F>::new(spec).collect();
    write_values(output, &values, layout)?;
    let mut r = Report::default();
    r.put("command", "gen")
        .put("kind", spec.kind)
        .put("decimal_places", spec.decimal_places)
        .put("values", values.len())
        .put("seed", spec.seed)
        .put("precision", F::PRECISION);
    Ok(r)
}

macro_rules! by_precision {
    ($p:expr, $f:ident ( $($arg:expr),* )) => {
        match Precision::from($p) {
            Precision::Double => $f::<f64>($($arg),*),
            Precision::Single => $f::<f32>($($arg),*),
        }
    };
}

/// Ok(false) means the command ran but a bit-exactness check failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Compress {
            input,
            output,
            input_opts,
            codec,
            run,
        } => {
            let config = pipeline_config(&codec, &run);
            by_precision!(
                input_opts.precision,
                compress_file(&input, &output, &input_opts, &config)
            )?
            .print();
            Ok(true)
        }
        Command::Decompress {
            input,
            output,
            precision,
            format,
            run,
        } => {
            by_precision!(precision, decompress_file(&input, &output, format, &run))?.print();
            Ok(true)
        }
        Command::Verify {
            input,
            input_opts,
            codec,
            run,
        } => {
            let config = pipeline_config(&codec, &run);
            let (r, ok) = match Precision::from(input_opts.precision) {
                Precision::Double => {
                    verify_values(&load::<f64>(Some(&input), &input_opts, None)?, &config)?
                }
                Precision::Single => {
                    verify_values(&load::<f32>(Some(&input), &input_opts, None)?, &config)?
                }
            };
            r.print();
            Ok(ok)
        }
        Command::Inspect { archive } => {
            inspect(&archive)?.print();
            Ok(true)
        }
        Command::Gen {
            output,
            synth,
            precision,
            format,
        } => {
            by_precision!(precision, gen(&output, &synth, format))?.print();
            Ok(true)
        }
        Command::Bench {
            input,
            input_opts,
            synth,
            codec,
            run,
        } => {
            let config = pipeline_config(&codec, &run);
            let (r, ok) = match Precision::from(input_opts.precision) {
                Precision::Double => bench_values(
                    &load::<f64>(input.as_deref(), &input_opts, Some(&synth))?,
                    &config,
                )?,
                Precision::Single => bench_values(
                    &load::<f32>(input.as_deref(), &input_opts, Some(&synth))?,
                    &config,
                )?,
            };
            r.print();
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
