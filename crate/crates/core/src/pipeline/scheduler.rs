//! Event-driven compression scheduler and pre-allocation decompression.
//!
//! Each stream slot owns a worker thread that runs its stages strictly in
//! order (load, compress, size report, payload copy), the way operations
//! queued on one device stream would. The coordinator never blocks on a
//! slot except through the livelock fallback.

use std::collections::VecDeque;
use std::fmt;
use std::io;
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread;

use rayon::ThreadPool;

use super::kernel::{compress_batch, decompress_batch};
use super::source::{read_full, ValueSource};
use crate::container::{parse_archive, write_batch, ArchiveHeader, CodecConfig, HEADER_LEN};
use crate::error::{Error, Result};
use crate::numeric::Float;

pub const DEFAULT_STREAMS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotState {
    Idle,
    MPend,
    PPend,
}

/// Stages a slot runs for one batch, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Load,
    Compress,
    SizeReport,
    PayloadCopy,
}

/// Called on the slot thread at the start of every stage with
/// `(stage, slot, batch index)`. Tests use it to inject latency.
pub type StageHook = Arc<dyn Fn(Stage, usize, u64) + Send + Sync>;

#[derive(Clone)]
pub struct PipelineConfig {
    pub codec: CodecConfig,
    pub streams: usize,
    pub workers: usize,
    pub hook: Option<StageHook>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            codec: CodecConfig::default(),
            streams: DEFAULT_STREAMS,
            workers: default_workers(),
            hook: None,
        }
    }
}

impl fmt::Debug for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipelineConfig")
            .field("codec", &self.codec)
            .field("streams", &self.streams)
            .field("workers", &self.workers)
            .field("hook", &self.hook.is_some())
            .finish()
    }
}

pub fn default_workers() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        if self.streams == 0 {
            return Err(Error::InvalidConfig(
                "at least one stream is required".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig(
                "at least one worker is required".into(),
            ));
        }
        Ok(())
    }

    fn pool(&self) -> Result<ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .thread_name(|i| format!("falcon-worker-{i}"))
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Where a batch landed. `offset` is relative to the end of the archive header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub batch: u64,
    pub slot: usize,
    pub offset: u64,
    pub size: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub slot: usize,
    pub batch: u64,
    pub from: SlotState,
    pub to: SlotState,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineReport {
    /// In launch order.
    pub placements: Vec<Placement>,
    pub transitions: Vec<Transition>,
    /// Blocking waits taken by the livelock fallback.
    pub forced_waits: usize,
    pub total_values: u64,
    /// Bytes of batch data after the header.
    pub total_size: u64,
}

enum Command<F> {
    Launch { batch: u64, values: Vec<F> },
    Copy { offset: u64 },
}

enum Event {
    Meta(Result<u64>),
    Payload,
}

fn slot_worker<F: Float>(
    slot: usize,
    commands: Receiver<Command<F>>,
    events: Sender<Event>,
    pool: &ThreadPool,
    chunk_n: usize,
    cache: &Mutex<Vec<u8>>,
    hook: Option<&StageHook>,
) {
    let stage = |s: Stage, batch: u64| {
        if let Some(h) = hook {
            h(s, slot, batch);
        }
    };
    let mut out_buffer: Vec<u8> = Vec::new();
    let mut batch_index = 0;
    for cmd in commands {
        let event = match cmd {
            Command::Launch { batch, values } => {
                batch_index = batch;
                stage(Stage::Load, batch);
                let staged = values;
                stage(Stage::Compress, batch);
                let result = pool.install(|| compress_batch(&staged, chunk_n));
                drop(staged);
                stage(Stage::SizeReport, batch);
                out_buffer.clear();
                Event::Meta(result.map(|b| {
                    write_batch(&b, &mut out_buffer);
                    out_buffer.len() as u64
                }))
            }
            Command::Copy { offset } => {
                stage(Stage::PayloadCopy, batch_index);
                let start = HEADER_LEN + offset as usize;
                let end = start + out_buffer.len();
                let mut c = cache.lock().unwrap();
                if c.len() < end {
                    c.resize(end, 0);
                }
                c[start..end].copy_from_slice(&out_buffer);
                drop(c);
                out_buffer.clear();
                Event::Payload
            }
        };
        if events.send(event).is_err() {
            return;
        }
    }
}

/// Per-slot completion signals, buffered once observed.
struct Signals {
    rx: Vec<Receiver<Event>>,
    fired: Vec<Option<Event>>,
}

impl Signals {
    fn poll(&mut self, i: usize) -> Result<bool> {
        if self.fired[i].is_some() {
            return Ok(true);
        }
        match self.rx[i].try_recv() {
            Ok(e) => {
                self.fired[i] = Some(e);
                Ok(true)
            }
            Err(TryRecvError::Empty) => Ok(false),
            Err(TryRecvError::Disconnected) => Err(worker_gone(i)),
        }
    }

    fn wait(&mut self, i: usize) -> Result<()> {
        if self.fired[i].is_none() {
            self.fired[i] = Some(self.rx[i].recv().map_err(|_| worker_gone(i))?);
        }
        Ok(())
    }

    fn take(&mut self, i: usize) -> Event {
        self.fired[i].take().expect("signal polled before take")
    }
}

fn worker_gone(slot: usize) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::BrokenPipe,
        format!("stream slot {slot} exited"),
    ))
}

/// Compress a value stream into a complete archive.
pub fn compress_pipeline<F: Float>(
    source: &mut dyn ValueSource<F>,
    config: &PipelineConfig,
) -> Result<(Vec<u8>, PipelineReport)> {
    config.validate()?;
    let pool = config.pool()?;
    let n = config.streams;
    let chunk_n = config.codec.chunk_n;
    let cache = Mutex::new(vec![0u8; HEADER_LEN]);

    let (report, failure) = thread::scope(|scope| {
        let mut cmd_tx = Vec::with_capacity(n);
        let mut ev_rx = Vec::with_capacity(n);
        for slot in 0..n {
            let (ctx, crx) = mpsc::channel::<Command<F>>();
            let (etx, erx) = mpsc::channel();
            let (pool, cache, hook) = (&pool, &cache, config.hook.as_ref());
            thread::Builder::new()
                .name(format!("falcon-stream-{slot}"))
                .spawn_scoped(scope, move || {
                    slot_worker(slot, crx, etx, pool, chunk_n, cache, hook)
                })
                .expect("spawn stream thread");
            cmd_tx.push(ctx);
            ev_rx.push(erx);
        }
        let mut signals = Signals {
            rx: ev_rx,
            fired: (0..n).map(|_| None).collect(),
        };
        let result = coordinate(source, config, &cmd_tx, &mut signals);
        drop(cmd_tx);
        result
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let mut bytes = cache.into_inner().unwrap();
    debug_assert_eq!(bytes.len() as u64, HEADER_LEN as u64 + report.total_size);
    let header = ArchiveHeader::new(F::PRECISION, config.codec, report.total_values);
    debug_assert_eq!(header.batch_count, report.placements.len() as u64);
    bytes[..HEADER_LEN].copy_from_slice(&header.to_bytes());
    Ok((bytes, report))
}

/// The verification loop. Returns the report and the first failure, if any;
/// a failure stops new reads but every launched batch is drained first.
fn coordinate<F: Float>(
    source: &mut dyn ValueSource<F>,
    config: &PipelineConfig,
    cmd: &[Sender<Command<F>>],
    signals: &mut Signals,
) -> (PipelineReport, Option<Error>) {
    let n = cmd.len();
    let batch_values = config.codec.batch_values;
    let mut report = PipelineReport::default();
    let mut failure: Option<Error> = None;

    let mut read = |failure: &mut Option<Error>, report: &mut PipelineReport| -> Option<Vec<F>> {
        if failure.is_some() {
            return None;
        }
        match read_full(source, batch_values) {
            Ok(b) => {
                report.total_values += b.as_ref().map_or(0, |v| v.len() as u64);
                b
            }
            Err(e) => {
                *failure = Some(e.into());
                None
            }
        }
    };

    let mut state = vec![SlotState::Idle; n];
    let mut slot_batch = vec![0u64; n];
    let mut in_flight: VecDeque<usize> = VecDeque::new();
    let mut current = 0usize;
    let mut launch = 0usize;
    let mut active = 0usize;
    let mut offset = 0u64;
    let mut next_batch = 0u64;
    let mut batch = read(&mut failure, &mut report);

    let set =
        |report: &mut PipelineReport, state: &mut [SlotState], i: usize, b: u64, to: SlotState| {
            report.transitions.push(Transition {
                slot: i,
                batch: b,
                from: state[i],
                to,
            });
            state[i] = to;
        };

    while batch.is_some() || active > 0 {
        let mut progressed = false;
        for i in 0..n {
            match state[i] {
                SlotState::Idle => {
                    // Launches follow the cursor so that `current` visits slots in launch order.
                    if i != launch || batch.is_none() {
                        continue;
                    }
                    let values = batch.take().unwrap();
                    if cmd[i]
                        .send(Command::Launch {
                            batch: next_batch,
                            values,
                        })
                        .is_err()
                    {
                        failure.get_or_insert_with(|| worker_gone(i));
                        continue;
                    }
                    slot_batch[i] = next_batch;
                    next_batch += 1;
                    active += 1;
                    launch = (launch + 1) % n;
                    in_flight.push_back(i);
                    set(&mut report, &mut state, i, slot_batch[i], SlotState::MPend);
                    batch = read(&mut failure, &mut report);
                    progressed = true;
                }
                SlotState::MPend => {
                    if current != i {
                        continue;
                    }
                    match signals.poll(i) {
                        Ok(true) => {}
                        Ok(false) => continue,
                        Err(e) => return (report, Some(e)),
                    }
                    let cs = match signals.take(i) {
                        Event::Meta(Ok(cs)) => cs,
                        Event::Meta(Err(e)) => {
                            failure.get_or_insert(e);
                            batch = None;
                            0
                        }
                        Event::Payload => unreachable!("payload signal before size signal"),
                    };
                    if cmd[i].send(Command::Copy { offset }).is_err() {
                        return (report, Some(worker_gone(i)));
                    }
                    report.placements.push(Placement {
                        batch: slot_batch[i],
                        slot: i,
                        offset,
                        size: cs,
                    });
                    current = (current + 1) % n;
                    offset += cs;
                    set(&mut report, &mut state, i, slot_batch[i], SlotState::PPend);
                    progressed = true;
                }
                SlotState::PPend => {
                    match signals.poll(i) {
                        Ok(true) => {}
                        Ok(false) => continue,
                        Err(e) => return (report, Some(e)),
                    }
                    let ev = signals.take(i);
                    debug_assert!(matches!(ev, Event::Payload));
                    active -= 1;
                    in_flight.retain(|&s| s != i);
                    set(&mut report, &mut state, i, slot_batch[i], SlotState::Idle);
                    progressed = true;
                }
            }
        }
        if !progressed && active > 0 {
            let oldest = *in_flight.front().expect("active slots are in flight");
            if let Err(e) = signals.wait(oldest) {
                return (report, Some(e));
            }
            report.forced_waits += 1;
        }
    }
    report.total_size = offset;
    (report, failure)
}

/// Convenience wrapper over an in-memory slice.
pub fn compress_slice<F: Float>(
    values: &[F],
    config: &PipelineConfig,
) -> Result<(Vec<u8>, PipelineReport)> {
    compress_pipeline(&mut super::source::SliceSource::new(values), config)
}

/// Decompress an archive. Every batch has a known output region, so slots
/// decode straight into place without any size exchange.
pub fn decompress_pipeline<F: Float>(
    archive: &[u8],
    streams: usize,
    workers: usize,
) -> Result<Vec<F>> {
    if streams == 0 || workers == 0 {
        return Err(Error::InvalidConfig(
            "streams and workers must be positive".into(),
        ));
    }
    let header = ArchiveHeader::parse(archive)?;
    if header.precision != F::PRECISION {
        return Err(Error::PrecisionMismatch {
            archive: header.precision,
            requested: F::PRECISION,
        });
    }
    let parsed = parse_archive(archive)?;
    let chunk_n = header.chunk_n as usize;
    let total = usize::try_from(header.total_values)
        .map_err(|_| Error::corrupt_archive("value count exceeds addressable memory"))?;
    let mut out = vec![F::ZERO; total];

    let slots = streams.min(parsed.batches.len()).max(1);
    let mut assignments: Vec<Vec<(u64, &mut [F])>> = (0..slots).map(|_| Vec::new()).collect();
    for (index, region) in out.chunks_mut(header.batch_values as usize).enumerate() {
        assignments[index % slots].push((index as u64, region));
    }
    let pool = PipelineConfig {
        workers,
        ..PipelineConfig::default()
    }
    .pool()?;

    let batches = &parsed.batches;
    let pool = &pool;
    let mut failures: Vec<(u64, Error)> = thread::scope(|scope| {
        let handles: Vec<_> = assignments
            .into_iter()
            .map(|work| {
                scope.spawn(move || {
                    for (index, region) in work {
                        let view = &batches[index as usize];
                        if let Err(e) = pool.install(|| decompress_batch(view, chunk_n, region)) {
                            return Some((index, e));
                        }
                    }
                    None
                })
            })
            .collect();
        handles
            .into_iter()
            .filter_map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    });
    failures.sort_by_key(|(i, _)| *i);
    if let Some((index, source)) = failures.into_iter().next() {
        return Err(Error::CorruptBatch {
            index,
            source: Box::new(source),
        });
    }
    Ok(out)
}
