//! Acceptance run: one line per criterion, nonzero exit if any criterion fails.

// Several tolerances are pinned at zero on unsigned counters.
#![allow(clippy::absurd_extreme_comparisons)]

use std::process::ExitCode;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use falcon_core::chunk::{compress_chunk, decompress_chunk, parse_chunk_layout};
use falcon_core::container::{parse_archive, CodecConfig, HEADER_LEN};
use falcon_core::numeric::{dp_ds_calculate, scaled_residual, DecimalMeta, Float, Precision};
use falcon_core::oracle::{dp_oracle, naive_chunk_codec, Synthetic, SyntheticKind, SyntheticSpec};
use falcon_core::pipeline::{
    compress_slice, compress_values, decompress_pipeline, default_workers, PipelineConfig,
    PipelineReport, SlotState, Stage,
};
use falcon_core::transform::DEFAULT_CHUNK_N;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned sizes and tolerances.
const ROUND_TRIP_VALUES: u64 = 100_000_000;
const ROUND_TRIP_BLOCK: u64 = 4_198_400;
const ALLOWED_MISMATCHES: u64 = 0;
const DP_SAMPLES: u64 = 1_000_000;
const ALLOWED_DP_DISAGREEMENTS: u64 = 0;
const BOUND_SAMPLES: u64 = 100_000;
const ALLOWED_BOUND_VIOLATIONS: u64 = 0;
const FORMAT_CHUNKS: usize = 10_000;
const FORMAT_CHUNKS_SINGLE: usize = 2_000;
const DELAY_TRIALS: u64 = 100;
const TRIAL_TIMEOUT: Duration = Duration::from_secs(120);
const RATIO_VALUES: usize = 10_000_000;
const RATIO_LIMIT: f64 = 0.15;
const OUTLIER_RATIO_INCREASE_LIMIT: f64 = 0.02;
const THROUGHPUT_BYTES: usize = 256 << 20;
const THROUGHPUT_MIN_CORES: usize = 4;
const THROUGHPUT_TIME_RATIO_LIMIT: f64 = 0.8;

enum Status {
    Pass,
    Fail,
    NotApplicable,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Outcome {
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

fn bits<F: Float>(v: F) -> u64 {
    v.to_lane()
}

fn mismatches<F: Float>(a: &[F], b: &[F]) -> u64 {
    if a.len() != b.len() {
        return a.len().max(b.len()) as u64;
    }
    a.iter()
        .zip(b)
        .filter(|(x, y)| bits(**x) != bits(**y))
        .count() as u64
}

// ---------------------------------------------------------------- round trip

fn round_trip_plan(precision: Precision) -> Vec<(SyntheticKind, Vec<u8>)> {
    let fixed = match precision {
        Precision::Double => vec![2, 0, 5, 9, 15, 22],
        Precision::Single => vec![2, 0, 5, 9, 10, 1],
    };
    vec![
        (SyntheticKind::UniformBits, vec![0]),
        (SyntheticKind::FixedDecimal, fixed),
        (SyntheticKind::SignFlip, vec![1, 3]),
        (SyntheticKind::OutlierInjected, vec![2, 4]),
    ]
}

fn round_trip<F: Float>() -> Outcome {
    let plan = round_trip_plan(F::PRECISION);
    let per_kind = ROUND_TRIP_VALUES / plan.len() as u64;
    let config = PipelineConfig::default();
    let mut total = 0u64;
    let mut bad = 0u64;
    let mut archive_bytes = 0u64;
    let start = Instant::now();
    for (k, (kind, places)) in plan.iter().enumerate() {
        let mut left = per_kind;
        let mut block = 0u64;
        while left > 0 {
            let count = left.min(ROUND_TRIP_BLOCK);
            let dp = places[block as usize % places.len()];
            let spec = SyntheticSpec::new(*kind, dp, count, (k as u64) << 32 | block);
            let values: Vec<F> = Synthetic::new(spec).collect();
            let (archive, _) = compress_slice(&values, &config).expect("compress");
            let back: Vec<F> =
                decompress_pipeline(&archive, config.streams, config.workers).expect("decompress");
            bad += mismatches(&values, &back);
            total += count;
            archive_bytes += archive.len() as u64;
            left -= count;
            block += 1;
        }
    }
    let ratio = archive_bytes as f64 / (total * F::PRECISION.value_bytes() as u64) as f64;
    Outcome::check(
        total == ROUND_TRIP_VALUES && bad <= ALLOWED_MISMATCHES,
        format!(
            "{total} {} values over 4 generators, {bad} mismatches, overall ratio {ratio:.4}, {:.1}s",
            F::PRECISION,
            start.elapsed().as_secs_f64()
        ),
    )
}

// ------------------------------------------------------------ decimal places

fn random_decimal<F: Float>(rng: &mut ChaCha8Rng) -> F {
    let prec = F::PRECISION;
    let digits = rng.gen_range(1..=prec.max_beta() as u32);
    let lo = 10i64.pow(digits - 1);
    let d = rng.gen_range(lo..lo * 10);
    let a = rng.gen_range(0..=prec.max_alpha() as u32);
    let v = F::from_i64(d) / F::pow10(a);
    if rng.gen::<bool>() {
        F::ZERO - v
    } else {
        v
    }
}

fn expect_meta<F: Float>(v: F, alpha: u8, beta: u8, exception: bool) -> Option<String> {
    let got = dp_ds_calculate(v);
    let want = DecimalMeta {
        alpha,
        beta,
        is_exception: exception,
    };
    (got != want).then(|| format!("{v:e}: got {got:?}"))
}

fn decimal_places<F: Float>(fixed: &[(F, u8, u8, bool)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec1_3a15 ^ F::PRECISION.code() as u64);
    let mut checked = 0u64;
    let mut skipped = 0u64;
    let mut disagreements = 0u64;
    let mut first = None;
    while checked < DP_SAMPLES {
        let v: F = random_decimal(&mut rng);
        let Some((alpha, beta)) = dp_oracle(v) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        if let Some(msg) = expect_meta(v, alpha, beta, false) {
            disagreements += 1;
            first.get_or_insert(msg);
        }
    }
    let fixed_errors: Vec<String> = fixed
        .iter()
        .filter_map(|&(v, a, b, e)| expect_meta(v, a, b, e))
        .collect();
    let mut detail = format!(
        "{checked} random {} decimals vs string oracle ({skipped} out-of-bound draws skipped), {disagreements} disagreements, {} fixed values checked",
        F::PRECISION,
        fixed.len()
    );
    if let Some(m) = first {
        detail += &format!("; first disagreement {m}");
    }
    for e in &fixed_errors {
        detail += &format!("; fixed value wrong {e}");
    }
    Outcome::check(
        disagreements <= ALLOWED_DP_DISAGREEMENTS && fixed_errors.is_empty(),
        detail,
    )
}

fn reference_values_double() -> Vec<(f64, u8, u8, bool)> {
    vec![
        (0.0, 0, 0, false),
        (-0.0314, 4, 3, false),
        (1.11, 2, 3, false),
        (111.0, 0, 3, false),
        (1.02, 2, 3, false),
        (9.110900773177071, 23, 16, true),
        (1.23456789876543e-9, 23, 16, true),
    ]
}

fn reference_values_single() -> Vec<(f32, u8, u8, bool)> {
    vec![
        (0.0, 0, 0, false),
        (-0.0314, 4, 3, false),
        (1.11, 2, 3, false),
        (111.0, 0, 3, false),
        (1.02, 2, 3, false),
        (1.234567, 11, 7, true),
        (1.5e-11, 11, 7, true),
    ]
}

// --------------------------------------------------------- residual bound

fn residual_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e0_4e4);
    let mut violations = 0u64;
    let mut first = None;
    let mut oracle_mismatch = 0u64;
    for _ in 0..BOUND_SAMPLES {
        let alpha = rng.gen_range(1..=15u32);
        let digits = rng.gen_range(1..=15u32);
        let lo = 10i64.pow(digits - 1);
        let mut d = rng.gen_range(lo..lo * 10);
        if d % 10 == 0 {
            d += 1;
        }
        let v = d as f64 / 10f64.powi(alpha as i32);
        if dp_oracle(v).map(|m| m.0 as u32) != Some(alpha) {
            oracle_mismatch += 1;
            continue;
        }
        for i in 0..=alpha {
            let (eps, mu) = scaled_residual(v, i);
            let ok = if i < alpha { eps > mu } else { eps <= mu };
            if !ok {
                violations += 1;
                first.get_or_insert(format!("v={v:e} i={i} eps={eps:e} mu={mu:e}"));
            }
        }
    }
    let mut detail = format!(
        "{BOUND_SAMPLES} values with alpha in [1, 15] and beta <= 15, {violations} violations, {oracle_mismatch} samples whose true alpha differed from the draw"
    );
    if let Some(f) = first {
        detail += &format!("; first {f}");
    }
    Outcome::check(
        violations <= ALLOWED_BOUND_VIOLATIONS && oracle_mismatch == 0,
        detail,
    )
}

// ------------------------------------------------------------- chunk format

fn random_chunk<F: Float>(k: usize) -> Vec<F> {
    let kind = SyntheticKind::ALL[k % SyntheticKind::ALL.len()];
    let n = if k % 5 == 4 {
        65 + 64 * (k / 5 % 4)
    } else {
        DEFAULT_CHUNK_N
    };
    let dp = (k / 7 % 8) as u8;
    let mut values: Vec<F> =
        Synthetic::new(SyntheticSpec::new(kind, dp, n as u64, k as u64)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
    match k % 11 {
        // a lone special value forces the whole chunk to bitwise coding
        3 => {
            values[rng.gen_range(0..n)] =
                F::from_lane(F::ZERO.to_lane() | 1 << (F::PRECISION.lane_bits() - 1))
        }
        7 => {
            values[rng.gen_range(0..n)] = F::from_lane(u64::MAX >> (64 - F::PRECISION.lane_bits()))
        }
        9 => values.iter_mut().for_each(|v| *v = F::ZERO),
        _ => {}
    }
    values
}

fn fig9_values() -> Vec<f64> {
    let mut v = vec![0.0f64, 300.0];
    for k in 1..64i64 {
        let s = (k * 37) % 255 - 127;
        v.push(v[k as usize] + s as f64);
    }
    v
}

const GOLDEN_ZERO: &[u8] = include_bytes!("golden/zero_chunk_n1025.bin");
const GOLDEN_PLANES: &[u8] = include_bytes!("golden/plane_layout_n65.bin");

fn chunk_format() -> Outcome {
    let mut differ = 0usize;
    let mut first = None;
    for k in 0..FORMAT_CHUNKS {
        let chunk: Vec<f64> = random_chunk(k);
        if naive_chunk_codec(&chunk) != compress_chunk(&chunk).into_bytes() {
            differ += 1;
            first.get_or_insert(k);
        }
    }
    let mut differ_single = 0usize;
    for k in 0..FORMAT_CHUNKS_SINGLE {
        let chunk: Vec<f32> = random_chunk(k);
        if naive_chunk_codec(&chunk) != compress_chunk(&chunk).into_bytes() {
            differ_single += 1;
            first.get_or_insert(k);
        }
    }

    let zeros = compress_chunk(&vec![0.0f64; DEFAULT_CHUNK_N]).into_bytes();
    let zero_ok = zeros == GOLDEN_ZERO && zeros.len() == 11 && zeros.iter().all(|&b| b == 0);
    let fig = fig9_values();
    let planes = compress_chunk(&fig).into_bytes();
    let layout = parse_chunk_layout::<f64>(&planes).expect("golden layout parses");
    let back: Vec<f64> = decompress_chunk(&planes, 65, 65).expect("golden decodes");
    // top row: sparse, 1-byte bitmap 10000000 then a single payload byte
    let top_row_ok = layout.width() == 10
        && planes[layout.prefix_len] == 0b1000_0000
        && planes[layout.prefix_len + 1] != 0;
    let planes_ok = planes == GOLDEN_PLANES && top_row_ok && mismatches(&fig, &back) == 0;

    let mut detail = format!(
        "{FORMAT_CHUNKS} double chunks differ in {differ}, {FORMAT_CHUNKS_SINGLE} single chunks differ in {differ_single}; golden all-zero chunk {}, golden n=65 w=10 layout {}",
        if zero_ok { "matches" } else { "DIFFERS" },
        if planes_ok { "matches" } else { "DIFFERS" }
    );
    if let Some(k) = first {
        detail += &format!("; first differing chunk index {k}");
    }
    Outcome::check(
        differ == 0 && differ_single == 0 && zero_ok && planes_ok,
        detail,
    )
}

// ------------------------------------------------------------------ pipeline

fn launch_ordered(report: &PipelineReport) -> bool {
    let mut expect = 0u64;
    for (i, p) in report.placements.iter().enumerate() {
        if p.batch != i as u64 || p.offset != expect {
            return false;
        }
        expect += p.size;
    }
    expect == report.total_size
}

fn legal_transitions(report: &PipelineReport) -> bool {
    report.transitions.iter().all(|t| {
        matches!(
            (t.from, t.to),
            (SlotState::Idle, SlotState::MPend)
                | (SlotState::MPend, SlotState::PPend)
                | (SlotState::PPend, SlotState::Idle)
        )
    })
}

fn walk(count: u64, seed: u64) -> Vec<f64> {
    Synthetic::new(SyntheticSpec::new(
        SyntheticKind::OutlierInjected,
        2,
        count,
        seed,
    ))
    .collect()
}

fn pipeline_determinism() -> Outcome {
    let codec = CodecConfig {
        chunk_n: DEFAULT_CHUNK_N,
        batch_values: DEFAULT_CHUNK_N * 256,
    };
    let values = walk(2_500_000, 5);
    let reference = compress_values(&values, codec).expect("sequential");
    let mut identical = true;
    for streams in [1, 2, 16] {
        let cfg = PipelineConfig {
            codec,
            streams,
            ..PipelineConfig::default()
        };
        let (bytes, report) = compress_slice(&values, &cfg).expect("pipeline");
        identical &= bytes == reference && launch_ordered(&report);
    }

    let small = CodecConfig {
        chunk_n: 65,
        batch_values: 65 * 8,
    };
    let trial_values = Arc::new(walk(65 * 8 * 12 + 77, 6));
    let trial_reference = compress_values(&trial_values, small).expect("sequential");
    let mut passed = 0u64;
    let mut starved = 0u64;
    let mut forced_waits = 0usize;
    let mut failures = Vec::new();
    for trial in 0..DELAY_TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let streams = match trial % 4 {
            0 => 1,
            1 => 2,
            2 => 16,
            _ => rng.gen_range(3..=15),
        };
        let starve = trial % 10 == 0;
        starved += starve as u64;
        let hook = Arc::new(move |stage: Stage, slot: usize, batch: u64| {
            let micros = if starve {
                if slot == 0 {
                    2_000
                } else {
                    0
                }
            } else {
                let mut r = ChaCha8Rng::seed_from_u64(
                    trial << 40 ^ batch << 8 ^ (slot as u64) << 20 ^ stage as u64,
                );
                r.gen_range(0..400)
            };
            thread::sleep(Duration::from_micros(micros));
        });
        let cfg = PipelineConfig {
            codec: small,
            streams,
            workers: 1 + trial as usize % 3,
            hook: Some(hook),
        };
        let (tx, rx) = mpsc::channel();
        let data = trial_values.clone();
        thread::spawn(move || {
            let _ = tx.send(compress_slice(&data, &cfg));
        });
        match rx.recv_timeout(TRIAL_TIMEOUT) {
            Ok(Ok((bytes, report))) => {
                forced_waits += report.forced_waits;
                if bytes == trial_reference && launch_ordered(&report) && legal_transitions(&report)
                {
                    passed += 1;
                } else {
                    failures.push(format!("trial {trial} output or order differs"));
                }
            }
            Ok(Err(e)) => failures.push(format!("trial {trial} failed: {e}")),
            Err(_) => failures.push(format!("trial {trial} did not terminate")),
        }
    }
    let mut detail = format!(
        "streams 1/2/16 byte-identical: {}; {passed}/{DELAY_TRIALS} randomized delay trials terminated with launch-ordered offsets ({starved} starved-slot schedules, {forced_waits} blocking fallbacks taken)",
        if identical { "yes" } else { "NO" }
    );
    if let Some(f) = failures.first() {
        detail += &format!("; {f}");
    }
    Outcome::check(identical && passed == DELAY_TRIALS, detail)
}

// --------------------------------------------------------------------- ratio

fn container_overhead(n_values: usize, codec: CodecConfig) -> usize {
    let batches = n_values.div_ceil(codec.batch_values);
    let chunks = n_values.div_ceil(codec.chunk_n);
    HEADER_LEN + 4 * batches + 4 * chunks
}

/// Archive size recomputed from the naive encoder, plus the dense-only size.
fn brute_force_sizes(values: &[f64], codec: CodecConfig) -> (usize, usize) {
    let mut adaptive = 0;
    let mut dense_only = 0;
    for chunk in values.chunks(codec.chunk_n) {
        let mut padded = chunk.to_vec();
        padded.resize(codec.chunk_n, 0.0);
        let bytes = naive_chunk_codec(&padded);
        let w = bytes[10] as usize;
        adaptive += bytes.len();
        dense_only += 11 + w.div_ceil(8) + w * (codec.chunk_n - 1) / 8;
    }
    let overhead = container_overhead(values.len(), codec);
    (adaptive + overhead, dense_only + overhead)
}

fn compression_ratio() -> Outcome {
    let spec = SyntheticSpec::new(SyntheticKind::RandomWalk, 2, RATIO_VALUES as u64, 2024);
    let values: Vec<f64> = Synthetic::new(spec).collect();
    let config = PipelineConfig::default();
    let raw = (values.len() * 8) as f64;
    let (plain, _) = compress_slice(&values, &config).expect("compress");
    let ratio = plain.len() as f64 / raw;
    let beats_raw = plain.len() < values.len() * 8;

    let mut spiky = values.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for chunk in spiky.chunks_mut(DEFAULT_CHUNK_N) {
        let i = rng.gen_range(0..chunk.len());
        let units = (chunk[i] * 100.0).round() as i64;
        let spike = rng.gen_range(64..=128) * 127 * if rng.gen::<bool>() { 1 } else { -1 };
        chunk[i] = (units + spike) as f64 / 100.0;
    }
    let (outlier, _) = compress_slice(&spiky, &config).expect("compress");
    let outlier_ratio = outlier.len() as f64 / raw;
    let increase = outlier_ratio - ratio;
    let (brute, dense_only) = brute_force_sizes(&spiky, config.codec);
    let accounted = brute == outlier.len();
    let decoded = parse_archive(&outlier).is_ok();

    Outcome::check(
        ratio <= RATIO_LIMIT && beats_raw && increase < OUTLIER_RATIO_INCREASE_LIMIT && accounted && decoded,
        format!(
            "random walk ratio {ratio:.4} (limit {RATIO_LIMIT}); with one outlier per chunk {outlier_ratio:.4}, increase {increase:.4} (limit {OUTLIER_RATIO_INCREASE_LIMIT}); brute-force size {} {} archive {}; dense-only coding would give {:.4}",
            brute,
            if accounted { "==" } else { "!=" },
            outlier.len(),
            dense_only as f64 / raw
        ),
    )
}

// ---------------------------------------------------------------- throughput

fn throughput() -> Outcome {
    let cores = default_workers();
    let count = THROUGHPUT_BYTES / 8;
    let values: Vec<f64> = Synthetic::new(SyntheticSpec::new(
        SyntheticKind::RandomWalk,
        2,
        count as u64,
        88,
    ))
    .collect();
    let time = |streams: usize| {
        let cfg = PipelineConfig {
            streams,
            workers: cores,
            ..PipelineConfig::default()
        };
        let start = Instant::now();
        let (bytes, _) = compress_slice(&values, &cfg).expect("compress");
        (start.elapsed().as_secs_f64(), bytes)
    };
    let (t1, a1) = time(1);
    let (t16, a16) = time(16);
    let rel = t16 / t1;
    let detail = format!(
        "{} MiB input, 1 stream {t1:.2}s, 16 streams {t16:.2}s, ratio {rel:.3} (limit {THROUGHPUT_TIME_RATIO_LIMIT}), {cores} cores, archives identical: {}",
        THROUGHPUT_BYTES >> 20,
        a1 == a16
    );
    if cores < THROUGHPUT_MIN_CORES {
        return Outcome {
            status: Status::NotApplicable,
            detail: format!("{detail}; needs at least {THROUGHPUT_MIN_CORES} cores"),
        };
    }
    Outcome::check(rel <= THROUGHPUT_TIME_RATIO_LIMIT && a1 == a16, detail)
}

// ---------------------------------------------------------------------- main

type Criterion = (u8, &'static str, Box<dyn Fn() -> Outcome>);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (
            1,
            "lossless round trip (double)",
            Box::new(round_trip::<f64>),
        ),
        (
            2,
            "decimal place exactness (double)",
            Box::new(|| decimal_places(&reference_values_double())),
        ),
        (3, "scaled residual bound", Box::new(residual_bound)),
        (4, "chunk format exactness", Box::new(chunk_format)),
        (
            5,
            "pipeline determinism and liveness",
            Box::new(pipeline_determinism),
        ),
        (
            6,
            "compression ratio and outlier sparsity",
            Box::new(compression_ratio),
        ),
        (
            7,
            "single precision round trip and decimal places",
            Box::new(|| {
                let rt = round_trip::<f32>();
                let dp = decimal_places(&reference_values_single());
                let ok = matches!(rt.status, Status::Pass) && matches!(dp.status, Status::Pass);
                Outcome::check(ok, format!("{}; {}", rt.detail, dp.detail))
            }),
        ),
        (8, "pipelined throughput", Box::new(throughput)),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let outcome = run();
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::NotApplicable => "N/A",
        };
        println!("criterion {id} [{name}]: {tag}: {}", outcome.detail);
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all applicable criteria passed");
        ExitCode::SUCCESS
    }
}
