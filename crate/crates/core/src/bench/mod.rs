//! Compression-ratio benchmark: FM-Delta across word sizes against a zlib
//! baseline across levels, on ordered and random arrangements of the same
//! synthetic datasets.

mod plot;

use std::fmt;
use std::io::Write;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{compress_sequence, compressed_size, CodecError, CodecParams, RawPacket, WordSize};
use crate::pktgen::{self, io::fmp1_body, DatasetSpec, Mode, PktgenError};

/// Environment variable capping grid parallelism (0 or unset = all cores).
pub const THREADS_ENV: &str = "FMDELTA_BENCH_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "fm-delta")]
    FmDelta,
    #[serde(rename = "baseline")]
    Baseline,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::FmDelta => "fm-delta",
            Algorithm::Baseline => "baseline",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Dataset recipe; `mode` is ignored since both arrangements are run.
    pub dataset: DatasetSpec,
    pub word_sizes: Vec<usize>,
    pub baseline_levels: Vec<u32>,
    /// Number of datasets averaged, with seeds `seed`, `seed + 1`, ...
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dataset: DatasetSpec::default(),
            word_sizes: vec![1, 2, 4, 8, 16],
            baseline_levels: (1..=9).collect(),
            repetitions: 1,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.word_sizes.is_empty() {
            return bad("word_sizes must not be empty".into());
        }
        for &w in &self.word_sizes {
            WordSize::new(w).map_err(|e| BenchError::InvalidConfig(e.to_string()))?;
        }
        if let Some(l) = self.baseline_levels.iter().find(|l| !(1..=9).contains(*l)) {
            return bad(format!("baseline level {l} outside 1..=9"));
        }
        self.dataset.validate().map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }
}

/// One benchmark cell. For averaged rows `ratio` is the mean of the
/// per-dataset ratios and the byte counts are rounded means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub algorithm: Algorithm,
    /// Word size in bytes or baseline level.
    pub parameter: u32,
    pub mode: Mode,
    pub ratio: f64,
    pub uncompressed_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub repetitions: usize,
}

impl BenchResult {
    fn single(algorithm: Algorithm, parameter: u32, mode: Mode, uncompressed: u64, compressed: u64) -> Self {
        let ratio = uncompressed as f64 / compressed as f64;
        BenchResult {
            algorithm,
            parameter,
            mode,
            ratio,
            uncompressed_bytes: uncompressed,
            compressed_bytes: compressed,
            ratio_min: ratio,
            ratio_max: ratio,
            repetitions: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    InvalidConfig(String),
    #[error("empty packet set")]
    NoPackets,
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("baseline compressor failed: {0}")]
    Baseline(#[source] std::io::Error),
    #[error(transparent)]
    Dataset(#[from] PktgenError),
    #[error("{} benchmark cell(s) failed: {}", .0.len(), .0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; "))]
    Cells(Vec<CellError>),
    #[error("nothing to emit")]
    EmptyResults,
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Error)]
#[error("{algorithm} parameter={parameter} mode={mode} seed={seed}: {source}")]
pub struct CellError {
    pub algorithm: Algorithm,
    pub parameter: u32,
    pub mode: Mode,
    pub seed: u64,
    #[source]
    pub source: Box<BenchError>,
}

fn uncompressed_bytes(packets: &[RawPacket]) -> u64 {
    packets.iter().map(|p| p.len() as u64).sum()
}

/// FM-Delta with a single entry point at the head of the sequence.
pub fn ratio_fmdelta(packets: &[RawPacket], word_size: usize, mode: Mode) -> Result<BenchResult, BenchError> {
    if packets.is_empty() {
        return Err(BenchError::NoPackets);
    }
    let w = WordSize::new(word_size)?;
    let stream = compress_sequence(packets, CodecParams::single_entry(w, packets.len()))?;
    Ok(BenchResult::single(
        Algorithm::FmDelta,
        word_size as u32,
        mode,
        uncompressed_bytes(packets),
        compressed_size(&stream) as u64,
    ))
}

/// zlib over the concatenated length-prefixed packets, as one stream.
pub fn ratio_baseline(packets: &[RawPacket], level: u32, mode: Mode) -> Result<BenchResult, BenchError> {
    if packets.is_empty() {
        return Err(BenchError::NoPackets);
    }
    if !(1..=9).contains(&level) {
        return Err(BenchError::InvalidConfig(format!("baseline level {level} outside 1..=9")));
    }
    let compressed = zlib_len(&fmp1_body(packets), level).map_err(BenchError::Baseline)?;
    Ok(BenchResult::single(
        Algorithm::Baseline,
        level,
        mode,
        uncompressed_bytes(packets),
        compressed as u64,
    ))
}

pub(crate) fn zlib_len(data: &[u8], level: u32) -> std::io::Result<usize> {
    let mut enc = ZlibEncoder::new(Vec::with_capacity(data.len() / 2), Compression::new(level));
    enc.write_all(data)?;
    Ok(enc.finish()?.len())
}

#[derive(Clone, Copy)]
struct Cell {
    algorithm: Algorithm,
    parameter: u32,
    mode: Mode,
    rep: usize,
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs every (algorithm, parameter, mode) cell over `repetitions` seeds and
/// averages. Output order: FM-Delta rows then baseline rows, parameters
/// ascending as configured, ordered before random.
pub fn run(config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| BenchError::ThreadPool(e.to_string()))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &BenchConfig) -> Result<Vec<BenchResult>, BenchError> {
    let modes = [Mode::Ordered, Mode::Random];
    let seeds: Vec<u64> = (0..config.repetitions)
        .map(|r| config.dataset.seed.wrapping_add(r as u64))
        .collect();

    let datasets: Vec<Vec<Vec<RawPacket>>> = seeds
        .par_iter()
        .map(|&seed| {
            modes
                .iter()
                .map(|&mode| {
                    pktgen::generate(&DatasetSpec {
                        seed,
                        mode,
                        ..config.dataset.clone()
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::new();
    for (algorithm, params) in [
        (Algorithm::FmDelta, config.word_sizes.iter().map(|&w| w as u32).collect::<Vec<_>>()),
        (Algorithm::Baseline, config.baseline_levels.clone()),
    ] {
        for &parameter in &params {
            for mode in modes {
                for rep in 0..seeds.len() {
                    cells.push(Cell {
                        algorithm,
                        parameter,
                        mode,
                        rep,
                    });
                }
            }
        }
    }

    let outcomes: Vec<Result<BenchResult, CellError>> = cells
        .par_iter()
        .map(|c| {
            let packets = &datasets[c.rep][if c.mode == Mode::Ordered { 0 } else { 1 }];
            match c.algorithm {
                Algorithm::FmDelta => ratio_fmdelta(packets, c.parameter as usize, c.mode),
                Algorithm::Baseline => ratio_baseline(packets, c.parameter, c.mode),
            }
            .map_err(|e| CellError {
                algorithm: c.algorithm,
                parameter: c.parameter,
                mode: c.mode,
                seed: seeds[c.rep],
                source: Box::new(e),
            })
        })
        .collect();

    let mut failures = Vec::new();
    let mut singles = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(r) => singles.push(r),
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(BenchError::Cells(failures));
    }
    Ok(singles.chunks(seeds.len()).map(average).collect())
}

fn average(group: &[BenchResult]) -> BenchResult {
    let n = group.len() as f64;
    let mean_u64 = |f: fn(&BenchResult) -> u64| (group.iter().map(|r| f(r) as f64).sum::<f64>() / n).round() as u64;
    BenchResult {
        algorithm: group[0].algorithm,
        parameter: group[0].parameter,
        mode: group[0].mode,
        ratio: group.iter().map(|r| r.ratio).sum::<f64>() / n,
        uncompressed_bytes: mean_u64(|r| r.uncompressed_bytes),
        compressed_bytes: mean_u64(|r| r.compressed_bytes),
        ratio_min: group.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min),
        ratio_max: group.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max),
        repetitions: group.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    SvgPlot,
}

pub const CSV_HEADER: &str = "algorithm,parameter,mode,ratio,uncompressed_bytes,compressed_bytes,ratio_min,ratio_max";

pub fn emit(results: &[BenchResult], format: OutputFormat) -> Result<Vec<u8>, BenchError> {
    if results.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    Ok(match format {
        OutputFormat::Csv => to_csv(results).into_bytes(),
        OutputFormat::SvgPlot => plot::render(results).into_bytes(),
    })
}

fn to_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{:.6},{},{},{:.6},{:.6}\n",
            r.algorithm, r.parameter, r.mode, r.ratio, r.uncompressed_bytes, r.compressed_bytes, r.ratio_min, r.ratio_max
        ));
    }
    out
}
