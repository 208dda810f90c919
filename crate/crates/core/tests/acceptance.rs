//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use fmdelta::bench::{self, emit, ratio_baseline, ratio_fmdelta, Algorithm, BenchConfig, BenchResult, OutputFormat};
use fmdelta::pktgen::io::{write_fmp1, write_pcap};
use fmdelta::pktgen::rng::DatasetRng;
use fmdelta::pktgen::{generate, DatasetSpec, Mode};
use fmdelta::store::{PacketArena, UpdateRequest, ENGINE_CACHE_BYTES};
use fmdelta::{compress_sequence, decompress_sequence, CodecParams, CompressedStream, RawPacket, WordSize};

const RATIO_SEED: u64 = 1;
const RATIO_PACKETS: usize = 100_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn total_len(packets: &[RawPacket]) -> usize {
    packets.iter().map(RawPacket::len).sum()
}

/// Compressed size computed straight from the record layout: a 3-byte
/// header per record, the first packet literal, every later packet as bitmap
/// plus differing words unless that is no smaller than the literal.
fn oracle_size(packets: &[RawPacket], w: usize) -> usize {
    let mut total = 3 + packets[0].len();
    for pair in packets.windows(2) {
        let (prev, curr) = (pair[0].as_bytes(), pair[1].as_bytes());
        let words = curr.len().div_ceil(w);
        let mut values = 0;
        for j in 0..words {
            let (lo, hi) = (j * w, ((j + 1) * w).min(curr.len()));
            if hi > prev.len() || prev[lo..hi] != curr[lo..hi] {
                values += hi - lo;
            }
        }
        let delta = 3 + words.div_ceil(8) + values;
        total += delta.min(3 + curr.len());
    }
    total
}

fn find(rows: &[BenchResult], algorithm: Algorithm, parameter: u32, mode: Mode) -> &BenchResult {
    rows.iter()
        .find(|r| r.algorithm == algorithm && r.parameter == parameter && r.mode == mode)
        .expect("bench row")
}

fn ratio_fm(ds: &Datasets) -> Outcome {
    let r = ratio_fmdelta(&ds.ordered, 2, Mode::Ordered).unwrap();
    let oracle = oracle_size(&ds.ordered, 2);
    let pass = within(r.ratio, 2.6, 0.3) && oracle as u64 == r.compressed_bytes;
    outcome(
        pass,
        format!(
            "fm-delta w=2 ordered seed={RATIO_SEED} n={RATIO_PACKETS}: ratio {:.4} (target 2.6 +/- 0.3), compressed {} bytes, layout oracle {} bytes",
            r.ratio, r.compressed_bytes, oracle
        ),
    )
}

fn ratio_base(ds: &Datasets, rows: &[BenchResult]) -> Outcome {
    let r = ratio_baseline(&ds.ordered, 9, Mode::Ordered).unwrap();
    let level9 = within(r.ratio, 2.9, 0.3);
    let means: Vec<f64> = (1..=9).map(|l| find(rows, Algorithm::Baseline, l, Mode::Ordered).ratio).collect();
    let drops: Vec<String> = means
        .windows(2)
        .enumerate()
        .filter(|(_, m)| m[1] < m[0])
        .map(|(i, m)| format!("z{}={:.4} > z{}={:.4}", i + 1, m[0], i + 2, m[1]))
        .collect();
    let curve: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
    outcome(
        level9 && drops.is_empty(),
        format!(
            "baseline level 9 ordered seed={RATIO_SEED}: ratio {:.4} (target 2.9 +/- 0.3, {}); mean over 3 seeds, levels 1..9: [{}], monotone: {}",
            r.ratio,
            if level9 { "ok" } else { "out of range" },
            curve.join(", "),
            if drops.is_empty() { "yes".to_string() } else { format!("no ({})", drops.join(", ")) }
        ),
    )
}

fn word_peak(rows: &[BenchResult]) -> Outcome {
    let m = |w| find(rows, Algorithm::FmDelta, w, Mode::Ordered).ratio;
    let others: Vec<String> = [8, 16].iter().map(|&w| format!("w={w} {:.4}", m(w))).collect();
    outcome(
        m(2) > m(1) && m(2) > m(4),
        format!(
            "mean ordered fm-delta over 3 seeds: w=2 {:.4} vs w=1 {:.4}, w=4 {:.4} (reported: {})",
            m(2),
            m(1),
            m(4),
            others.join(", ")
        ),
    )
}

fn ordered_dominance(rows: &[BenchResult]) -> Outcome {
    let pair = |a, p| (find(rows, a, p, Mode::Ordered).ratio, find(rows, a, p, Mode::Random).ratio);
    let (fo, fr) = pair(Algorithm::FmDelta, 2);
    let (bo, br) = pair(Algorithm::Baseline, 9);
    outcome(
        fo >= fr && bo >= br,
        format!("mean over 3 seeds: fm-delta w=2 ordered {fo:.4} vs random {fr:.4}; baseline level 9 ordered {bo:.4} vs random {br:.4}"),
    )
}

fn random_len(rng: &mut DatasetRng) -> usize {
    match rng.below(4) {
        0 => rng.range_inclusive(1, 16) as usize,
        1 => rng.range_inclusive(17, 256) as usize,
        2 => rng.range_inclusive(257, 1600) as usize,
        _ => rng.range_inclusive(1601, 9216) as usize,
    }
}

fn random_bytes(rng: &mut DatasetRng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.u8()).collect()
}

/// Sequence where each packet is a fresh random packet or an edited copy of
/// its predecessor (byte changes, runs, growth or truncation).
fn random_sequence(rng: &mut DatasetRng) -> Vec<RawPacket> {
    let count = rng.range_inclusive(1, 12) as usize;
    let mut cur = {
        let len = random_len(rng);
        random_bytes(rng, len)
    };
    let mut seq = Vec::with_capacity(count);
    for _ in 0..count {
        if !seq.is_empty() {
            match rng.below(5) {
                0 => {
                    let len = random_len(rng);
                    cur = random_bytes(rng, len);
                }
                1 => {
                    let len = random_len(rng);
                    cur.resize(len, rng.u8());
                }
                2 => {
                    let at = rng.below(cur.len() as u32) as usize;
                    let run = (rng.range_inclusive(1, 64) as usize).min(cur.len() - at);
                    let fill = rng.u8();
                    cur[at..at + run].fill(fill);
                }
                _ => {
                    for _ in 0..rng.range_inclusive(1, 8) {
                        let at = rng.below(cur.len() as u32) as usize;
                        cur[at] = rng.u8();
                    }
                }
            }
        }
        seq.push(RawPacket::new(cur.clone()).unwrap());
    }
    seq
}

fn roundtrip() -> Outcome {
    const SEQUENCES: u64 = 1000;
    let mut failures = Vec::new();
    let (mut checks, mut min_len, mut max_len) = (0, usize::MAX, 0);
    for s in 0..SEQUENCES {
        let mut rng = DatasetRng::new(0xACCE_5500 + s);
        let mut seq = random_sequence(&mut rng);
        // Pin the length extremes into the corpus.
        if s == 0 {
            seq.push(RawPacket::new(vec![0x42]).unwrap());
            seq.push(RawPacket::new(vec![0x42; 9216]).unwrap());
            seq.push(RawPacket::new(vec![0x43]).unwrap());
        }
        for p in &seq {
            min_len = min_len.min(p.len());
            max_len = max_len.max(p.len());
        }
        for w in WordSize::ALL {
            for interval in [1, 2, 10, seq.len() as u32] {
                let params = CodecParams::new(w, interval).unwrap();
                let ok = compress_sequence(&seq, params)
                    .ok()
                    .and_then(|st| CompressedStream::from_bytes(&st.to_bytes()).ok())
                    .and_then(|st| decompress_sequence(&st).ok())
                    .is_some_and(|back| back == seq);
                checks += 1;
                if !ok {
                    failures.push(format!("seq {s} w={w} E={interval}"));
                }
            }
        }
    }
    outcome(
        failures.is_empty() && min_len == 1 && max_len == 9216,
        format!(
            "{SEQUENCES} sequences x 5 word sizes x E in {{1,2,10,N}} = {checks} roundtrips, lengths {min_len}..={max_len}, failures {}{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn splices() -> Outcome {
    const SCRIPTS: u64 = 100;
    const OPS: usize = 25;
    let mut mismatches = Vec::new();
    let (mut ops_done, mut peak_bytes, mut peak_records, mut largest) = (0, 0, 0, 0);
    for s in 0..SCRIPTS {
        let mut rng = DatasetRng::new(0x5B11_CE00 + s);
        let n = 2 * rng.range_inclusive(1, 500) as usize;
        largest = largest.max(n);
        let mode = if s % 2 == 0 { Mode::Ordered } else { Mode::Random };
        let initial = generate(&DatasetSpec::new(n, s + 1, mode)).unwrap();
        let donors = generate(&DatasetSpec::new(64, s + 1000, Mode::Random)).unwrap();
        let w = WordSize::ALL[s as usize % 5];
        let params = match s % 4 {
            0 => CodecParams::new(w, 1).unwrap(),
            1 => CodecParams::new(w, 2).unwrap(),
            2 => CodecParams::new(w, 10).unwrap(),
            _ => CodecParams::single_entry(w, n),
        };
        let mut arena = PacketArena::load(&initial, params, 1 << 20).unwrap();
        let mut model = initial;
        for step in 0..OPS {
            let remove = model.len() > 1 && rng.below(2) == 0;
            let req: UpdateRequest = if remove {
                let k = rng.range_inclusive(1, model.len() as u32) as usize;
                model.remove(k - 1);
                arena.prepare_removal(k).unwrap()
            } else {
                let k = rng.range_inclusive(1, model.len() as u32 + 1) as usize;
                let p = if rng.below(2) == 0 {
                    rng.choose(&donors).clone()
                } else {
                    let mut b = model[(k - 1).min(model.len() - 1)].as_bytes().to_vec();
                    let at = rng.below(b.len() as u32) as usize;
                    b[at] ^= 0x5A;
                    RawPacket::new(b).unwrap()
                };
                model.insert(k - 1, p.clone());
                arena.prepare_insertion(k, p).unwrap()
            };
            let mut emitted: Vec<RawPacket> = Vec::new();
            let report = arena.sweep_with_update(&mut emitted, req).unwrap();
            ops_done += 1;
            peak_bytes = peak_bytes.max(report.peak_cache_bytes);
            peak_records = peak_records.max(report.peak_cache_records);
            let rebuilt = PacketArena::load(&model, *arena.params(), 1 << 20).unwrap();
            let decoded = arena.packets().unwrap();
            if emitted != model || decoded != model || arena.records_bytes() != rebuilt.records_bytes() {
                mismatches.push(format!("script {s} step {step}"));
            }
        }
    }
    outcome(
        mismatches.is_empty() && peak_bytes <= ENGINE_CACHE_BYTES,
        format!(
            "{SCRIPTS} scripts, {ops_done} operations, arenas up to {largest} packets: mismatches {}, no-overwrite assertion silent, peak engine cache {peak_bytes} bytes / {peak_records} records (bound {ENGINE_CACHE_BYTES} bytes = 2 maximum-size records)",
            mismatches.len()
        ),
    )
}

fn random_access() -> Outcome {
    let packets = generate(&DatasetSpec::new(1000, 7, Mode::Ordered)).unwrap();
    let params = CodecParams::new(WordSize::default(), 10).unwrap();
    let mut arena = PacketArena::load(&packets, params, 1 << 20).unwrap();
    let mut emitted: Vec<RawPacket> = Vec::new();
    arena.sweep(&mut emitted).unwrap();
    let (mut worst, mut bad) = (0, Vec::new());
    for k in 1..=1000 {
        let (p, reads) = arena.random_access(k).unwrap();
        worst = worst.max(reads);
        if reads > 10 || reads != (k - 1) % 10 + 1 || p != emitted[k - 1] {
            bad.push(k);
        }
    }
    outcome(
        bad.is_empty() && emitted.len() == 1000,
        format!("E=10, 1000 packets: max record reads {worst}, indices violating bound or sweep emission: {}", bad.len()),
    )
}

fn footprint() -> Outcome {
    let packets = generate(&DatasetSpec::new(65_536, RATIO_SEED, Mode::Ordered)).unwrap();
    let raw = total_len(&packets);
    let params = CodecParams::single_entry(WordSize::default(), packets.len());
    let arena = PacketArena::load(&packets, params, raw).unwrap();
    let limit = raw as f64 / 2.3;
    outcome(
        arena.used_bytes() as f64 <= limit,
        format!(
            "65536 ordered packets, w=2: {raw} raw bytes -> {} arena bytes (limit {:.0}, factor {:.4})",
            arena.used_bytes(),
            limit,
            raw as f64 / arena.used_bytes() as f64
        ),
    )
}

fn determinism() -> Outcome {
    let spec = DatasetSpec::new(20_000, 99, Mode::Random);
    let artefacts = || {
        let packets = generate(&spec).unwrap();
        let stream = compress_sequence(&packets, CodecParams::new(WordSize::default(), 10).unwrap()).unwrap();
        (write_fmp1(&packets), write_pcap(&packets), stream.to_bytes())
    };
    let (a, b) = (artefacts(), artefacts());

    let config = BenchConfig {
        dataset: DatasetSpec::new(4_000, 5, Mode::Ordered),
        repetitions: 2,
        ..BenchConfig::default()
    };
    let csv = || emit(&bench::run(&config).unwrap(), OutputFormat::Csv).unwrap();
    std::env::set_var(bench::THREADS_ENV, "1");
    let single = csv();
    std::env::remove_var(bench::THREADS_ENV);
    let pooled = csv();
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2, single == pooled];
    outcome(
        same.iter().all(|s| *s),
        format!(
            "two runs: dataset fmp1 {}, pcap {}, stream {}, bench csv (1 thread vs pool) {}",
            verdict(same[0]),
            verdict(same[1]),
            verdict(same[2]),
            verdict(same[3])
        ),
    )
}

fn verdict(same: bool) -> &'static str {
    if same {
        "identical"
    } else {
        "DIFFERENT"
    }
}

struct Datasets {
    ordered: Vec<RawPacket>,
}

fn run(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    println!(
        "{} criterion {id} {name}: {} [{:.1}s]",
        if result.pass { "PASS" } else { "FAIL" },
        result.detail,
        start.elapsed().as_secs_f64()
    );
    result.pass
}

fn main() -> ExitCode {
    let ds = Datasets {
        ordered: generate(&DatasetSpec::new(RATIO_PACKETS, RATIO_SEED, Mode::Ordered)).unwrap(),
    };
    let config = BenchConfig {
        dataset: DatasetSpec::new(RATIO_PACKETS, RATIO_SEED, Mode::Ordered),
        repetitions: 3,
        ..BenchConfig::default()
    };
    let start = Instant::now();
    let rows = bench::run(&config).unwrap();
    println!(
        "bench grid: {} rows, {} packets, seeds {}..={} [{:.1}s]",
        rows.len(),
        RATIO_PACKETS,
        RATIO_SEED,
        RATIO_SEED + 2,
        start.elapsed().as_secs_f64()
    );

    let results = [
        run(1, "fm-delta ratio", || ratio_fm(&ds)),
        run(2, "baseline ratio", || ratio_base(&ds, &rows)),
        run(3, "word-size peak", || word_peak(&rows)),
        run(4, "ordered dominance", || ordered_dominance(&rows)),
        run(5, "lossless roundtrip", roundtrip),
        run(6, "splice oracle", splices),
        run(7, "random-access bound", random_access),
        run(8, "memory footprint", footprint),
        run(9, "determinism", determinism),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
