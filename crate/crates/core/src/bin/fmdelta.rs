use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fmdelta::bench::{self, BenchConfig, BenchError, OutputFormat};
use fmdelta::codec::{compress_sequence, compressed_size, decompress_sequence, CodecParams, CompressedStream, STREAM_MAGIC};
use fmdelta::pktgen::io::{read_dataset, write_fmp1, write_pcap, FormatError};
use fmdelta::pktgen::{generate, DatasetSpec, Mode, PktgenError};
use fmdelta::store::{parse_script, run_script, PacketArena, ScriptError, StoreError, REPORT_CSV_HEADER, SNAPSHOT_MAGIC};
use fmdelta::{CodecError, RawPacket, WordSize};

#[derive(Parser)]
#[command(name = "fmdelta", version, about = "FM-Delta packet compression tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetFormat {
    Fmp1,
    Pcap,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic CCM/BFD dataset.
    Generate {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "ordered", value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "fmp1")]
        format: DatasetFormat,
    },
    /// Compress a dataset (FMP1 or pcap) into an FMD1 stream.
    Compress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "2", value_parser = parse_word_size)]
        word_size: WordSize,
        /// Spacing of entry points; defaults to a single one at the head.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        entry_interval: Option<u32>,
    },
    /// Decompress an FMD1 stream into a dataset.
    Decompress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "fmp1")]
        format: DatasetFormat,
    },
    /// Run a script of sweeps and splices against a simulated packet store.
    Simulate {
        /// Dataset (FMP1/pcap), FMD1 stream or FMA1 snapshot.
        #[arg(long = "in")]
        input: PathBuf,
        /// Arena size in bytes; required unless loading a snapshot.
        #[arg(long)]
        capacity: Option<usize>,
        #[arg(long)]
        script: PathBuf,
        /// Used when compressing a dataset.
        #[arg(long, default_value = "2", value_parser = parse_word_size)]
        word_size: WordSize,
        /// Used when compressing a dataset; defaults to a single entry point.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        entry_interval: Option<u32>,
        /// Write one CSV row per sweep.
        #[arg(long)]
        reports: Option<PathBuf>,
        /// Write the final arena as an FMA1 snapshot.
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
    },
    /// Compression-ratio benchmark.
    Bench {
        /// TOML bench configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_word_size(s: &str) -> Result<WordSize, String> {
    let n: usize = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    WordSize::new(n).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Data(String),
    Capacity(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Capacity(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Capacity(m) => m,
        }
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::CapacityExceeded { .. } | StoreError::CacheOverflow { .. } => Failure::Capacity(e.to_string()),
            StoreError::IndexOutOfRange { .. } | StoreError::LastPacket => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<ScriptError> for Failure {
    fn from(e: ScriptError) -> Self {
        match e {
            ScriptError::Parse { .. } => Failure::Usage(e.to_string()),
            ScriptError::Store { line, source } => match Failure::from(source) {
                Failure::Usage(m) => Failure::Usage(format!("line {line}: {m}")),
                Failure::Data(m) => Failure::Data(format!("line {line}: {m}")),
                Failure::Capacity(m) => Failure::Capacity(format!("line {line}: {m}")),
            },
            ScriptError::Io(e) => Failure::Data(e.to_string()),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn encode_dataset(packets: &[RawPacket], format: DatasetFormat) -> Vec<u8> {
    match format {
        DatasetFormat::Fmp1 => write_fmp1(packets),
        DatasetFormat::Pcap => write_pcap(packets),
    }
}

fn codec_params(word_size: WordSize, entry_interval: Option<u32>, count: usize) -> Result<CodecParams, Failure> {
    match entry_interval {
        Some(e) => CodecParams::new(word_size, e).map_err(|e| Failure::Usage(e.to_string())),
        None => Ok(CodecParams::single_entry(word_size, count)),
    }
}

fn total_len(packets: &[RawPacket]) -> usize {
    packets.iter().map(RawPacket::len).sum()
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::Data(e.to_string());
    match cli.command {
        Command::Generate {
            count,
            seed,
            mode,
            out: path,
            format,
        } => {
            let packets = generate(&DatasetSpec::new(count, seed, mode)).map_err(|e| match e {
                PktgenError::InvalidSpec(_) => Failure::Usage(e.to_string()),
                other => Failure::Data(other.to_string()),
            })?;
            write(&path, &encode_dataset(&packets, format))?;
            writeln!(
                out,
                "fmdelta generate ok count={} bytes={} seed={seed} mode={mode}",
                packets.len(),
                total_len(&packets)
            )
            .map_err(io_err)?;
        }
        Command::Compress {
            input,
            out: path,
            word_size,
            entry_interval,
        } => {
            let packets = read_dataset(&read(&input)?)?;
            let params = codec_params(word_size, entry_interval, packets.len())?;
            let stream = compress_sequence(&packets, params)?;
            write(&path, &stream.to_bytes())?;
            let (raw, packed) = (total_len(&packets), compressed_size(&stream));
            writeln!(
                out,
                "fmdelta compress ok count={} uncompressed_bytes={raw} compressed_bytes={packed} ratio={:.4} word_size={word_size} entry_interval={}",
                packets.len(),
                raw as f64 / packed as f64,
                params.entry_interval()
            )
            .map_err(io_err)?;
        }
        Command::Decompress { input, out: path, format } => {
            let stream = CompressedStream::from_bytes(&read(&input)?)?;
            let packets = decompress_sequence(&stream)?;
            write(&path, &encode_dataset(&packets, format))?;
            writeln!(
                out,
                "fmdelta decompress ok count={} bytes={}",
                packets.len(),
                total_len(&packets)
            )
            .map_err(io_err)?;
        }
        Command::Simulate {
            input,
            capacity,
            script,
            word_size,
            entry_interval,
            reports,
            snapshot_out,
        } => {
            let bytes = read(&input)?;
            let mut arena = if bytes.starts_with(SNAPSHOT_MAGIC) {
                let arena = PacketArena::from_bytes(&bytes)?;
                match capacity {
                    Some(c) => PacketArena::from_stream(&arena.to_stream()?, c)?,
                    None => arena,
                }
            } else {
                let capacity = capacity.ok_or_else(|| Failure::Usage("--capacity is required unless --in is an FMA1 snapshot".into()))?;
                if bytes.starts_with(STREAM_MAGIC) {
                    let stream = CompressedStream::from_bytes(&bytes)?;
                    decompress_sequence(&stream)?;
                    PacketArena::from_stream(&stream, capacity)?
                } else {
                    let packets = read_dataset(&bytes)?;
                    let params = codec_params(word_size, entry_interval, packets.len())?;
                    PacketArena::load(&packets, params, capacity)?
                }
            };
            let text = String::from_utf8(read(&script)?).map_err(|_| Failure::Usage("script is not UTF-8".into()))?;
            let ops = parse_script(&text)?;
            let sweeps = run_script(&mut arena, &ops, out)?;
            if let Some(path) = reports {
                let mut csv = format!("{REPORT_CSV_HEADER}\n");
                for r in &sweeps {
                    csv.push_str(&r.csv_row());
                    csv.push('\n');
                }
                write(&path, csv.as_bytes())?;
            }
            if let Some(path) = snapshot_out {
                write(&path, &arena.to_bytes()?)?;
            }
            writeln!(
                out,
                "fmdelta simulate ok sweeps={} count={} used_bytes={} capacity={}",
                sweeps.len(),
                arena.count(),
                arena.used_bytes(),
                arena.capacity()
            )
            .map_err(io_err)?;
        }
        Command::Bench { config, csv, plot } => {
            let config: BenchConfig = match config {
                Some(path) => {
                    let text = String::from_utf8(read(&path)?).map_err(|_| Failure::Usage("config is not UTF-8".into()))?;
                    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
                }
                None => BenchConfig::default(),
            };
            let results = bench::run(&config)?;
            let table = bench::emit(&results, OutputFormat::Csv)?;
            match &csv {
                Some(path) => write(path, &table)?,
                None => out.write_all(&table).map_err(io_err)?,
            }
            if let Some(path) = &plot {
                write(path, &bench::emit(&results, OutputFormat::SvgPlot)?)?;
            }
            let best = results
                .iter()
                .filter(|r| r.algorithm == bench::Algorithm::FmDelta && r.mode == Mode::Ordered)
                .max_by(|a, b| a.ratio.total_cmp(&b.ratio));
            let mut line = format!("fmdelta bench ok rows={}", results.len());
            if let Some(b) = best {
                line.push_str(&format!(" best_word_size={} best_ratio={:.4}", b.parameter, b.ratio));
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fmdelta: error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
