mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tmfocus::Error;

#[derive(Parser)]
#[command(name = "tmfocus", version, about = "Hypersparse traffic matrix pipeline")]
struct Cli {
    /// Worker threads (default: all cores). Output bytes do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic heavy-tail traffic as a PCAP capture.
    Synth(SynthArgs),
    /// Window PCAP captures into traffic matrices and archive them.
    Build(BuildArgs),
    /// Compute quantities, histograms, fits and focus tables over a window hierarchy.
    Analyze(AnalyzeArgs),
    /// Range focus tables for both byte orders and the endianness verdict.
    Focus(FocusArgs),
    /// Link-degree histograms and Zipf-Mandelbrot fits.
    Calibrate(CalibrateArgs),
    /// ROC curves of the detection model.
    Roc(RocArgs),
    /// Matrix construction throughput with and without anonymization.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mix {
    Gateway,
    Uniform,
}

#[derive(Args)]
struct SynthArgs {
    /// Packets to generate.
    #[arg(long)]
    count: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gateway")]
    mix: Mix,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Distinct addresses drawn per range for sources and for destinations.
    #[arg(long, default_value_t = 1 << 14)]
    pool: u32,
    /// Range configuration (`name cidr` lines).
    #[arg(long)]
    ranges: Option<PathBuf>,
    /// Output capture, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnonArg {
    Off,
    Direct,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EndianArg {
    Big,
    Little,
    Auto,
}

#[derive(Args)]
struct KeyArgs {
    /// File holding the 32-byte anonymization key (raw or 64 hex digits).
    /// Falls back to the TMFOCUS_ANON_KEY_FILE environment variable.
    #[arg(long)]
    key_file: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    /// PCAP inputs read as one stream; `-` or none reads stdin.
    inputs: Vec<PathBuf>,
    #[arg(short = 'o', long, default_value = ".")]
    out_dir: PathBuf,
    /// Valid packets per window; a power of two of at least 1024.
    #[arg(long, default_value_t = 1 << 17)]
    nv: u64,
    #[arg(long, value_enum, default_value = "off")]
    anon: AnonArg,
    #[command(flatten)]
    key: KeyArgs,
    /// Address byte order; `auto` picks the order with the higher focus score.
    #[arg(long, value_enum, default_value = "big")]
    endianness: EndianArg,
    /// Archive the final short window (flagged partial) instead of dropping it.
    #[arg(long)]
    include_partial: bool,
    #[arg(long)]
    ranges: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalysisFormatArg {
    Csv,
    Binary,
}

#[derive(Args)]
struct ArchiveInput {
    /// Archives in window order.
    #[arg(required = true)]
    archives: Vec<PathBuf>,
    #[arg(long)]
    ranges: Option<PathBuf>,
    /// The range configuration is already in anonymized address space.
    #[arg(long)]
    ranges_anonymized: bool,
    #[command(flatten)]
    key: KeyArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: ArchiveInput,
    /// Analysis file; `.csv` selects CSV unless --format says otherwise.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    format: Option<AnalysisFormatArg>,
    /// Hierarchy levels, capped by the number of full windows.
    #[arg(long, default_value_t = 11)]
    levels: usize,
}

#[derive(Args)]
struct FocusArgs {
    /// PCAP captures (`-` for stdin) or archives (`.tar`).
    inputs: Vec<PathBuf>,
    #[arg(long)]
    ranges: Option<PathBuf>,
    #[arg(long)]
    ranges_anonymized: bool,
    #[command(flatten)]
    key: KeyArgs,
    /// Also write the tables and scores as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    input: ArchiveInput,
    #[arg(short = 'o', long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 11)]
    levels: usize,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long, default_value_t = 2.0 / 3.0)]
    c_err: f64,
    /// Number of cuts spanning [0, c_err].
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 8)]
    n_samp: u32,
    /// Mismatch fraction; defaults to 1 / log2(d_max).
    #[arg(long)]
    f: Option<f64>,
    #[arg(long, default_value_t = 1 << 20)]
    d_max: u64,
    /// Output CSV, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Also write heavy-tail and Gaussian reference curves with error bands.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Largest degree of the reference curves.
    #[arg(long, default_value_t = 64)]
    curve_dmax: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1 << 22)]
    packets: u64,
    #[arg(long, default_value_t = 1 << 17)]
    nv: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::InsufficientData(_) | Error::EmptyTable => 2,
        Error::Format(_) | Error::Member { .. } | Error::Arithmetic(_) => 3,
        Error::Io(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("tmfocus: parameter error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool set once");
    }
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Build(a) => commands::build(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Focus(a) => commands::focus(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Roc(a) => commands::roc(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if matches!(&e, Error::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tmfocus: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
