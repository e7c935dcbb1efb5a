//! `satflow`: transform CNF into a circuit, sample it, verify samples.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_UNSAT: u8 = 3;
pub const EXIT_TIMEOUT: u8 = 4;
pub const EXIT_VERIFY: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "satflow", version, about = "Gradient-descent SAT sampling over extracted circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract a circuit from a DIMACS file.
    Transform(TransformArgs),
    /// Sample satisfying assignments.
    Sample(SampleArgs),
    /// Check a solutions file against a DIMACS file.
    Verify(VerifyArgs),
    /// Sweep batch sizes and iteration counts, one CSV row per point.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// DIMACS CNF file.
    cnf: PathBuf,
    /// Reject a header clause count that disagrees with the body.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Circuit JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print every extracted definition.
    #[arg(long)]
    dump_exprs: bool,
    /// Stats JSON output.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Restart {
    None,
    Reinit,
}

#[derive(Args, Debug, Clone)]
struct SamplerArgs {
    #[arg(long, default_value_t = 10.0)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Restart::None)]
    restart: Restart,
    #[arg(long)]
    max_restarts: Option<usize>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    threads: Option<usize>,
    /// Run batch kernels on the calling thread only.
    #[arg(long)]
    sequential: bool,
    /// Single-precision relaxation.
    #[arg(long)]
    f32: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Circuit JSON from `transform`; extracted (and cached) when absent.
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// Do not read or write the transform cache.
    #[arg(long)]
    no_cache: bool,
    #[arg(long, default_value_t = 10_000)]
    batch: usize,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long)]
    max_solutions: Option<usize>,
    /// Seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Solutions file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stats_json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// One model line per solution.
    solutions: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1000)]
    quota: usize,
    /// Seconds per sweep point.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Comma-separated batch sizes.
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    batch: Vec<usize>,
    /// Comma-separated iteration counts.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    iters: Vec<usize>,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// CSV output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration CSV of the cumulative unique count.
    #[arg(long)]
    curve: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Transform(a) => commands::transform(a),
        Command::Sample(a) => commands::sample(a),
        Command::Verify(a) => commands::verify(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.error);
            for cause in e.error.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::from(e.code)
        }
    }
}
