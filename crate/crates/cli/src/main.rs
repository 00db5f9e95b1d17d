use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rainsynth_cli::{
    cmd_inspect, cmd_invert, cmd_loss, cmd_score, cmd_synth, cmd_verify, threads_from_env, CliError, Metric,
};

/// Synthesize, invert, and score low-resolution heavy-rain face images.
#[derive(Parser)]
#[command(name = "rainsynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a degraded corpus from a directory of clean HR images.
    Synth {
        config_file: PathBuf,
        hr_dir: PathBuf,
        out_dir: PathBuf,
        /// Use only the first N inputs in file-name order.
        #[arg(long)]
        count: Option<usize>,
        /// Override the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover the clean LR image of a sample from its pre-clamp dump.
    Invert { manifest: PathBuf, id: String, out_path: PathBuf },
    /// Score identically named image pairs of two directories.
    Score {
        ref_dir: PathBuf,
        test_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::Both)]
        metric: MetricArg,
    },
    /// Print a sample's parameters and files.
    Inspect {
        manifest: PathBuf,
        id: String,
        /// Write the seven-panel strip HR | LR | rain-streaked | LRHR | S | A | T.
        #[arg(long)]
        montage: Option<PathBuf>,
    },
    /// Replay every sample of a corpus and compare against its files.
    Verify { manifest: PathBuf },
    /// Evaluate the training objectives on dumped tensors described by a JSON request.
    Loss { request: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Psnr,
    Ssim,
    Both,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Psnr => Metric::Psnr,
            MetricArg::Ssim => Metric::Ssim,
            MetricArg::Both => Metric::Both,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = threads_from_env();
    rainsynth::par::with_threads(threads, || {
        let mut out = std::io::stdout().lock();
        let mut err = std::io::stderr();
        let result = dispatch(cli.command, threads, &mut out, &mut err);
        let _ = out.flush();
        result
    })
}

fn dispatch(
    command: Command,
    threads: Option<usize>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    match command {
        Command::Synth { config_file, hr_dir, out_dir, count, seed } => {
            cmd_synth(&config_file, &hr_dir, &out_dir, count, seed, threads, out, err)
        }
        Command::Invert { manifest, id, out_path } => cmd_invert(&manifest, &id, &out_path, out),
        Command::Score { ref_dir, test_dir, metric } => cmd_score(&ref_dir, &test_dir, metric.into(), out),
        Command::Inspect { manifest, id, montage } => cmd_inspect(&manifest, &id, montage.as_deref(), out),
        Command::Verify { manifest } => cmd_verify(&manifest, out),
        Command::Loss { request } => cmd_loss(&request, out),
    }
}

fn main() -> ExitCode {
    // Argument errors exit 1 like every other usage error.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rainsynth: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
