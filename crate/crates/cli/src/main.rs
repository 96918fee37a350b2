use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corbin::params::default_grid;
use corbin::{TargetSpec, Thresholds};
use corbin_cli::{render, CliError, Envelope, SampleArgs, VerifyArgs, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "corbin", version, about = "Positively correlated binomial pairs")]
struct Cli {
    /// Emit one JSON document instead of human-readable tables.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the latent cell probabilities and derived lines.
    Solve {
        #[arg(long)]
        pi1: f64,
        #[arg(long)]
        pi2: f64,
        #[arg(long)]
        r: f64,
        /// Trial count; only scales the moments and lines.
        #[arg(long, default_value_t = 1)]
        n: u32,
    },
    /// Print the table of attainable correlation bounds.
    Table {
        /// Comma-separated marginal probabilities.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Print full precision instead of three decimals.
        #[arg(long)]
        raw: bool,
    },
    /// Draw correlated pairs and write them as `y1,y2` rows.
    Sample {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[command(flatten)]
        seed: SeedArgs,
        /// Output file; rows go to stdout and the summary to stderr when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample and run every statistical check; exits 3 on failure.
    Verify {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(2..))]
        count: u64,
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long)]
    n: u32,
    #[arg(long)]
    pi1: f64,
    #[arg(long)]
    pi2: f64,
    #[arg(long)]
    r: f64,
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Substream index.
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = Thresholds::default().max_moment_z)]
    max_z: f64,
    #[arg(long, default_value_t = Thresholds::default().bin_z)]
    bin_z: f64,
    #[arg(long, default_value_t = Thresholds::default().min_bin_pass_rate)]
    bin_pass_rate: f64,
    #[arg(long, default_value_t = Thresholds::default().gof_p_floor)]
    gof_p_floor: f64,
    #[arg(long, default_value_t = Thresholds::default().min_bin_count)]
    min_bin_count: usize,
}

impl From<ThresholdArgs> for Thresholds {
    fn from(t: ThresholdArgs) -> Self {
        Thresholds {
            max_moment_z: t.max_z,
            bin_z: t.bin_z,
            min_bin_pass_rate: t.bin_pass_rate,
            gof_p_floor: t.gof_p_floor,
            min_bin_count: t.min_bin_count,
        }
    }
}

impl SpecArgs {
    fn spec(&self) -> TargetSpec {
        // validated by the command
        TargetSpec {
            n: self.n,
            pi1: self.pi1,
            pi2: self.pi2,
            r: self.r,
        }
    }
}

fn to_usize(v: u64) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::Input(format!("count {v} is too large")))
}

fn run(command: Command, summary_to_stderr: &mut bool) -> Result<Envelope, CliError> {
    match command {
        Command::Solve { pi1, pi2, r, n } => corbin_cli::solve(n, pi1, pi2, r),
        Command::Table { grid, raw } => corbin_cli::table(&grid.unwrap_or_else(default_grid), raw),
        Command::Sample {
            spec,
            count,
            seed,
            out,
        } => {
            *summary_to_stderr = out.is_none();
            let args = SampleArgs {
                spec: spec.spec(),
                count: to_usize(count)?,
                seed: seed.seed,
                stream: seed.stream,
                out,
            };
            let stdout = io::stdout();
            corbin_cli::sample(&args, io::BufWriter::new(stdout.lock()))
        }
        Command::Verify {
            spec,
            count,
            seed,
            thresholds,
            out,
        } => corbin_cli::verify(&VerifyArgs {
            spec: spec.spec(),
            count: to_usize(count)?,
            seed: seed.seed,
            stream: seed.stream,
            thresholds: thresholds.into(),
            out,
        }),
    }
}

fn emit(envelope: &Envelope, json: bool, to_stderr: bool) {
    let text = if json {
        envelope.to_json() + "\n"
    } else {
        render::human(envelope)
    };
    // a closed pipe is not worth a panic
    let _ = if to_stderr {
        io::stderr().write_all(text.as_bytes())
    } else {
        io::stdout().write_all(text.as_bytes())
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut summary_to_stderr = false;
    match run(cli.command, &mut summary_to_stderr) {
        Ok(envelope) => {
            emit(&envelope, cli.json, summary_to_stderr);
            ExitCode::SUCCESS
        }
        Err(err) => {
            let code = err.exit_code() as u8;
            match err {
                CliError::VerificationFailed(envelope) => emit(&envelope, cli.json, false),
                CliError::Input(msg) | CliError::Io(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(code)
        }
    }
}
