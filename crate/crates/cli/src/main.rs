//! `idac`: reproducible command-line workflows for noise-robust binary
//! classification. Every subcommand is deterministic given its flags and
//! seeds; rerunning one produces byte-identical files.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 data error, 4 numeric
//! failure (training divergence, failed gradient check).

mod commands;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idac_core::data::Split;
use idac_core::experiment::{BOOTSTRAP_RESAMPLES, DECISION_THRESHOLD};
use idac_core::Error;

#[derive(Parser)]
#[command(
    name = "idac",
    version,
    about = "Noise-robust classification: abstaining losses, label-noise simulation, \
             training, grid search, and bootstrap-evaluated AUROC"
)]
struct Cli {
    /// Suppress progress summaries; errors still go to stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic three-split dataset plus a JSON manifest.
    GenData(GenDataArgs),
    /// Flip a fraction of train labels; write the noisy copy and the flip record.
    InjectNoise(InjectNoiseArgs),
    /// Train one configuration and persist its artifacts under the output root.
    Train(TrainArgs),
    /// Run a hyperparameter sweep and print the table ranked by validation AUROC.
    Grid(GridArgs),
    /// Recompute metrics for a saved checkpoint on one dataset split.
    Eval(EvalArgs),
    /// Check every loss gradient against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    #[value(name = "two_gaussians")]
    TwoGaussians,
    #[value(name = "two_moons")]
    TwoMoons,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Csv,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl SplitArg {
    fn to_split(self) -> Split {
        match self {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

fn parse_counts(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated counts: train,val,test".to_string());
    }
    let mut out = [0usize; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("split count `{part}`: {e}"))?;
    }
    Ok(out)
}

#[derive(Args)]
struct GenDataArgs {
    /// Generator family.
    #[arg(long, value_enum)]
    kind: DataKind,
    /// Rows per split, as `train,val,test`.
    #[arg(long, value_parser = parse_counts, default_value = "4000,500,500")]
    n: [usize; 3],
    /// Class-mean coordinates for `two_gaussians`; the feature dimension is
    /// the number of coordinates. Classes sit at +mu and -mu.
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.0")]
    mu: Vec<f64>,
    /// Isotropic standard deviation for `two_gaussians`.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Coordinate noise for `two_moons`.
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file [default: `<kind>.csv` or `<kind>.bin`].
    #[arg(long)]
    out: Option<PathBuf>,
    /// On-disk representation.
    #[arg(long, value_enum, default_value = "csv")]
    format: FileFormat,
}

#[derive(Args)]
struct InjectNoiseArgs {
    /// Input dataset (CSV or binary, detected from the content).
    #[arg(long)]
    data: PathBuf,
    /// Fraction of train labels to flip, in [0, 1].
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination for the noisy copy.
    #[arg(long)]
    out: PathBuf,
    /// Destination for the flip record [default: `<out>.noise_record.json`].
    #[arg(long)]
    record: Option<PathBuf>,
    /// On-disk representation of the output.
    #[arg(long, value_enum, default_value = "csv")]
    format: FileFormat,
}

#[derive(Args)]
struct TrainArgs {
    /// Training configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Dataset file (CSV or binary).
    #[arg(long)]
    data: PathBuf,
    /// Dotted-key config override, e.g. `--set optim.lr0=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory that receives one subdirectory per run.
    #[arg(long, env = "IDAC_OUT_ROOT", default_value = "results")]
    out_root: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Base training configuration (JSON); grid axes override its fields.
    #[arg(long)]
    config: PathBuf,
    /// Grid definition (JSON), e.g. `{"alphas": [1, 10, 20]}`.
    #[arg(long)]
    grid: PathBuf,
    /// Dataset file (CSV or binary).
    #[arg(long)]
    data: PathBuf,
    /// Dotted-key override applied to the base config. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for the sweep; results never depend on this.
    #[arg(long)]
    parallel: Option<usize>,
    /// Directory that receives the grid files plus one subdirectory per run.
    #[arg(long, env = "IDAC_OUT_ROOT", default_value = "results")]
    out_root: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train` or `grid`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset file (CSV or binary).
    #[arg(long)]
    data: PathBuf,
    /// Which split to evaluate.
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Bootstrap resamples behind the AUROC confidence interval.
    #[arg(long, default_value_t = BOOTSTRAP_RESAMPLES)]
    bootstrap: usize,
    /// Decision threshold for the confusion-matrix metrics.
    #[arg(long, default_value_t = DECISION_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Random batches checked per loss.
    #[arg(long, default_value_t = 56)]
    instances: usize,
    #[arg(long, default_value_t = 4242)]
    seed: u64,
    /// Maximum allowed relative error between analytic and numeric gradients.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
}

/// A command failure carrying the exit code family it belongs to.
enum Failure {
    /// Bad flags, malformed or contradictory configuration. Exit 2.
    Usage(String),
    /// Missing or unreadable files, malformed datasets. Exit 3.
    Data(String),
    /// Divergence, degeneracy, or a failed gradient check. Exit 4.
    Numeric(String),
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure::Usage(e.to_string())
    }

    fn data(e: impl ToString) -> Self {
        Failure::Data(e.to_string())
    }

    /// Classifies a library error by its nature, for contexts (training,
    /// evaluation) where any variant can surface.
    fn auto(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            Error::Diverged { .. }
            | Error::NumericDegeneracy(_)
            | Error::InvalidInput(_)
            | Error::Shape(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::GenData(args) => commands::gen_data(args, cli.quiet),
        Command::InjectNoise(args) => commands::inject_noise(args, cli.quiet),
        Command::Train(args) => commands::train(args, cli.quiet),
        Command::Grid(args) => commands::grid(args, cli.quiet),
        Command::Eval(args) => commands::eval(args, cli.quiet),
        Command::Gradcheck(args) => commands::gradcheck(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
