use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tracklab_cli::commands::{cmd_collect, cmd_compare, cmd_simulate, cmd_train, SimulateMode};

/// Closed-loop path-tracking lab: collect training data from a
/// model-mismatched plant under a receding-horizon controller, train a
/// predictive-error estimator, simulate with and without feedforward
/// compensation, and compare the runs.
#[derive(Parser)]
#[command(name = "tracklab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "mpc_only", alias = "mpc-only")]
    MpcOnly,
    Compensated,
}

#[derive(Subcommand)]
enum Command {
    /// Run the collection scenarios and write the training dataset (CSV).
    Collect {
        #[arg(long)]
        config: PathBuf,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
        /// Override every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the error estimator on a dataset and write the model (JSON).
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the evaluation scenario and write the simulation log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Trained model file; required in compensated mode.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Longitudinal positions at which to report the lateral error.
        #[arg(long, value_delimiter = ',', default_value = "80")]
        landmarks: Vec<f64>,
    },
    /// Compare two logs of the same scenario: metrics, reductions, plots.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Output directory for report.json, the four charts and their CSVs.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "80")]
        landmarks: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version output is not an error
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let result = match cli.command {
        Command::Collect { config, out, seed } => cmd_collect(&config, &out, seed),
        Command::Train {
            config,
            dataset,
            out,
            seed,
        } => cmd_train(&config, &dataset, &out, seed),
        Command::Simulate {
            config,
            mode,
            model,
            out,
            seed,
            landmarks,
        } => {
            let mode = match mode {
                ModeArg::MpcOnly => SimulateMode::MpcOnly,
                ModeArg::Compensated => SimulateMode::Compensated,
            };
            cmd_simulate(&config, mode, model.as_deref(), &out, seed, &landmarks)
        }
        Command::Compare {
            baseline,
            candidate,
            out,
            landmarks,
        } => cmd_compare(&baseline, &candidate, &out, &landmarks),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
