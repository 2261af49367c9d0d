use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqrec_cli::commands;
use seqrec_cli::config::parse_metric;
use seqrec_cli::{CliResult, Psi};
use seqrec_core::ErrorMetric;

#[derive(Debug, Parser)]
#[command(
    name = "seqrec",
    version,
    about = "k-NN rating estimation under sequential reveal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict one user's target rating from a ratings matrix.
    Predict {
        /// Ratings matrix CSV (`user,item_1,…,item_d,target`).
        matrix: PathBuf,
        /// Query ratings, comma-separated, `NA` for unrated items.
        #[arg(long, allow_hyphen_values = true)]
        query: String,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long, default_value = "identity", value_parser = ["identity", "sqrt"])]
        psi: String,
        /// Largest admissible rating `s`.
        #[arg(long, default_value_t = 10.0)]
        max_rating: f64,
        /// Print the shortest exact representation instead of 6 significant digits.
        #[arg(long)]
        full_precision: bool,
    },
    /// Run the simulator once to max(n_grid) and export the ratings matrix.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `study.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo error at every grid point plus the log-log slope.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<ErrorMetric>,
        #[arg(long, value_parser = ["identity", "sqrt"])]
        psi: Option<String>,
    },
    /// Fit the log-log slope of a results file.
    Ratefit { results: PathBuf },
}

fn psi(name: &str) -> Psi {
    name.parse().expect("restricted by clap")
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Predict {
            matrix,
            query,
            k,
            psi: name,
            max_rating,
            full_precision,
        } => commands::cmd_predict(
            &matrix,
            &query,
            k as usize,
            psi(&name),
            max_rating,
            full_precision,
            &mut io::stdout().lock(),
            &mut io::stderr().lock(),
        ),
        Command::Simulate { config, out, seed } => commands::cmd_simulate(&config, &out, seed),
        Command::Converge {
            config,
            out,
            seed,
            metric,
            psi: name,
        } => commands::cmd_converge(&config, &out, seed, metric, name.as_deref().map(psi)),
        Command::Ratefit { results } => commands::cmd_ratefit(&results, &mut io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
