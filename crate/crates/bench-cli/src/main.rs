use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eulerctl_bench::{load_config, output_dir, report, run, BenchError};
use eulerctl_core::saturation::{Decomposer, Mode};
use eulerctl_core::spectral::{Frequency, Kind};

#[derive(Parser)]
#[command(name = "eulerctl", version, about = "Steering experiments for compressible Euler on the 3-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config
    Run {
        config: PathBuf,
        /// output directory (overrides the config)
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// worker threads for independent sweep points
        #[arg(short, long, default_value_t = 1, env = "EULERCTL_JOBS")]
        jobs: usize,
    },
    /// Summarize finished runs against the pass/fail thresholds
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// write a long-format CSV of every recorded metric here
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the decomposition tree of the mode `kind(l·x) e_i` as JSON
    Decompose {
        #[arg(value_parser = ["cos", "sin"])]
        kind: String,
        /// component, 1..=3
        i: u8,
        #[arg(num_args = 3, allow_negative_numbers = true)]
        l: Vec<i32>,
    },
    /// Print the version
    Version,
}

fn decompose(kind: &str, i: u8, l: &[i32]) -> Result<String, BenchError> {
    if !(1..=3).contains(&i) {
        return Err(BenchError::Config(format!("component {i} outside 1..=3")));
    }
    let kind = if kind == "cos" { Kind::Cos } else { Kind::Sin };
    let freq = Frequency::new(l[0], l[1], l[2]);
    if freq.is_zero() {
        return Err(BenchError::Config("the zero frequency is not decomposed".into()));
    }
    let mut dec = Decomposer::new(freq.l1());
    dec.decompose(Mode::new(kind, i, freq))
        .map(|t| t.to_json())
        .map_err(|e| BenchError::Compute(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output, jobs } => load_config(&config).and_then(|loaded| {
            let dir = output_dir(&loaded.config, output.as_deref());
            let summary = run(&loaded, &dir, jobs)?;
            println!("{}", dir.display());
            for v in eulerctl_bench::verdicts(&summary) {
                println!("{v}");
            }
            Ok(())
        }),
        Command::Report { dirs, csv } => report::build(&dirs).and_then(|r| {
            print!("{}", r.render());
            if let Some(path) = csv {
                std::fs::write(path, r.long_csv()?)?;
            }
            Ok(())
        }),
        Command::Decompose { kind, i, l } => decompose(&kind, i, &l).map(|json| println!("{json}")),
        Command::Version => {
            println!("eulerctl {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
