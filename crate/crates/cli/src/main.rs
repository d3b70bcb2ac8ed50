use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hetiv_cli::{execute, parse_config, Mode, OutputFormat, Overrides};

#[derive(Parser)]
#[command(name = "hetiv", version, about = "Heteroskedasticity-based IV tables and Monte Carlo runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the table grid on survey microdata.
    Replicate(RunArgs),
    /// Run simulation scenarios and summarize bias and coverage.
    Montecarlo(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Replicate(a) => (Mode::Replicate, a),
        Command::Montecarlo(a) => (Mode::Montecarlo, a),
    };
    let overrides = Overrides {
        mode: Some(mode),
        seed: args.seed,
        out: args.out,
        threads: args.threads,
        format: args.format,
    };
    let result = parse_config(&args.config, &overrides).and_then(|r| execute(&r, std::env::args().collect()));
    match result {
        Ok(report) => {
            for p in &report.outputs {
                println!("{}", p.display());
            }
            println!("{}", report.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
