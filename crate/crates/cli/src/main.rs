use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mvsde_cli::{run, validate, Options};

#[derive(Parser)]
#[command(name = "mvsde", version, about = "Small-noise experiments for reflected McKean-Vlasov SDEs with jumps")]
struct Cli {
    /// Worker threads for replica and multi-start parallelism.
    #[arg(long, global = true, env = "MVSDE_WORKERS")]
    workers: Option<usize>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a config file.
    Run { config: PathBuf },
    /// Check a config file and print the resolved settings.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = Options {
        workers: cli.workers,
        out: cli.out,
    };
    let result = match &cli.command {
        Command::Validate { config } => validate(config, &opts).map(|text| {
            print!("{text}");
            ExitCode::SUCCESS
        }),
        Command::Run { config } => run(config, &opts).map(|outcome| {
            println!("{}", outcome.summary);
            if outcome.numerical_failure {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code())
    })
}
