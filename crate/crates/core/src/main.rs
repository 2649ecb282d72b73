use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nlelliptic::cli::{exit, exit_code, load_config, run_command};
use nlelliptic::config::Command;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Eval,
    Barrier,
    Solve,
    Abp,
    Regularity,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Eval => Command::Eval,
            Cmd::Barrier => Command::Barrier,
            Cmd::Solve => Command::Solve,
            Cmd::Abp => Command::Abp,
            Cmd::Regularity => Command::Regularity,
        }
    }
}

/// Nonlocal elliptic operators with drift: evaluation, barriers, Dirichlet
/// solves, ABP geometry and regularity measurements.
#[derive(Debug, Parser)]
#[command(name = "nlelliptic", version)]
struct Args {
    command: Cmd,
    /// Configuration file with `section.key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `io.out` from the config, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized instances (default: `io.seed`, else 0).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error:\n{e}");
            return ExitCode::from(exit::CONFIG_ERROR as u8);
        }
    };
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let seed = args.seed.unwrap_or(cfg.seed);
    let result = run_command(&cfg, args.command.into(), &out, seed);
    match &result {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if !o.verified {
                eprintln!("verification failed");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
