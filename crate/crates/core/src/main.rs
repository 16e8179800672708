use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use homogcur::cli::{run, Command, RunConfig};
use homogcur::Error;

/// Cell problems and homogenized line-tension densities on lattice chains.
#[derive(Debug, Parser)]
#[command(name = "homogcur", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run config.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = match RunConfig::load(args.command, &args.config, args.workers, args.out) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("homogcur: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(files) => {
            for f in files {
                println!("{}", cfg.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("homogcur: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("homogcur: {e}");
            ExitCode::FAILURE
        }
    }
}
