use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;

use vnfp::output::write_outputs;
use vnfp::run::config_failure;
use vnfp::{execute, parse_config, Command};

/// Runs one solver configuration and writes `trajectory.csv` and
/// `summary.json`.
#[derive(Parser, Debug)]
#[command(name = "vnfp", version)]
struct Args {
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "vnfp-out")]
    out: PathBuf,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<ExitCode> {
    let args = Args::parse();
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = match parse_config(&text, args.command) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            write_outputs(&args.out, None, &config_failure(args.command, args.seed, &e))
                .with_context(|| format!("writing to {}", args.out.display()))?;
            return Ok(ExitCode::from(2));
        }
    };
    let start = Instant::now();
    let out = execute(&cfg, args.seed);
    write_outputs(&args.out, out.table.as_ref(), &out.summary)
        .with_context(|| format!("writing to {}", args.out.display()))?;
    eprintln!(
        "{}: {} in {:.2} s, outputs in {}",
        args.command.name(),
        out.summary.status,
        start.elapsed().as_secs_f64(),
        args.out.display()
    );
    if let Some(e) = &out.summary.error {
        eprintln!("error: {}", e.message);
    }
    Ok(if out.success() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
