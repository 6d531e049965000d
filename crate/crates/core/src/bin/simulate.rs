use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polaron_kitaev::harness::{parse_config, run_scenario, RunOptions};

/// Run a polaron Kitaev-chain scenario described by a `key = value` file.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// Scenario configuration file.
    config: PathBuf,
    /// Output directory, overriding `output_dir` in the file.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Calibration file, read by physics runs and written by `calibrate`.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let opts = RunOptions {
        output_dir: args.output_dir,
        calibration: args.calibration,
        config_text: text,
        config_path: Some(args.config),
    };
    match run_scenario(&cfg, &opts) {
        Ok(report) => {
            for (label, theta, converged) in &report.results {
                let flag = if *converged { "" } else { " (not converged)" };
                println!("{label}: theta_inf = {theta:.6}{flag}");
            }
            println!(
                "wrote {} files to {}",
                report.files.len(),
                report.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
