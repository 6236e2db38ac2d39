//! Scenario runner: loads a JSON config, executes one experiment pipeline,
//! and writes CSV outputs plus a JSON run manifest into the output directory.
//!
//! Exit codes: 0 success; 2 configuration or I/O problem; 3 numeric failure
//! inside a simulation; 4 a documented threshold violated under `--assert`.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use interact_clark::{load_scenario, Error, Scenario};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "interact-clark",
    version,
    about = "Weighted particle flows with one shared noise: simulation, derivative checks, representation verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for CSV outputs and the run manifest (default: current dir)
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Worker threads (default: one per core). Outputs are identical for
    /// every thread count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Check documented thresholds and exit 4 if any fails
    #[arg(long, global = true)]
    assert: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate the particle flow on one path and export the trajectory
    Simulate,
    /// Run the frozen-coefficient iteration and report contraction gaps
    PicardCheck,
    /// Export derivative fields and finite-difference-check the derivative
    MalliavinCheck,
    /// Verify the martingale representation by nested Monte Carlo
    ClarkVerify,
    /// Run the point-mass benchmark with the analytic Gaussian oracle
    DeltaExample,
    /// Estimate the integrand density and check it against the nested MC
    Density,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::PicardCheck => "picard-check",
            Command::MalliavinCheck => "malliavin-check",
            Command::ClarkVerify => "clark-verify",
            Command::DeltaExample => "delta-example",
            Command::Density => "density",
        }
    }
}

const EXIT_CONFIG: i32 = 2;
const EXIT_NUMERIC: i32 = 3;
const EXIT_ASSERT: i32 = 4;

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

fn load(cli: &Cli) -> Result<Scenario, (i32, String)> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| (EXIT_CONFIG, "--config <FILE> is required".to_string()))?;
    let mut scenario =
        load_scenario(config).map_err(|e| (exit_code_for(&e), e.to_string()))?;
    if let Ok(raw) = std::env::var("INTERACT_CLARK_SEED") {
        let seed: u64 = raw.parse().map_err(|_| {
            (
                EXIT_CONFIG,
                format!("INTERACT_CLARK_SEED must be an unsigned integer, got {raw:?}"),
            )
        })?;
        scenario = scenario.with_base_seed(seed);
    }
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(scenario)
}

fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return EXIT_CONFIG;
        }
    }
    let scenario = match load(cli) {
        Ok(s) => s,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }

    let mut run = commands::CommandRun::new(cli.command.name(), &scenario, out_dir);
    let result = match cli.command {
        Command::Simulate => commands::simulate(&scenario, &mut run),
        Command::PicardCheck => commands::picard_check(&scenario, &mut run),
        Command::MalliavinCheck => commands::malliavin_check(&scenario, &mut run),
        Command::ClarkVerify => commands::clark_verify(&scenario, &mut run),
        Command::DeltaExample => commands::delta_example(&scenario, &mut run),
        Command::Density => commands::density(&scenario, &mut run),
    };
    if let Err(e) = result {
        eprintln!("error: {}: {e}", cli.command.name());
        return exit_code_for(&e);
    }
    match run.finish() {
        Ok(manifest_path) => println!("manifest: {}", manifest_path.display()),
        Err(e) => {
            eprintln!("error: cannot write manifest: {e}");
            return EXIT_CONFIG;
        }
    }
    if cli.assert && !run.failures().is_empty() {
        for f in run.failures() {
            eprintln!("assertion failed: {f}");
        }
        return EXIT_ASSERT;
    }
    0
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(&cli));
}
