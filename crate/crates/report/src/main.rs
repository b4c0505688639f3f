use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pulsepair_report::pipeline::{execute, Command};
use pulsepair_report::{scenarios, selftest, verify_dir, PipelineConfig};

#[derive(Parser)]
#[command(name = "pulsepair", version, about = "Polarized pulse-pair search pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct StageArgs {
    /// Pipeline config (JSON).
    config: PathBuf,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write synthetic PPF1 streams for a scenario config.
    Synth(StageArgs),
    /// Detect pulses in the PPF1 streams.
    Detect(StageArgs),
    /// Pair LHCP and RHCP pulses.
    Pair(StageArgs),
    /// Filter pairs and score the (Δt, RA bin) cells.
    Analyze(StageArgs),
    /// Draw the figures.
    Report(StageArgs),
    /// All stages in order.
    Run(StageArgs),
    /// Check the numerical kernels against exact fixtures.
    Selftest,
    /// Re-hash the files listed in an output directory's manifest.
    Verify { dir: PathBuf },
    /// Print a built-in config.
    ExampleConfig {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(scenarios::NAMES))]
        name: String,
    },
}

fn stage(command: Command, args: StageArgs) -> ExitCode {
    let mut cfg = match PipelineConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    match execute(command, &cfg) {
        Ok(m) => {
            println!(
                "{}: {} artifacts in {} ({:.2} s)",
                m.command,
                m.artifacts.len(),
                cfg.output_path().display(),
                m.wall_clock_s
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Synth(a) => stage(Command::Synth, a),
        Cmd::Detect(a) => stage(Command::Detect, a),
        Cmd::Pair(a) => stage(Command::Pair, a),
        Cmd::Analyze(a) => stage(Command::Analyze, a),
        Cmd::Report(a) => stage(Command::Report, a),
        Cmd::Run(a) => stage(Command::Run, a),
        Cmd::Selftest => {
            let results = selftest::run_all();
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Cmd::Verify { dir } => match verify_dir(&dir) {
            Ok((m, bad)) if bad.is_empty() => {
                println!("ok: {} inputs, {} artifacts", m.inputs.len(), m.artifacts.len());
                ExitCode::SUCCESS
            }
            Ok((_, bad)) => {
                for b in bad {
                    eprintln!("{b}");
                }
                ExitCode::from(3)
            }
            Err(e) => {
                eprintln!("error: {}: {e}", dir.display());
                ExitCode::from(3)
            }
        },
        Cmd::ExampleConfig { name } => {
            let cfg = scenarios::by_name(&name).expect("name checked by clap");
            print!("{}", cfg.to_json_pretty());
            ExitCode::SUCCESS
        }
    }
}
