use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use evosq_core::error::Error;
use evosq_core::scenario::{run_scenario, ScenarioConfig};

/// Runs one evosq scenario and writes `summary.json` plus CSV reports.
#[derive(Parser, Debug)]
#[command(name = "evosq", version)]
struct Args {
    /// dn-compute, riccati-check, evolve-check, kernel-check, conformal-check,
    /// bvp-headline, layer-strip, null-test, oducp-probe, global-march,
    /// exhaustion or convergence-study.
    scenario: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the config's `out`, then `out/<scenario>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value`, applied over the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::io(&args.config, e))
        .and_then(|text| ScenarioConfig::parse(&text, &args.overrides));
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let out = args
        .out
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&args.scenario));
    match run_scenario(&args.scenario, &config, &out) {
        Ok(outcome) => {
            for c in &outcome.summary.criteria {
                println!("{} [{}] {}", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name);
            }
            for w in &outcome.summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("summary: {}", out.join("summary.json").display());
            if outcome.summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
