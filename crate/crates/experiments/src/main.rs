use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sbl_core::model::{validate_problem, WORKING_RANGE};
use sbl_experiments::suite::{default_suite, report, run_suite};
use sbl_experiments::{run, ExperimentConfig, ExperimentError, ResultRecord};

/// Monte Carlo experiments for stochastic balance laws.
#[derive(Parser)]
#[command(name = "sbl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run { config: PathBuf },
    /// Check a config and the model assumptions without running anything.
    Validate { config: PathBuf },
    /// Run the full default acceptance suite.
    Suite {
        /// Directory receiving the result tables.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Recompute verdicts from the CSV tables in a results directory.
    Report { dir: PathBuf },
}

fn print_record(r: &ResultRecord) {
    println!("{} [{}] {}  ({:.1} s)", r.name, r.experiment.as_str(), if r.passed() { "PASS" } else { "FAIL" }, r.wall_time_secs);
    for c in &r.verdict.checks {
        println!("  {} {}", if c.passed { "ok  " } else { "FAIL" }, c.description);
    }
    for n in &r.notes {
        println!("  note: {n}");
    }
}

fn exit(ok: bool) -> ExitCode {
    ExitCode::from(if ok { 0 } else { 1 })
}

fn main_inner(cli: Cli) -> Result<ExitCode, ExperimentError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let record = run(&cfg)?;
            print_record(&record);
            Ok(exit(record.passed()))
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = validate_problem(&cfg.problem, WORKING_RANGE);
            for c in &report.checks {
                println!(
                    "{} {}: observed {:e}, declared {:e}",
                    if c.satisfied { "ok  " } else { "FAIL" },
                    c.name,
                    c.observed,
                    c.declared
                );
            }
            cfg.validate()?;
            println!("config {} is valid (digest {})", config.display(), cfg.digest());
            Ok(exit(true))
        }
        Command::Suite { out } => {
            let records = run_suite(&out, &default_suite())?;
            records.iter().for_each(print_record);
            let passed = records.iter().filter(|r| r.passed()).count();
            println!("{passed}/{} experiments passed; results in {}", records.len(), out.display());
            Ok(exit(passed == records.len()))
        }
        Command::Report { dir } => {
            let all = report(&dir)?;
            let mut ok = true;
            for r in &all {
                let mark = if r.verdict.passed { "PASS" } else { "FAIL" };
                let agree = match r.recorded {
                    Some(v) if v != r.verdict.passed => "  (differs from recorded verdict)",
                    _ => "",
                };
                println!("{mark} {} [{}]{agree}", r.table.display(), r.experiment.as_str());
                ok &= r.verdict.passed;
            }
            Ok(exit(ok))
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
