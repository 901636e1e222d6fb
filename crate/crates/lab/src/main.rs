use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hyperdelay_core::spectral::{DEFAULT_SAMPLES, DEFAULT_XI_MAX};
use hyperdelay_lab::export::{to_json, trajectory_csv, write_file};
use hyperdelay_lab::pipeline::{
    check, envelope_csv, run_experiment, spectrum_report, time_grid, times_summary, verify, Outcome,
};
use hyperdelay_lab::scenario::{load_draft, load_scenario, Scenario};

/// Delayed decay experiments for partially damped hyperbolic systems.
#[derive(Debug, Parser)]
#[command(name = "hyperdelay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the system and run both Shizuta–Kawashima checks.
    Check { scenario: PathBuf },
    /// Delay times of the undamped region and the sharp-delay table.
    Times {
        scenario: PathBuf,
        /// `start:stop:step`
        #[arg(long, value_parser = parse_t_grid)]
        t_grid: Option<(f64, f64, f64)>,
    },
    /// Spectral abscissa of the symbol over a frequency grid.
    Spectrum {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_XI_MAX)]
        xi_max: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Run the scenario's experiment; writes the trajectory and summary.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate, run and check the delayed envelope.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_t_grid(text: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(String::from("expected start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    Ok((num(start)?, num(stop)?, num(step)?))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn scenario(path: &Path) -> Result<Scenario> {
    load_scenario(&read(path)?).with_context(|| path.display().to_string())
}

fn emit(outcome: &Outcome, n: usize, out: Option<&Path>) -> Result<()> {
    let summary = to_json(&outcome.summary)?;
    let Some(dir) = out else {
        print!("{summary}");
        return Ok(());
    };
    let mut written = vec![
        write_file(dir, "trajectory.csv", &trajectory_csv(&outcome.trajectory, n))?,
        write_file(dir, "summary.json", &summary)?,
    ];
    if let Some(reference) = &outcome.reference {
        written.push(write_file(dir, "reference.csv", &trajectory_csv(reference, n))?);
    }
    if let Some(report) = &outcome.envelope {
        written.push(write_file(dir, "envelope.csv", &envelope_csv(report))?);
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check { scenario } => {
            let draft = load_draft(&read(&scenario)?).with_context(|| scenario.display().to_string())?;
            let report = check(&draft);
            print!("{}", to_json(&report)?);
            Ok(report.passed())
        }
        Command::Times { scenario: path, t_grid } => {
            let s = scenario(&path)?;
            let Some(region) = s.region() else {
                bail!("{}: times needs an undamped region", path.display());
            };
            let grid = match t_grid {
                Some((start, stop, step)) => time_grid(start, stop, step)?,
                None => Vec::new(),
            };
            print!("{}", to_json(&times_summary(s.speeds(), region, &grid)?)?);
            Ok(true)
        }
        Command::Spectrum { scenario: path, xi_max, samples } => {
            let s = scenario(&path)?;
            print!("{}", to_json(&spectrum_report(&s.system, xi_max, samples)?)?);
            Ok(true)
        }
        Command::Simulate { scenario: path, out } => {
            let s = scenario(&path)?;
            let outcome = run_experiment(&s)?;
            emit(&outcome, s.system.n(), out.as_deref())?;
            Ok(outcome.envelope.as_ref().is_none_or(|r| r.passed()))
        }
        Command::Verify { scenario: path, out } => {
            let s = scenario(&path)?;
            let outcome = verify(&s)?;
            emit(&outcome, s.system.n(), out.as_deref())?;
            let report = outcome.envelope.as_ref().context("verification produced no envelope report")?;
            eprintln!(
                "{} violation(s) of the delayed envelope after t = {}",
                report.violations, report.check_from
            );
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
