use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vehval_cli::commands;
use vehval_cli::config::{ExperimentConfig, OUT_ENV};
use vehval_cli::CliError;
use vehval_core::estimation::ExactModelCheck;

#[derive(Parser)]
#[command(name = "vehval", version, about = "Vehicle model validity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the maneuver suite with the reference plant.
    Simulate(Common),
    /// One-step comparison of the candidate models on every bundle.
    Compare(Common),
    /// Run the model-based observers on every bundle.
    Observe {
        #[command(flatten)]
        common: Common,
        /// Also run the exact-model consistency scenario.
        #[arg(long)]
        self_check: bool,
    },
    /// Merge validity and observer reports.
    Report(Common),
    /// Run the exact-model observer scenario and report pass/fail.
    SelfCheck,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the environment and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding the trajectory bundles; defaults to the output directory.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Domain threshold [m/s^2].
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf, PathBuf), CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.models {
            cfg.models = m.clone();
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        cfg.validate().map_err(CliError::Usage)?;
        let env = std::env::var(OUT_ENV).ok();
        let out = cfg.resolve_out(self.out.as_deref(), env.as_deref());
        let data = self.data.clone().unwrap_or_else(|| out.clone());
        Ok((cfg, out, data))
    }
}

fn print_check(check: &ExactModelCheck) -> bool {
    let failures = check.failures();
    let mae = check.tracking.mae();
    println!(
        "self-check {}: tracking MAE [{:.2e}, {:.2e}, {:.2e}], offset error after settling {:.2e}, mean NIS {:.3}",
        check.model,
        mae[0],
        mae[1],
        mae[2],
        check.settled_error(),
        check.noisy.mean_nis()
    );
    for f in &failures {
        println!("  {f}");
    }
    println!(
        "self-check {}",
        if failures.is_empty() { "PASS" } else { "FAIL" }
    );
    failures.is_empty()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => {
            let (cfg, out, _) = c.resolve()?;
            let s = commands::simulate(&cfg, &out)?;
            for t in &s.trajectories {
                if let Some(d) = &t.detail {
                    eprintln!("warning: {}: {d}", t.name);
                }
            }
            println!(
                "wrote {} of {} trajectories to {}",
                s.written(),
                s.trajectories.len(),
                out.display()
            );
        }
        Command::Compare(c) => {
            let (cfg, out, data) = c.resolve()?;
            let r = commands::compare(&cfg, &out, &data)?;
            println!(
                "{} domain rows written to {}",
                r.rows.len(),
                out.join(commands::VALIDITY_DIR).display()
            );
        }
        Command::Observe { common, self_check } => {
            let (cfg, out, data) = common.resolve()?;
            let s = commands::observe(&cfg, &out, &data, self_check)?;
            for f in s.failed() {
                eprintln!(
                    "warning: observer {} on {} failed: {}",
                    f.model,
                    f.trajectory,
                    f.failure.as_deref().unwrap_or_default()
                );
            }
            println!(
                "{} observer runs, {} failed; reports in {}",
                s.status.len(),
                s.failed().count(),
                out.join(commands::OBSERVER_DIR).display()
            );
            if let Some(check) = &s.self_check {
                if !print_check(check) {
                    return Err(CliError::Numerical("self-check failed".into()));
                }
            }
        }
        Command::Report(c) => {
            let (cfg, out, _) = c.resolve()?;
            let r = commands::report(&cfg, &out)?;
            print!("{}", r.text);
            println!("consolidated report: {}", r.consolidated.display());
        }
        Command::SelfCheck => {
            if !print_check(&commands::self_check()?) {
                return Err(CliError::Numerical("self-check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
