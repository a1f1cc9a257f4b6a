use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conifold_lab::{run, CliError, Command, RunConfig, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "conifold-lab", version, about = "Verification suite for conifold metric computations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "CONIFOLD_LAB_JOBS")]
    jobs: Option<usize>,
    /// Seed for random scenarios and forms.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Multiplies every tolerance.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
    /// Record wall times in reports.
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Radial potentials: ODE residuals, monotonicity, convergence, ratio bands.
    Profile,
    /// Cutoff function bounds.
    Cutoff,
    /// Positivity search on the resolved side.
    Positivity,
    /// Metric and curvature of the deformed conifold.
    Curvature,
    /// Merge JSON reports into one verdict.
    Report {
        /// Reports to merge, in addition to `report.inputs` from the config.
        inputs: Vec<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if cli.jobs.is_some() {
        config.jobs = cli.jobs;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(scale) = cli.tolerance_scale {
        config.tolerance_scale = scale;
    }
    config.timings |= cli.timings;
    config.validate()?;
    if let Some(jobs) = config.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    let (command, inputs) = match cli.command {
        Cmd::Profile => (Command::Profile, vec![]),
        Cmd::Cutoff => (Command::Cutoff, vec![]),
        Cmd::Positivity => (Command::Positivity, vec![]),
        Cmd::Curvature => (Command::Curvature, vec![]),
        Cmd::Report { inputs } => (Command::Report, inputs),
    };
    let doc = run(command, &config, &inputs)?;
    for c in &doc.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        match &c.error {
            Some(e) => println!("{status} {} ({e})", c.check_id),
            None => println!("{status} {}", c.check_id),
        }
    }
    let s = &doc.summary;
    println!(
        "{}: {} of {} checks passed, report {}",
        command.name(),
        s.passed,
        s.checks,
        config.out_dir.join(format!("{}.json", command.name())).display()
    );
    Ok(s.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::from(EXIT_PASS),
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("conifold-lab: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
