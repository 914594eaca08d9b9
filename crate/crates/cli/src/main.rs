use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phi_regret_cli::run::describe;
use phi_regret_cli::verify::verify_path;
use phi_regret_cli::{run, CliError, ExperimentConfig, EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION};

/// Approximate regret matching experiments with certified bounds.
#[derive(Debug, Parser)]
#[command(version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Run the experiment in this config file.
    #[arg(long, conflicts_with = "verify")]
    config: Option<PathBuf>,
    /// Worker threads for the seed loop.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verify a trace CSV or a run directory.
    #[arg(long)]
    verify: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check written traces.
    Verify { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (cli.command, cli.config, cli.verify) {
        (Some(Command::Run { config, jobs, out }), _, _) => run_command(&config, jobs, out),
        (Some(Command::Verify { path }), _, _) => verify_command(&path),
        (None, Some(config), None) => run_command(&config, cli.jobs, cli.out),
        (None, None, Some(path)) => verify_command(&path),
        _ => {
            eprintln!("nothing to do: pass --config FILE, --verify PATH, or a subcommand (see --help)");
            Ok(EXIT_CONFIG)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_command(config_path: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|source| CliError::Io {
        path: config_path.to_path_buf(),
        source,
    })?;
    let config = ExperimentConfig::parse(&text).map_err(|source| CliError::Config {
        path: config_path.to_path_buf(),
        source,
    })?;
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let out_dir = out
        .or_else(|| config.output_dir.as_ref().map(|d| config_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from("phi-regret-out"));
    let outcome = with_jobs(jobs, || run(&config, config_dir, &out_dir))??;
    println!("wrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
    if let Some(gap) = outcome.final_ce_gap {
        println!("seed-averaged ce_gap at t = {}: {gap:?}", config.horizon);
    }
    if outcome.violations.is_empty() {
        println!("all bounds hold");
        Ok(EXIT_OK)
    } else {
        for (label, v) in &outcome.violations {
            eprintln!("violation: {}", describe(label, v));
        }
        Ok(EXIT_VIOLATION)
    }
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Pool(e.to_string())),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T: Send>(_jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(f())
}

fn verify_command(path: &Path) -> Result<i32, CliError> {
    let reports = verify_path(path)?;
    let mut code = EXIT_OK;
    for report in &reports {
        if report.passed() {
            println!(
                "PASS {} ({} rows; {})",
                report.path.display(),
                report.rows,
                report.checks.join(", ")
            );
        } else {
            code = EXIT_VIOLATION;
            for failure in &report.failures {
                println!("FAIL {}: {failure}", report.path.display());
            }
        }
    }
    Ok(code)
}
