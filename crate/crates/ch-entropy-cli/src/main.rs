use std::path::PathBuf;
use std::process::ExitCode;

use ch_entropy_cli::commands::catalog_table;
use ch_entropy_cli::{load_config, run, CliError, Command, Format, Overrides};
use clap::Parser;

/// CR-volume and entropy of submanifolds of complex hyperbolic space.
#[derive(Debug, Parser)]
#[command(name = "ch-entropy", version)]
struct Cli {
    /// What to compute; overrides `command` in the config file.
    command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog example, e.g. `real_slice` or `cone:clifford_legendrian_torus`.
    #[arg(long)]
    example: Option<String>,
    /// Complex dimension parameter of the example.
    #[arg(long)]
    n: Option<u64>,
    /// Quadrature nodes per link axis.
    #[arg(long)]
    nodes: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest truncation radius of the entropy functional.
    #[arg(long)]
    rmax: Option<f64>,
    /// Directory for report.json, profile.csv and trace.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let overrides = Overrides {
        command: cli.command,
        example: cli.example,
        n: cli.n,
        nodes: cli.nodes,
        seed: cli.seed,
        r_max: cli.rmax,
        out: cli.out,
        format: cli.format,
    };
    match execute(cli.config, &overrides) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(config_path: Option<PathBuf>, overrides: &Overrides) -> Result<ExitCode, CliError> {
    let config = load_config(config_path.as_deref(), overrides)?;
    let outcome = run(&config)?;
    if let Some(dir) = &config.out {
        outcome.write(dir)?;
    }
    match config.format {
        Format::Json => print!("{}", outcome.report.to_json()),
        Format::Csv if config.command == Command::ListExamples => print!("{}", catalog_table()?.to_csv()?),
        Format::Csv => {
            let table = outcome.trace.as_ref().or(outcome.profile.as_ref());
            match table {
                Some(t) => print!("{}", t.to_csv()?),
                None => print!("{}", checks_table(&outcome.report).to_csv()?),
            }
        }
    }
    if outcome.report.passed {
        return Ok(ExitCode::SUCCESS);
    }
    for c in outcome.report.failures() {
        let target = c.target.map(|t| format!(" against {t}")).unwrap_or_default();
        eprintln!("check `{}` failed: {}{} (tolerance {})", c.name, c.value, target, c.tolerance);
    }
    Ok(ExitCode::from(1))
}

fn checks_table(report: &ch_entropy_cli::Report) -> ch_entropy_cli::Table {
    let mut t = ch_entropy_cli::Table::new(&["name", "value", "passed"]);
    for c in &report.checks {
        t.push([c.name.clone(), ch_entropy_cli::report::num(c.value), c.passed.to_string()]);
    }
    t
}
