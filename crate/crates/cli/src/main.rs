use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpp_cli::commands;
use mpp_cli::csvio::Dims;
use mpp_cli::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "mpp", version, about = "Kurtosis-based projection pursuit for matrix-valued data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `io.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for campaign replications.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a labeled sample from the configured mixture.
    Simulate(Common),
    /// Extract pairs and reconstruct the discriminant matrix.
    Extract(Common),
    /// Replicated simulate-and-extract runs over an (alpha, n) grid.
    Campaign(Common),
    /// Compare clustering of projection scores across methods.
    Baselines(Common),
    /// Convert a long- or wide-form CSV into a tensor file.
    ImportCsv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
    },
    /// Check the analytic kurtosis gradient against finite differences.
    Gradcheck(Common),
}

fn load(common: &Common) -> CliResult<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            let manifest = commands::simulate(&cfg, c.output.as_deref(), c.seed)?;
            eprintln!("wrote {} observations", manifest.n);
        }
        Command::Extract(c) => {
            let cfg = load(&c)?;
            let report = commands::extract(&cfg, c.input.as_deref(), c.output.as_deref(), c.seed)?;
            if c.output.is_none() && cfg.io.output.is_none() {
                print!("{}", commands::report_json(&report));
            }
        }
        Command::Campaign(c) => {
            let cfg = load(&c)?;
            let csv = commands::campaign(&cfg, c.output.as_deref(), c.seed, c.threads)?;
            if c.output.is_none() && cfg.io.output.is_none() {
                print!("{csv}");
            }
        }
        Command::Baselines(c) => {
            let cfg = load(&c)?;
            let report = commands::baselines(&cfg, c.input.as_deref(), c.output.as_deref(), c.seed)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if c.output.is_none() && cfg.io.output.is_none() {
                print!("{}", report.to_csv());
            }
        }
        Command::ImportCsv { common, n, p, q } => {
            let input = common.input.ok_or_else(|| CliError::Usage("--input is required".into()))?;
            let output = common.output.ok_or_else(|| CliError::Usage("--output is required".into()))?;
            let s = commands::import_csv(&input, &output, Dims { n, p, q })?;
            eprintln!("imported {}x{}x{}", s.n(), s.p(), s.q());
        }
        Command::Gradcheck(c) => {
            let cfg = load(&c)?;
            let report = commands::gradcheck(&cfg, c.input.as_deref(), c.seed)?;
            if !report.excluded.is_empty() {
                eprintln!("warning: {} near-degenerate pairs excluded", report.excluded.len());
            }
            print!("{}", commands::report_json(&report));
            if !report.passed() {
                return Err(CliError::Numerical(format!(
                    "max relative gradient error {:e} exceeds {:e}",
                    report.max_rel_error,
                    commands::GRADCHECK_LIMIT
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mpp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
