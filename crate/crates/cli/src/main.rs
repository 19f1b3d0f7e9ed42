use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfbandit_cli::analyze::{analyze, parse_instance, preset_instance};
use mfbandit_cli::config::{parse_config, Parallelism, DEFAULT_RHO};
use mfbandit_cli::plotdata::plotdata_command;
use mfbandit_cli::run::run_command;
use mfbandit_cli::{CliError, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "mfbandit", version, about = "Multi-fidelity bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured policies and write regret, play and diagnostic files.
    Run(RunArgs),
    /// Report partitions and bound coefficients for an instance.
    Analyze(AnalyzeArgs),
    /// Merge a run's CSV outputs into long-format plot data.
    Plotdata {
        /// Output directory of a previous run.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config (a previous manifest.json also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named problem: paper-1, paper-2, paper-3 or paper-4.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    capital: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Worker threads, or "auto".
    #[arg(long)]
    parallelism: Option<Parallelism>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Instance JSON (or a run manifest).
    instance: Option<PathBuf>,
    /// Analyze a preset's instance instead of a file.
    #[arg(long, conflicts_with = "instance")]
    preset: Option<String>,
    /// Generation seed for --preset.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    rho: f64,
    /// Directory for diagnostics.json; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_input(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let (file, source) = match &args.config {
        Some(path) => {
            let text = read_input(path)?;
            (parse_config(&text)?, Some(text))
        }
        None => Default::default(),
    };
    let overrides = Overrides {
        preset: args.preset,
        capital: args.capital,
        replications: args.replications,
        seed: args.seed,
        rho: args.rho,
        parallelism: args.parallelism,
        out: args.out,
    };
    let config = ExperimentConfig::resolve(file, &overrides, source.as_deref())?;
    run_command(&config)?;
    eprintln!("wrote results to {}", config.output_dir.display());
    Ok(())
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<(), CliError> {
    let instance = match (&args.instance, &args.preset) {
        (Some(path), _) => parse_instance(&read_input(path)?, path)?,
        (None, Some(name)) => preset_instance(name, args.seed)?,
        (None, None) => return Err(CliError::Invalid("give an instance file or --preset".into())),
    };
    let report = analyze(&instance, args.rho)?;
    match args.out {
        Some(dir) => {
            fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            let path = dir.join("diagnostics.json");
            fs::write(&path, report).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{report}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Analyze(args) => analyze_cmd(args),
        Command::Plotdata { dir } => plotdata_command(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
