use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wiretap_cli::{bench_gf, build, cache_from_env, emit, leakage_checks, run, sweep, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "wiretap", about = "Wiretap channel codes: construction, trials, sweeps and leakage checks")]
struct Cli {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured number of trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads for the trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Builds the code and writes its configuration as JSON.
    Construct {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs key generation and the trial sessions, then writes a JSON report.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs once per value of a numeric field and writes one CSV row each.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the exact leakage checks on a small configuration.
    Leakage {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Times field multiplication and inversion.
    BenchGf {
        #[arg(long, value_delimiter = ',', default_values_t = vec![64usize, 256, 1024, 4096])]
        degrees: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
}

fn load(cli: &Cli, path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cache = cache_from_env()?;
    match &cli.command {
        Command::Construct { config, out } => {
            let cfg = load(cli, config)?;
            let (code, _) = build(&cfg, cache.as_ref())?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&code)?)
        }
        Command::Run { config, out } => {
            let cfg = load(cli, config)?;
            let report = run(&cfg, cli.threads, cache.as_ref())?;
            emit(out.as_deref().or(cfg.output.as_deref()), &serde_json::to_string_pretty(&report)?)
        }
        Command::Sweep { config, axis, values, out } => {
            let cfg = load(cli, config)?;
            match out {
                Some(p) => sweep(&cfg, axis, values, cli.threads, cache.as_ref(), std::fs::File::create(p)?)?,
                None => sweep(&cfg, axis, values, cli.threads, cache.as_ref(), std::io::stdout().lock())?,
            };
            Ok(())
        }
        Command::Leakage { config, out } => {
            let cfg = load(cli, config)?;
            let (code, resolved) = build(&cfg, cache.as_ref())?;
            let (checks, note) = leakage_checks(&cfg, &code, &resolved)?;
            let body = serde_json::json!({ "checks": checks, "note": note });
            emit(out.as_deref(), &serde_json::to_string_pretty(&body)?)
        }
        Command::BenchGf { degrees, reps } => {
            let timings = bench_gf(degrees, *reps, cli.seed.unwrap_or(0))?;
            emit(None, &serde_json::to_string_pretty(&timings)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
