use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cpcp::experiment::{
    format_summary, load_checkpoint, read_results, run_experiment_with, summarize, write_results,
    ExperimentConfig, OutputFormat, RunOptions,
};
use cpcp::numeric::Matrix;

#[derive(Parser)]
#[command(
    name = "cpcp",
    version,
    about = "Conformal prediction boxes with conditional-coverage diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a TOML config and write per-cell results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Results file; defaults to `run.output` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_format)]
        format: Option<OutputFormat>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated method names, e.g. `split,rcp,cpcp-clip-mix`.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Record per-cell wall time (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
        /// Save a checkpoint per method of repetition 0 into this directory.
        #[arg(long)]
        save_models: Option<PathBuf>,
    },
    /// Aggregate a results file into mean ± std per dataset and method.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the prediction box of a saved model at one feature vector.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated raw feature values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: cpcp::Error| e.to_string())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run {
            config,
            out,
            format,
            seed,
            reps,
            methods,
            timing,
            save_models,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(r) = reps {
                cfg.run.repetitions = r;
            }
            if let Some(m) = methods {
                cfg.run.methods = m.into_iter().map(|s| s.trim().to_string()).collect();
            }
            if let Some(f) = format {
                cfg.run.format = f;
            }
            cfg.run.timing |= timing;
            cfg.validate()?;
            let rows = run_experiment_with(&cfg, &RunOptions { save_models })?;
            match out.or(cfg.run.output.clone()) {
                Some(path) => {
                    write_results(&path, &rows, cfg.run.format)?;
                    eprintln!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => eprintln!("no --out given; results not written"),
            }
            let failures = rows.iter().filter(|r| !r.is_ok()).count();
            if failures > 0 {
                eprintln!("{failures} cell(s) failed; see the status column");
            }
            print!("{}", format_summary(&summarize(&rows)));
        }
        Command::Summarize { input } => {
            let rows = read_results(&input)?;
            print!("{}", format_summary(&summarize(&rows)));
        }
        Command::Predict { model, x } => {
            let ckpt = load_checkpoint(&model)?;
            if x.len() != ckpt.feature_dim() {
                anyhow::bail!(
                    "model expects {} features, got {}",
                    ckpt.feature_dim(),
                    x.len()
                );
            }
            let row = Matrix::from_vec(1, x.len(), x)?;
            let b = &ckpt.predict_raw(&row)?[0];
            println!(
                "method {} (tau {})",
                ckpt.predictor.method,
                ckpt.predictor.tau.value()
            );
            for j in 0..b.dim() {
                println!("y[{j}]: [{}, {}]", b.lower[j], b.upper[j]);
            }
        }
    }
    Ok(())
}
