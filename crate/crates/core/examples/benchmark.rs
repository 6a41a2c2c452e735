//! Run a small Monte-Carlo benchmark from a TOML config and print the
//! per-method summary.
//!
//! cargo run --release --example benchmark -- [config.toml]

use cpcp::experiment::{format_summary, run_experiment, summarize, ExperimentConfig};

fn main() -> cpcp::Result<()> {
    let mut cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml_str(
            r#"
            [run]
            repetitions = 3
            methods = ["split", "rcp", "cpcp-clip-mix", "cqr", "plcp-20"]
            [dataset]
            kind = "synthetic"
            n = 2000
            [training.regressor]
            hidden = [32]
            epochs = 40
            [training.quantile]
            hidden = [32]
            epochs = 60
            [training.partition]
            hidden = [16]
            epochs = 40
            "#,
        )?,
    };
    cfg.run.output = None;
    let rows = run_experiment(&cfg)?;
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("{} seed {}: {}", r.method, r.seed, r.status);
    }
    print!("{}", format_summary(&summarize(&rows)));
    Ok(())
}
