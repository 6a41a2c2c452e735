//! Monte-Carlo coverage of the calibrated methods on a fast configuration.

use cpcp::experiment::{run_experiment, ExperimentConfig};

#[test]
fn coverage_near_target_over_repetitions() {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        [run]
        seed = 21
        repetitions = 60
        methods = ["split", "rcp", "cpcp-clip-mix", "cqr"]
        [dataset]
        kind = "synthetic"
        n = 1000
        [metrics]
        wsc_directions = 10
        [training.regressor]
        hidden = [8]
        epochs = 10
        [training.quantile]
        hidden = [8]
        epochs = 10
        [training.finetune]
        epochs = 10
        "#,
    )
    .unwrap();
    let rows = run_experiment(&cfg).unwrap();
    for method in &cfg.run.methods {
        let cov: Vec<f64> = rows
            .iter()
            .filter(|r| &r.method == method)
            .map(|r| r.marginal_coverage)
            .collect();
        let mean = cov.iter().sum::<f64>() / cov.len() as f64;
        assert!(
            (0.87..0.94).contains(&mean),
            "{method}: mean coverage {mean}"
        );
    }
}
