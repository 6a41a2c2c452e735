//! Fit one method, save it with its feature standardizer, reload it and
//! predict a box for a raw feature vector.
//!
//! cargo run --release --example checkpoint

use cpcp::baselines::Method;
use cpcp::experiment::{
    fit_single, load_checkpoint, save_checkpoint, Checkpoint, ExperimentConfig,
};
use cpcp::numeric::Matrix;

fn main() -> cpcp::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        [dataset]
        kind = "synthetic"
        n = 2000
        [training.regressor]
        hidden = [32]
        epochs = 40
        [training.quantile]
        hidden = [32]
        epochs = 40
        "#,
    )?;
    let (rep, predictor) = fit_single(
        &cfg,
        Method::Cpcp {
            clip: true,
            mix: true,
        },
        0,
    )?;
    let path = std::env::temp_dir().join("cpcp-example.ckpt");
    save_checkpoint(
        &path,
        &Checkpoint {
            standardizer: rep.standardizer.clone(),
            predictor,
        },
    )?;
    let model = load_checkpoint(&path)?;
    println!(
        "loaded {} (tau {}) from {}",
        model.predictor.method,
        model.predictor.tau.value(),
        path.display()
    );
    for x1 in [0.1, 0.5, 0.9] {
        let x = Matrix::from_vec(1, 5, vec![x1, 0.5, 0.5, 0.5, 0.5])?;
        let b = &model.predict_raw(&x)?[0];
        println!(
            "x1 = {x1}: y in [{:.3}, {:.3}] (width {:.3})",
            b.lower[0],
            b.upper[0],
            b.upper[0] - b.lower[0]
        );
    }
    Ok(())
}
