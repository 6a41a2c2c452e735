//! The full density-weighted pipeline on calibration scores: three-head
//! pretraining, weight estimation, weighted fine-tuning, conformal shift.
//!
//! cargo run --release --example cpcp_pipeline

use cpcp::conformal::{
    cpcp_fit, finetune_stage, linf_score, pretrain_stage, CpcpConfig, FinetuneWeighting,
};
use cpcp::data::{generate_synthetic, SyntheticSpec};
use cpcp::losses::QuantileLevel;
use cpcp::nn::TrainConfig;
use cpcp::numeric::RngStream;

fn main() -> cpcp::Result<()> {
    let spec = SyntheticSpec::heteroscedastic();
    let rng = RngStream::new(3, 0);
    let cal = generate_synthetic(&spec, 1500, &mut rng.derive("data"))?;
    let oracle = cal.oracle.unwrap();
    let scores: Vec<f64> = (0..cal.len())
        .map(|i| linf_score(&[oracle.location(cal.x.row(i))], cal.y.row(i)))
        .collect::<cpcp::Result<_>>()?;

    let mut cfg = CpcpConfig::new(QuantileLevel::new(0.9)?);
    cfg.clip = Some(5.0);
    cfg.lambda = 0.5;
    cfg.pretrain = TrainConfig {
        hidden: vec![32],
        epochs: 100,
        batch_size: 64,
        ..TrainConfig::default()
    };
    cfg.finetune.batch_size = 64;
    let fit = cpcp_fit(&cal.x, &scores, &cfg, &rng)?;
    println!(
        "shift {:.4} from {} conformal rows; weight range [{:.3}, {:.3}]",
        fit.shift,
        fit.calibration_size,
        fit.weights.iter().copied().fold(f64::INFINITY, f64::min),
        fit.weights.iter().copied().fold(0.0, f64::max),
    );

    // The stages can also be driven separately, e.g. to compare weighted and
    // plain fine-tuning from one pretrained network.
    let stage = pretrain_stage(
        &cal.x,
        &scores,
        &cfg,
        &mut rng.derive("cal-split"),
        &mut rng.derive("three-head-pretrain"),
    )?;
    for weighting in [FinetuneWeighting::Estimated, FinetuneWeighting::Uniform] {
        let f = finetune_stage(
            &stage,
            &cal.x,
            &scores,
            &cfg,
            weighting,
            &mut rng.derive("finetune-shuffle"),
        )?;
        let x = [0.1, 0.5, 0.5, 0.5, 0.5];
        let q = f.net.forward(&x)?.main + f.shift;
        println!(
            "{weighting:?}: score quantile at x1=0.1 is {q:.3} (oracle {:.3})",
            oracle.linf_score_quantile(&x, 0.9)
        );
    }
    Ok(())
}
