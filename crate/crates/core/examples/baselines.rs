//! Conformalized quantile regression (plain and asymmetric-Laplace) and
//! partition-learning conformal prediction side by side.
//!
//! cargo run --release --example baselines

use cpcp::baselines::{cqr_fit, plcp_fit};
use cpcp::conformal::linf_score;
use cpcp::data::{generate_synthetic, split_622, SyntheticSpec};
use cpcp::losses::QuantileLevel;
use cpcp::nn::TrainConfig;
use cpcp::numeric::RngStream;

fn main() -> cpcp::Result<()> {
    let rng = RngStream::new(5, 0);
    let data = generate_synthetic(
        &SyntheticSpec::heteroscedastic(),
        3000,
        &mut rng.derive("data"),
    )?;
    let parts = split_622(data.len(), &mut rng.derive("split"))?;
    let (train, cal, test) = (
        data.select(&parts.train),
        data.select(&parts.cal),
        data.select(&parts.test),
    );
    let tau = QuantileLevel::new(0.9)?;
    let cfg = TrainConfig {
        hidden: vec![32],
        epochs: 40,
        ..TrainConfig::default()
    };

    let coverage = |boxes: &[cpcp::conformal::PredictionBox]| {
        (0..test.len())
            .filter(|&i| boxes[i].contains(test.y.row(i)))
            .count() as f64
            / test.len() as f64
    };

    for likelihood in [false, true] {
        let model = cqr_fit(&train, &cal, tau, &cfg, likelihood, &mut rng.derive("cqr"))?;
        let name = if likelihood { "cqr-ald" } else { "cqr" };
        println!(
            "{name:>8}: shift {:+.3}, test coverage {:.3}",
            model.shift,
            coverage(&model.boxes(&test.x)?)
        );
    }

    // Partition learning on residual scores of the true mean.
    let oracle = data.oracle.unwrap();
    let scores: Vec<f64> = (0..cal.len())
        .map(|i| linf_score(&[oracle.location(cal.x.row(i))], cal.y.row(i)))
        .collect::<cpcp::Result<_>>()?;
    let fit = plcp_fit(&cal.x, &scores, tau, 5, &cfg, &mut rng.derive("plcp"))?;
    let groups = fit.model.assign(&test.x)?;
    let thresholds = fit.model.thresholds(&test.x)?;
    let covered = (0..test.len())
        .filter(|&i| {
            linf_score(&[oracle.location(test.x.row(i))], test.y.row(i)).unwrap() <= thresholds[i]
        })
        .count() as f64
        / test.len() as f64;
    println!(
        "  plcp-5: thresholds {:.3?}, test coverage {covered:.3}",
        fit.model.thresholds
    );
    let mut counts = [0usize; 5];
    groups.iter().for_each(|&g| counts[g] += 1);
    println!("          test rows per group {counts:?}");
    Ok(())
}
