//! Split conformal and rectified conformal thresholds on heteroscedastic
//! data, using the true conditional mean as the point predictor.
//!
//! cargo run --example split_conformal

use cpcp::conformal::{linf_score, predict_box, rcp_fit, split_cp_fit};
use cpcp::data::{generate_synthetic, SyntheticSpec};
use cpcp::losses::QuantileLevel;
use cpcp::metrics::oracle_msce;
use cpcp::numeric::RngStream;

fn main() -> cpcp::Result<()> {
    let spec = SyntheticSpec::heteroscedastic();
    let rng = RngStream::new(0, 0);
    let cal = generate_synthetic(&spec, 2000, &mut rng.derive("cal"))?;
    let test = generate_synthetic(&spec, 2000, &mut rng.derive("test"))?;
    let oracle = cal
        .oracle
        .expect("synthetic data carries its oracle");
    let tau = QuantileLevel::new(0.9)?;

    let center = |x: &[f64]| vec![oracle.location(x)];
    let scores: Vec<f64> = (0..cal.len())
        .map(|i| linf_score(&center(cal.x.row(i)), cal.y.row(i)))
        .collect::<cpcp::Result<_>>()?;

    // Constant-width boxes.
    let threshold = split_cp_fit(&scores, tau)?;
    let split_boxes: Vec<_> = (0..test.len())
        .map(|i| predict_box(&center(test.x.row(i)), threshold))
        .collect();

    // Width follows a (deliberately crude) guess of the score quantile; the
    // conformal shift restores validity.
    let guess = |x: &[f64]| 1.5 * oracle.scale(x);
    let guesses: Vec<f64> = (0..cal.len()).map(|i| guess(cal.x.row(i))).collect();
    let shift = rcp_fit(&scores, &guesses, tau)?;
    let rcp_boxes: Vec<_> = (0..test.len())
        .map(|i| predict_box(&center(test.x.row(i)), guess(test.x.row(i)) + shift))
        .collect();

    for (name, boxes) in [("split", &split_boxes), ("rectified", &rcp_boxes)] {
        let covered = (0..test.len())
            .filter(|&i| boxes[i].contains(test.y.row(i)))
            .count() as f64
            / test.len() as f64;
        let msce = oracle_msce(Some(&oracle), &test.x, boxes, tau.value())?;
        println!("{name:>9}: coverage {covered:.3}, oracle MSCE {msce:.5}");
    }
    println!("split threshold {threshold:.3}, rectified shift {shift:.3}");
    Ok(())
}
