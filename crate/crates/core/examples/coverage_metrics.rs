//! Conditional-coverage diagnostics for a constant-width predictor whose
//! coverage is known to vary with the first feature.
//!
//! cargo run --release --example coverage_metrics

use cpcp::conformal::predict_box;
use cpcp::data::{generate_synthetic, SyntheticSpec};
use cpcp::metrics::{
    marginal_coverage, mean_log_volume, msce_clustered, oracle_msce, SlabSearch, WscConfig,
};
use cpcp::numeric::RngStream;

fn main() -> cpcp::Result<()> {
    let rng = RngStream::new(9, 0);
    let test = generate_synthetic(
        &SyntheticSpec::heteroscedastic(),
        2000,
        &mut rng.derive("data"),
    )?;
    let oracle = test.oracle.unwrap();
    let tau = 0.9;

    for (name, width) in [
        (
            "constant",
            Box::new(|_: &[f64]| 2.5) as Box<dyn Fn(&[f64]) -> f64>,
        ),
        (
            "oracle",
            Box::new(|x: &[f64]| oracle.linf_score_quantile(x, tau)),
        ),
    ] {
        let boxes: Vec<_> = (0..test.len())
            .map(|i| {
                let x = test.x.row(i);
                predict_box(&[oracle.location(x)], width(x))
            })
            .collect();
        let covered: Vec<bool> = (0..test.len())
            .map(|i| boxes[i].contains(test.y.row(i)))
            .collect();
        let slab = SlabSearch::new(&test.x, WscConfig::default(), &rng.derive("wsc"))?
            .evaluate(&covered)?;
        println!("{name}:");
        println!("  marginal coverage   {:.4}", marginal_coverage(&covered)?);
        println!(
            "  MSCE (k=10)         {:.5}",
            msce_clustered(&test.x, &covered, tau, 10, &mut rng.derive("k10"))?
        );
        println!(
            "  oracle MSCE         {:.5}",
            oracle_msce(Some(&oracle), &test.x, &boxes, tau)?
        );
        println!("  worst-slab coverage {:.4}", slab.coverage);
        if let Some(s) = slab.slab {
            println!(
                "    slab direction {:.2?}, [{:.2}, {:.2}]",
                s.direction, s.lower, s.upper
            );
        }
        println!("  log volume per dim  {:.4}", mean_log_volume(&boxes).0);
    }
    Ok(())
}
