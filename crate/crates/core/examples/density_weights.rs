//! Finite-difference density weights from quantile gaps, checked against
//! the exact conditional density, followed by clipping and normalization.
//!
//! cargo run --example density_weights

use cpcp::conformal::{clip_normalize_weights, unit_mean_weights, weights_from_gaps};
use cpcp::data::{SyntheticOracle, SyntheticSpec};

fn main() -> cpcp::Result<()> {
    let oracle = SyntheticOracle {
        spec: SyntheticSpec::heteroscedastic(),
    };
    let tau = 0.9;
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "x1", "delta", "estimate", "exact"
    );
    for x1 in [0.0, 0.5, 1.0] {
        let x = [x1, 0.5, 0.5, 0.5, 0.5];
        for delta in [0.05, 0.02, 0.005] {
            let gap = oracle.true_quantile(&x, tau + delta) - oracle.true_quantile(&x, tau - delta);
            let w = weights_from_gaps(&[gap], delta)[0];
            println!(
                "{x1:>6} {delta:>10} {w:>10.5} {:>10.5}",
                oracle.true_density_weight(&x, tau)
            );
        }
    }

    let raw = [10.0, 1.0, 1.0, 0.5];
    let clipped = clip_normalize_weights(&raw, 2.0)?;
    println!("raw {raw:?} -> clipped and normalized {clipped:.4?}");
    println!("rescaled to unit mean {:.4?}", unit_mean_weights(&clipped)?);
    Ok(())
}
