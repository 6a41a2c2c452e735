use crate::error::{Error, Result};
use crate::nn::ThreeHeadQuantileNet;
use crate::numeric::Matrix;

/// Lower bound on the quantile gap in the finite-difference weight.
pub const WEIGHT_DENOMINATOR_FLOOR: f64 = 1e-8;

/// `2δ / max(gap, floor)` per sample.
pub fn weights_from_gaps(gaps: &[f64], delta: f64) -> Vec<f64> {
    gaps.iter()
        .map(|g| 2.0 * delta / g.max(WEIGHT_DENOMINATOR_FLOOR))
        .collect()
}

/// Finite-difference density estimates `2δ / (q_high(x) − q_low(x))`.
pub fn estimate_weights(net: &ThreeHeadQuantileNet, x: &Matrix) -> Result<Vec<f64>> {
    let gaps: Vec<f64> = net
        .forward_batch(x)?
        .iter()
        .map(|q| q.high - q.low)
        .collect();
    Ok(weights_from_gaps(&gaps, net.delta()))
}

fn check_raw(raw: &[f64]) -> Result<()> {
    if raw.is_empty() {
        return Err(Error::EmptyData("weights".into()));
    }
    if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    Ok(())
}

/// Rescales to sum 1; an all-zero input becomes uniform.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    check_raw(raw)?;
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Ok(vec![1.0 / raw.len() as f64; raw.len()]);
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// Caps each weight at `cap_multiple · mean(raw)`, then normalizes to sum 1.
pub fn clip_normalize_weights(raw: &[f64], cap_multiple: f64) -> Result<Vec<f64>> {
    check_raw(raw)?;
    if !(cap_multiple > 0.0 && cap_multiple.is_finite()) {
        return Err(Error::invalid(format!(
            "clip multiple must be positive, got {cap_multiple}"
        )));
    }
    let cap = cap_multiple * raw.iter().sum::<f64>() / raw.len() as f64;
    let clipped: Vec<f64> = raw.iter().map(|w| w.min(cap)).collect();
    normalize_weights(&clipped)
}

/// Rescales to mean 1. Constant inputs map to exactly 1.0.
pub fn unit_mean_weights(w: &[f64]) -> Result<Vec<f64>> {
    check_raw(w)?;
    if w.iter().all(|v| *v == w[0]) {
        return Ok(vec![1.0; w.len()]);
    }
    let n = w.len() as f64;
    Ok(normalize_weights(w)?.into_iter().map(|v| v * n).collect())
}
