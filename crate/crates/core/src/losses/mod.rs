//! Quantile objectives: pinball, weighted/mixed pinball and the asymmetric
//! Laplace negative log-likelihood, each with the subgradient used in training.
//!
//! Subgradient convention at the kink `u == q`: the right limit `1 - τ`, i.e.
//! `∂ρ/∂q = -τ + 1[u ≤ q]`.

pub mod surrogate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A quantile level strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(QuantileLevel(tau))
        } else {
            Err(Error::invalid(format!(
                "quantile level {tau} outside (0, 1)"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `τ + offset`, validated.
    pub fn shifted(self, offset: f64) -> Result<Self> {
        QuantileLevel::new(self.0 + offset)
    }
}

/// A nonnegative, finite per-sample weight.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SampleWeight(f64);

impl SampleWeight {
    pub fn new(w: f64) -> Result<Self> {
        if w.is_finite() && w >= 0.0 {
            Ok(SampleWeight(w))
        } else {
            Err(Error::invalid(format!(
                "sample weight {w} must be finite and >= 0"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `ρ_τ(q, u) = max{τ(u − q), (τ − 1)(u − q)}`.
#[inline]
pub fn pinball(tau: QuantileLevel, q: f64, u: f64) -> f64 {
    let r = u - q;
    let t = tau.0;
    (t * r).max((t - 1.0) * r)
}

/// Subgradient of [`pinball`] in `q`: `-τ` above the prediction, `1 − τ` at or below.
#[inline]
pub fn pinball_subgrad_q(tau: QuantileLevel, q: f64, u: f64) -> f64 {
    if u <= q {
        1.0 - tau.0
    } else {
        -tau.0
    }
}

fn check_lengths(preds: &[f64], targets: &[f64], weights: Option<&[f64]>) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "pinball batch (targets)",
            expected: preds.len(),
            actual: targets.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != preds.len() {
            return Err(Error::DimensionMismatch {
                context: "pinball batch (weights)",
                expected: preds.len(),
                actual: w.len(),
            });
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
    }
    if preds.is_empty() {
        return Err(Error::EmptyData("pinball batch".into()));
    }
    Ok(())
}

pub fn mean_pinball(tau: QuantileLevel, preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets, None)?;
    let s: f64 = preds
        .iter()
        .zip(targets)
        .map(|(&q, &u)| pinball(tau, q, u))
        .sum();
    Ok(s / preds.len() as f64)
}

/// `λ·mean(wᵢ ρᵢ) + (1 − λ)·mean(ρᵢ)`.
pub fn weighted_mixed_pinball_batch(
    tau: QuantileLevel,
    preds: &[f64],
    targets: &[f64],
    weights: &[f64],
    lambda: f64,
) -> Result<f64> {
    check_lengths(preds, targets, Some(weights))?;
    check_lambda(lambda)?;
    let n = preds.len() as f64;
    let (mut weighted, mut plain) = (0.0, 0.0);
    for ((&q, &u), &w) in preds.iter().zip(targets).zip(weights) {
        let r = pinball(tau, q, u);
        weighted += w * r;
        plain += r;
    }
    Ok(lambda * weighted / n + (1.0 - lambda) * plain / n)
}

/// Gradient of [`weighted_mixed_pinball_batch`] with respect to each prediction.
pub fn weighted_mixed_pinball_grad(
    tau: QuantileLevel,
    preds: &[f64],
    targets: &[f64],
    weights: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    check_lengths(preds, targets, Some(weights))?;
    check_lambda(lambda)?;
    let n = preds.len() as f64;
    Ok(preds
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((&q, &u), &w)| mixed_coefficient(w, lambda) * pinball_subgrad_q(tau, q, u) / n)
        .collect())
}

/// Per-sample multiplier of the pinball subgradient under mixing.
#[inline]
pub fn mixed_coefficient(weight: f64, lambda: f64) -> f64 {
    lambda * weight + (1.0 - lambda)
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "mixing ratio {lambda} outside [0, 1]"
        )))
    }
}

/// Asymmetric Laplace negative log-likelihood `ln σ + ρ_τ(q, s)/σ`.
///
/// The normalising constant `−ln τ(1 − τ)` is dropped; it does not depend on
/// the parameters.
pub fn ald_negloglik(tau: QuantileLevel, q: f64, sigma: f64, s: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("ALD scale {sigma} must be > 0")));
    }
    Ok(sigma.ln() + pinball(tau, q, s) / sigma)
}

/// Partial derivatives of [`ald_negloglik`] in `(q, σ)`. `σ` must be positive.
#[inline]
pub fn ald_negloglik_grad(tau: QuantileLevel, q: f64, sigma: f64, s: f64) -> (f64, f64) {
    let dq = pinball_subgrad_q(tau, q, s) / sigma;
    let dsigma = 1.0 / sigma - pinball(tau, q, s) / (sigma * sigma);
    (dq, dsigma)
}

/// Squared error `(p − y)²` and its derivative `2(p − y)`.
#[inline]
pub fn squared_error(pred: f64, target: f64) -> (f64, f64) {
    let r = pred - target;
    (r * r, 2.0 * r)
}
