//! Closed forms for the density-weighted surrogate on location-scale laws.
//!
//! For `S = ν + σξ` with base law `F₀`, the expected pinball loss is
//! `L(q) = τ(ν − q) + σ·I₀((q − ν)/σ)` where `I₀(z) = ∫_{-∞}^{z} F₀`. Its
//! excess over the true quantile, the squared CDF error at `q`, and the
//! finite-difference density estimate are all available exactly here; they
//! back the numerical checks of the weighted objective.

use crate::numeric::BaseDistribution;

/// A scalar location-scale law `ν + σξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationScale {
    pub base: BaseDistribution,
    pub location: f64,
    pub scale: f64,
}

impl LocationScale {
    pub fn standard_normal() -> Self {
        LocationScale {
            base: BaseDistribution::Normal,
            location: 0.0,
            scale: 1.0,
        }
    }

    pub fn cdf(&self, s: f64) -> f64 {
        self.base.cdf((s - self.location) / self.scale)
    }

    pub fn pdf(&self, s: f64) -> f64 {
        self.base.pdf((s - self.location) / self.scale) / self.scale
    }

    pub fn quantile(&self, tau: f64) -> f64 {
        self.location + self.scale * self.base.quantile(tau)
    }

    /// `E[ρ_τ(q, S)]`.
    pub fn expected_pinball(&self, tau: f64, q: f64) -> f64 {
        let z = (q - self.location) / self.scale;
        tau * (self.location - q) + self.scale * self.base.integrated_cdf(z)
    }

    /// `E(ε) = L(q_τ + ε) − L(q_τ)`.
    pub fn excess_pinball_risk(&self, tau: f64, eps: f64) -> f64 {
        let q = self.quantile(tau);
        self.expected_pinball(tau, q + eps) - self.expected_pinball(tau, q)
    }

    /// `(F(q_τ + ε) − τ)²`.
    pub fn squared_cdf_error(&self, tau: f64, eps: f64) -> f64 {
        let d = self.cdf(self.quantile(tau) + eps) - tau;
        d * d
    }

    /// `|(F(q_τ+ε) − τ)² − 2 f(q_τ) E(ε)|`, the third-order remainder of the
    /// weighted-pinball approximation.
    pub fn surrogate_residual(&self, tau: f64, eps: f64) -> f64 {
        let weight = self.pdf(self.quantile(tau));
        (self.squared_cdf_error(tau, eps) - 2.0 * weight * self.excess_pinball_risk(tau, eps)).abs()
    }

    /// `2δ / (q_{τ+δ} − q_{τ−δ})`, the finite-difference estimate of `f(q_τ)`.
    pub fn finite_difference_density(&self, tau: f64, delta: f64) -> f64 {
        2.0 * delta / (self.quantile(tau + delta) - self.quantile(tau - delta))
    }
}
