//! Standard normal and Laplace distribution functions.

use statrs::function::erf::{erfc, erfc_inv};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, `Φ(z) = erfc(-z/√2) / 2`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Inverse of [`normal_cdf`] for `p` in `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

pub fn laplace_cdf(z: f64) -> f64 {
    if z < 0.0 {
        0.5 * z.exp()
    } else {
        1.0 - 0.5 * (-z).exp()
    }
}

pub fn laplace_pdf(z: f64) -> f64 {
    0.5 * (-z.abs()).exp()
}

pub fn laplace_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < 0.5 {
        (2.0 * p).ln()
    } else {
        -(2.0 * (1.0 - p)).ln()
    }
}

/// Standardized base law of a location-scale family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseDistribution {
    Normal,
    Laplace,
}

impl BaseDistribution {
    pub fn cdf(self, z: f64) -> f64 {
        match self {
            BaseDistribution::Normal => normal_cdf(z),
            BaseDistribution::Laplace => laplace_cdf(z),
        }
    }

    pub fn pdf(self, z: f64) -> f64 {
        match self {
            BaseDistribution::Normal => normal_pdf(z),
            BaseDistribution::Laplace => laplace_pdf(z),
        }
    }

    pub fn quantile(self, p: f64) -> f64 {
        match self {
            BaseDistribution::Normal => normal_quantile(p),
            BaseDistribution::Laplace => laplace_quantile(p),
        }
    }

    /// `∫_{-∞}^{z} F(s) ds`, the building block of the expected pinball loss.
    pub fn integrated_cdf(self, z: f64) -> f64 {
        match self {
            BaseDistribution::Normal => z * normal_cdf(z) + normal_pdf(z),
            BaseDistribution::Laplace => {
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    z + 0.5 * (-z).exp()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseDistribution::Normal => "normal",
            BaseDistribution::Laplace => "laplace",
        }
    }
}
