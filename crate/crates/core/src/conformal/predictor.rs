use serde::{Deserialize, Serialize};

use crate::baselines::{AldModel, CqrModel, PlcpModel};
use crate::conformal::linf_score;
use crate::error::{Error, Result};
use crate::losses::QuantileLevel;
use crate::nn::{MlpParams, ThreeHeadQuantileNet};
use crate::numeric::Matrix;

/// Axis-aligned box in label space. When a negative half-width inverts the
/// bounds the box is flagged empty and contains nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub empty: bool,
}

impl PredictionBox {
    /// `[lower_j − t, upper_j + t]` per coordinate.
    pub fn widened(lower: &[f64], upper: &[f64], t: f64) -> Self {
        let lower: Vec<f64> = lower.iter().map(|l| l - t).collect();
        let upper: Vec<f64> = upper.iter().map(|u| u + t).collect();
        let empty = lower.iter().zip(&upper).any(|(l, u)| l > u);
        PredictionBox {
            lower,
            upper,
            empty,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        !self.empty
            && y.len() == self.dim()
            && y.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }
}

/// `[center ± t]`: the set `{y : ‖y − center‖_∞ ≤ t}`.
pub fn predict_box(center: &[f64], t: f64) -> PredictionBox {
    PredictionBox::widened(center, center, t)
}

/// Learned conditional quantile of the score used for rectification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuantileModel {
    ThreeHead(ThreeHeadQuantileNet),
    Ald(AldModel),
}

impl QuantileModel {
    pub fn quantiles(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            QuantileModel::ThreeHead(net) => net.main_quantiles(x),
            QuantileModel::Ald(m) => m.quantiles(x),
        }
    }
}

/// A calibrated set-valued rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedPredictor {
    /// `‖y − μ̂(x)‖_∞ ≤ threshold`
    Split { point: MlpParams, threshold: f64 },
    /// `‖y − μ̂(x)‖_∞ ≤ q̂(x) + shift`
    Rectified {
        point: MlpParams,
        quantile: QuantileModel,
        shift: f64,
    },
    /// `y ∈ [lo(x) − t, hi(x) + t]`
    Cqr(CqrModel),
    /// `‖y − μ̂(x)‖_∞ ≤ threshold[group(x)]`
    Plcp {
        point: MlpParams,
        partition: PlcpModel,
    },
}

/// A fitted method together with its target level and calibration size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalPredictor {
    pub method: String,
    pub tau: QuantileLevel,
    /// Number of scores in the final conformal step.
    pub calibration_size: usize,
    pub fitted: FittedPredictor,
}

impl ConformalPredictor {
    pub fn feature_dim(&self) -> usize {
        match &self.fitted {
            FittedPredictor::Split { point, .. }
            | FittedPredictor::Rectified { point, .. }
            | FittedPredictor::Plcp { point, .. } => point.input_dim(),
            FittedPredictor::Cqr(m) => m.feature_dim(),
        }
    }

    /// Conformal shift (or global threshold) reported alongside results.
    pub fn shift(&self) -> Option<f64> {
        match &self.fitted {
            FittedPredictor::Split { threshold, .. } => Some(*threshold),
            FittedPredictor::Rectified { shift, .. } => Some(*shift),
            FittedPredictor::Cqr(m) => Some(m.shift),
            FittedPredictor::Plcp { .. } => None,
        }
    }

    pub fn boxes(&self, x: &Matrix) -> Result<Vec<PredictionBox>> {
        if x.cols() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                context: "predictor features",
                expected: self.feature_dim(),
                actual: x.cols(),
            });
        }
        let centred = |point: &MlpParams, t: Vec<f64>| -> Result<Vec<PredictionBox>> {
            let mu = point.forward_batch(x)?;
            Ok((0..x.rows())
                .map(|i| predict_box(mu.row(i), t[i]))
                .collect())
        };
        match &self.fitted {
            FittedPredictor::Split { point, threshold } => {
                centred(point, vec![*threshold; x.rows()])
            }
            FittedPredictor::Rectified {
                point,
                quantile,
                shift,
            } => {
                let q = quantile.quantiles(x)?;
                centred(point, q.into_iter().map(|v| v + shift).collect())
            }
            FittedPredictor::Plcp { point, partition } => centred(point, partition.thresholds(x)?),
            FittedPredictor::Cqr(m) => m.boxes(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<PredictionBox> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.boxes(&m)?.remove(0))
    }

    /// Score-rule membership, computed independently of the box geometry.
    pub fn covers(&self, x: &[f64], y: &[f64]) -> Result<bool> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        match &self.fitted {
            FittedPredictor::Split { point, threshold } => {
                Ok(linf_score(&point.forward_batch(&m)?.into_vec(), y)? <= *threshold)
            }
            FittedPredictor::Rectified {
                point,
                quantile,
                shift,
            } => {
                let s = linf_score(&point.forward_batch(&m)?.into_vec(), y)?;
                Ok(s <= quantile.quantiles(&m)?[0] + shift)
            }
            FittedPredictor::Plcp { point, partition } => {
                let s = linf_score(&point.forward_batch(&m)?.into_vec(), y)?;
                Ok(s <= partition.thresholds(&m)?[0])
            }
            FittedPredictor::Cqr(cqr) => {
                Ok(cqr.scores(&m, &Matrix::from_vec(1, y.len(), y.to_vec())?)?[0] <= cqr.shift)
            }
        }
    }
}
