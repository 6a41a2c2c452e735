//! Conformalized quantile regression with non-crossing interval heads.

use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_quantile, PredictionBox};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{ald_negloglik_grad, pinball, pinball_subgrad_q, QuantileLevel};
use crate::nn::{ald_scale, fit_head_net, sigmoid, softplus, HeadNet, Objective, TrainConfig};
use crate::numeric::{Matrix, RngStream};

/// `max_j max(lo_j − y_j, y_j − hi_j)`; negative when `y` is strictly inside.
pub fn cqr_score(lower: &[f64], upper: &[f64], y: &[f64]) -> Result<f64> {
    if lower.len() != y.len() || upper.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "interval score",
            expected: lower.len(),
            actual: y.len(),
        });
    }
    Ok(y.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| (l - v).max(v - u))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Heads `[center, low_gap, high_gap]` (each of width `d`), plus
/// `[low_scale, high_scale]` when trained by likelihood. Interval bounds are
/// `center − softplus(low_gap)` and `center + softplus(high_gap)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqrModel {
    net: HeadNet,
    label_center: Vec<f64>,
    label_scale: Vec<f64>,
    pub low_level: QuantileLevel,
    pub high_level: QuantileLevel,
    pub likelihood: bool,
    /// Conformal correction added to both sides of every interval.
    pub shift: f64,
}

impl CqrModel {
    pub fn feature_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn label_dim(&self) -> usize {
        self.label_center.len()
    }

    /// Uncorrected lower and upper quantile estimates.
    pub fn bounds(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let outs = self.net.forward(x)?;
        let d = self.label_dim();
        let mut lo = Matrix::zeros(x.rows(), d);
        let mut hi = Matrix::zeros(x.rows(), d);
        for i in 0..x.rows() {
            for j in 0..d {
                let m = outs[0][(i, j)];
                let (c, s) = (self.label_center[j], self.label_scale[j]);
                lo[(i, j)] = c + s * (m - softplus(outs[1][(i, j)]));
                hi[(i, j)] = c + s * (m + softplus(outs[2][(i, j)]));
            }
        }
        Ok((lo, hi))
    }

    pub fn scores(&self, x: &Matrix, y: &Matrix) -> Result<Vec<f64>> {
        let (lo, hi) = self.bounds(x)?;
        (0..x.rows())
            .map(|i| cqr_score(lo.row(i), hi.row(i), y.row(i)))
            .collect()
    }

    pub fn boxes(&self, x: &Matrix) -> Result<Vec<PredictionBox>> {
        let (lo, hi) = self.bounds(x)?;
        Ok((0..x.rows())
            .map(|i| PredictionBox::widened(lo.row(i), hi.row(i), self.shift))
            .collect())
    }
}

struct IntervalObjective<'a> {
    targets: &'a Matrix,
    low: QuantileLevel,
    high: QuantileLevel,
    likelihood: bool,
}

impl Objective for IntervalObjective<'_> {
    fn loss_and_grad(&self, rows: &[usize], outputs: &[Matrix]) -> (f64, Vec<Matrix>) {
        let n = rows.len() as f64;
        let d = self.targets.cols();
        let mut grads: Vec<Matrix> = outputs.iter().map(|o| Matrix::zeros(o.rows(), d)).collect();
        let mut loss = 0.0;
        for (b, &r) in rows.iter().enumerate() {
            for j in 0..d {
                let y = self.targets[(r, j)];
                let m = outputs[0][(b, j)];
                let (a, c) = (outputs[1][(b, j)], outputs[2][(b, j)]);
                let lo = m - softplus(a);
                let hi = m + softplus(c);
                let (d_lo, d_hi) = if self.likelihood {
                    let (ra, rc) = (outputs[3][(b, j)], outputs[4][(b, j)]);
                    let (s_lo, s_hi) = (ald_scale(ra), ald_scale(rc));
                    loss += s_lo.ln() + pinball(self.low, lo, y) / s_lo;
                    loss += s_hi.ln() + pinball(self.high, hi, y) / s_hi;
                    let (dq_lo, ds_lo) = ald_negloglik_grad(self.low, lo, s_lo, y);
                    let (dq_hi, ds_hi) = ald_negloglik_grad(self.high, hi, s_hi, y);
                    grads[3][(b, j)] = ds_lo * sigmoid(ra) / n;
                    grads[4][(b, j)] = ds_hi * sigmoid(rc) / n;
                    (dq_lo, dq_hi)
                } else {
                    loss += pinball(self.low, lo, y) + pinball(self.high, hi, y);
                    (
                        pinball_subgrad_q(self.low, lo, y),
                        pinball_subgrad_q(self.high, hi, y),
                    )
                };
                grads[0][(b, j)] = (d_lo + d_hi) / n;
                grads[1][(b, j)] = -d_lo * sigmoid(a) / n;
                grads[2][(b, j)] = d_hi * sigmoid(c) / n;
            }
        }
        (loss / n, grads)
    }
}

/// Trains interval heads at levels `(1 − τ)/2` and `(1 + τ)/2` on `train`,
/// then sets the shift to the conformal quantile of interval scores on `cal`.
/// With `likelihood` each bound is fitted by asymmetric-Laplace likelihood.
pub fn cqr_fit(
    train: &Dataset,
    cal: &Dataset,
    tau: QuantileLevel,
    config: &TrainConfig,
    likelihood: bool,
    rng: &mut RngStream,
) -> Result<CqrModel> {
    if train.is_empty() || cal.is_empty() {
        return Err(Error::EmptyData(
            "interval regression needs training and calibration rows".into(),
        ));
    }
    let d = train.label_dim();
    let (label_center, label_scale) = crate::nn::train::column_moments(&train.y);
    let mut targets = train.y.clone();
    for i in 0..targets.rows() {
        for j in 0..d {
            targets[(i, j)] = (train.y[(i, j)] - label_center[j]) / label_scale[j];
        }
    }
    let heads: Vec<usize> = vec![d; if likelihood { 5 } else { 3 }];
    let mut dims = vec![train.feature_dim()];
    dims.extend_from_slice(&config.hidden);
    let mut net = HeadNet::init(&dims, &heads, rng)?;
    let low_level = QuantileLevel::new(0.5 * (1.0 - tau.value()))?;
    let high_level = QuantileLevel::new(0.5 * (1.0 + tau.value()))?;
    let objective = IntervalObjective {
        targets: &targets,
        low: low_level,
        high: high_level,
        likelihood,
    };
    fit_head_net(&mut net, &train.x, &objective, config, rng)?;
    let mut model = CqrModel {
        net,
        label_center,
        label_scale,
        low_level,
        high_level,
        likelihood,
        shift: 0.0,
    };
    model.shift = conformal_quantile(&model.scores(&cal.x, &cal.y)?, tau)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    #[test]
    fn score_examples() {
        assert_eq!(
            cqr_score(&[-1.0, 0.0], &[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            0.0
        );
        assert_eq!(cqr_score(&[-1.0], &[1.0], &[2.0]).unwrap(), 1.0);
        assert_eq!(
            cqr_score(&[-1.0, -1.0], &[1.0, 1.0], &[0.0, 1.5]).unwrap(),
            0.5
        );
        assert!(cqr_score(&[-1.0], &[1.0], &[0.0]).unwrap() < 0.0);
        assert!(cqr_score(&[0.0], &[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn interval_gradients_match_finite_differences() {
        let mut rng = RngStream::new(71, 0);
        let targets =
            Matrix::from_vec(4, 2, (0..8).map(|_| rng.standard_normal()).collect()).unwrap();
        for likelihood in [false, true] {
            let obj = IntervalObjective {
                targets: &targets,
                low: QuantileLevel::new(0.05).unwrap(),
                high: QuantileLevel::new(0.95).unwrap(),
                likelihood,
            };
            let rows = [0, 1, 2, 3];
            let k = if likelihood { 5 } else { 3 };
            let outs: Vec<Matrix> = (0..k)
                .map(|_| {
                    Matrix::from_vec(4, 2, (0..8).map(|_| rng.standard_normal()).collect()).unwrap()
                })
                .collect();
            let (_, grads) = obj.loss_and_grad(&rows, &outs);
            let h = 1e-6;
            for head in 0..k {
                for idx in 0..8 {
                    let mut p = outs.clone();
                    let mut m = outs.clone();
                    p[head].as_mut_slice()[idx] += h;
                    m[head].as_mut_slice()[idx] -= h;
                    let fd = (obj.loss_and_grad(&rows, &p).0 - obj.loss_and_grad(&rows, &m).0)
                        / (2.0 * h);
                    let a = grads[head].as_slice()[idx];
                    assert!(
                        (a - fd).abs() <= 1e-5 * a.abs().max(fd.abs()).max(1.0),
                        "{head}/{idx}: {a} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn fitted_intervals_never_cross_and_cover() {
        let spec = SyntheticSpec {
            label_dim: 2,
            ..SyntheticSpec::heteroscedastic()
        };
        let mut rng = RngStream::new(72, 0);
        let train = generate_synthetic(&spec, 1500, &mut rng).unwrap();
        let cal = generate_synthetic(&spec, 500, &mut rng).unwrap();
        let test = generate_synthetic(&spec, 2000, &mut rng).unwrap();
        let cfg = TrainConfig {
            hidden: vec![32, 32],
            epochs: 30,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let tau = QuantileLevel::new(0.9).unwrap();
        for likelihood in [false, true] {
            let model = cqr_fit(&train, &cal, tau, &cfg, likelihood, &mut rng).unwrap();
            let (lo, hi) = model.bounds(&test.x).unwrap();
            assert!(lo.as_slice().iter().zip(hi.as_slice()).all(|(l, h)| l < h));
            let boxes = model.boxes(&test.x).unwrap();
            let cov = (0..test.len())
                .filter(|&i| boxes[i].contains(test.y.row(i)))
                .count() as f64
                / test.len() as f64;
            assert!((cov - 0.9).abs() < 0.04, "coverage {cov}");
        }
    }

    #[test]
    fn shrinking_intervals_approach_split_threshold() {
        // With a zero-width interval at c the score is |y − c|_∞.
        let y = [0.3, -1.2, 2.0, 0.1];
        let c = 0.2;
        for v in y {
            let s = cqr_score(&[c], &[c], &[v]).unwrap();
            assert_eq!(s, (v - c).abs());
        }
    }
}
