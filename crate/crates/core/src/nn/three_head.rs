//! Monotone three-head quantile network.
//!
//! A shared backbone `h` feeds a main head and two gap heads:
//!
//! ```text
//! q_main = φ_main(h(x))
//! q_high = q_main + softplus(φ_high(h(x)))
//! q_low  = q_main − softplus(φ_low(h(x)))
//! ```
//!
//! so the three quantiles at `τ − δ`, `τ`, `τ + δ` can never cross. Training
//! runs on standardized scores (`(s − center)/scale`); outputs are mapped back
//! to score units, which commutes with quantiles because the map is affine
//! and increasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{check_lambda, QuantileLevel};
use crate::nn::adam::OptimizerState;
use crate::nn::head_net::{fit_head_net, HeadNet};
use crate::nn::mlp::{softplus, Dense};
use crate::nn::objectives::{JointQuantileObjective, PinballObjective};
use crate::nn::TrainConfig;
use crate::numeric::{mean, population_std, Matrix, RngStream};

const MAIN: usize = 0;
const LOW_GAP: usize = 1;
const HIGH_GAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileTriple {
    pub low: f64,
    pub main: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeHeadQuantileNet {
    net: HeadNet,
    tau: QuantileLevel,
    delta: f64,
    score_center: f64,
    score_scale: f64,
}

/// Rejects `δ` outside `(0, min(τ, 1 − τ))`.
pub fn validate_delta(tau: QuantileLevel, delta: f64) -> Result<()> {
    let t = tau.value();
    if delta > 0.0 && delta < t.min(1.0 - t) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "bandwidth delta={delta} must lie in (0, {})",
            t.min(1.0 - t)
        )))
    }
}

impl ThreeHeadQuantileNet {
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        tau: QuantileLevel,
        delta: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        validate_delta(tau, delta)?;
        if hidden.is_empty() {
            return Err(Error::invalid("three-head backbone needs a hidden layer"));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        let net = HeadNet::init(&dims, &[1, 1, 1], rng)?;
        Ok(ThreeHeadQuantileNet {
            net,
            tau,
            delta,
            score_center: 0.0,
            score_scale: 1.0,
        })
    }

    pub fn tau(&self) -> QuantileLevel {
        self.tau
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn head_net(&self) -> &HeadNet {
        &self.net
    }

    pub fn head_main(&self) -> &Dense {
        &self.net.heads[MAIN]
    }

    pub fn head_main_mut(&mut self) -> &mut Dense {
        &mut self.net.heads[MAIN]
    }

    pub fn head_low_gap(&self) -> &Dense {
        &self.net.heads[LOW_GAP]
    }

    pub fn head_high_gap(&self) -> &Dense {
        &self.net.heads[HIGH_GAP]
    }

    pub fn head_gaps_mut(&mut self) -> (&mut Dense, &mut Dense) {
        let (_, rest) = self.net.heads.split_at_mut(1);
        let (low, high) = rest.split_at_mut(1);
        (&mut low[0], &mut high[0])
    }

    pub fn backbone(&self) -> &crate::nn::MlpParams {
        &self.net.backbone
    }

    /// Affine map from network units to score units.
    pub fn score_scaling(&self) -> (f64, f64) {
        (self.score_center, self.score_scale)
    }

    pub fn set_score_scaling(&mut self, center: f64, scale: f64) -> Result<()> {
        if !(scale > 0.0 && scale.is_finite() && center.is_finite()) {
            return Err(Error::invalid(
                "score scaling must be finite with positive scale",
            ));
        }
        self.score_center = center;
        self.score_scale = scale;
        Ok(())
    }

    fn standardize_scores(&self, scores: &[f64]) -> Vec<f64> {
        scores
            .iter()
            .map(|s| (s - self.score_center) / self.score_scale)
            .collect()
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<Vec<QuantileTriple>> {
        let outs = self.net.forward(x)?;
        Ok((0..x.rows())
            .map(|i| {
                let main = outs[MAIN][(i, 0)];
                let low_gap = softplus(outs[LOW_GAP][(i, 0)]);
                let high_gap = softplus(outs[HIGH_GAP][(i, 0)]);
                let c = self.score_center;
                let s = self.score_scale;
                QuantileTriple {
                    low: c + s * (main - low_gap),
                    main: c + s * main,
                    high: c + s * (main + high_gap),
                }
            })
            .collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<QuantileTriple> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&m)?[0])
    }

    /// `q_main` for each row, in score units.
    pub fn main_quantiles(&self, x: &Matrix) -> Result<Vec<f64>> {
        let f = self.net.features(x)?;
        let out = self.net.heads[MAIN].forward(&f)?;
        Ok(out
            .as_slice()
            .iter()
            .map(|m| self.score_center + self.score_scale * m)
            .collect())
    }
}

fn check_training_data(x: &Matrix, scores: &[f64], input_dim: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::EmptyData("quantile training set".into()));
    }
    if x.rows() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "quantile training scores",
            expected: x.rows(),
            actual: scores.len(),
        });
    }
    if x.cols() != input_dim {
        return Err(Error::DimensionMismatch {
            context: "quantile training features",
            expected: input_dim,
            actual: x.cols(),
        });
    }
    if !x.is_finite() || scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    Ok(())
}

/// Joint plain-pinball training of all three heads at `τ − δ`, `τ`, `τ + δ`.
/// Sets the net's score standardization from `scores`. Returns epoch losses.
pub fn train_quantile_joint(
    net: &mut ThreeHeadQuantileNet,
    x: &Matrix,
    scores: &[f64],
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_training_data(x, scores, net.input_dim())?;
    validate_delta(net.tau, net.delta)?;
    let std = population_std(scores);
    net.set_score_scaling(mean(scores), if std > 0.0 { std } else { 1.0 })?;
    let targets = net.standardize_scores(scores);
    let objective = JointQuantileObjective {
        targets: &targets,
        low: net.tau.shifted(-net.delta)?,
        main: net.tau,
        high: net.tau.shifted(net.delta)?,
    };
    fit_head_net(&mut net.net, x, &objective, config, rng)
}

/// Fine-tunes only the main head on frozen backbone features with the
/// objective `λ·mean(wᵢρ_τ) + (1 − λ)·mean(ρ_τ)`. Every other parameter is
/// left bit-identical. Returns epoch losses.
pub fn finetune_main_head(
    net: &mut ThreeHeadQuantileNet,
    x: &Matrix,
    scores: &[f64],
    weights: &[f64],
    lambda: f64,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_training_data(x, scores, net.input_dim())?;
    if weights.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "fine-tuning weights",
            expected: scores.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid(
            "fine-tuning weights must be finite and nonnegative",
        ));
    }
    check_lambda(lambda)?;
    let targets = net.standardize_scores(scores);
    let features = net.net.features(x)?;
    let objective = PinballObjective {
        targets: &targets,
        tau: net.tau,
        weights: Some(weights),
        lambda,
    };
    fit_linear_head(&mut net.net.heads[MAIN], &features, &objective, config, rng)
}

/// Mini-batch Adam on a single linear head over fixed features.
pub(crate) fn fit_linear_head(
    head: &mut Dense,
    features: &Matrix,
    objective: &impl crate::nn::Objective,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let n = features.rows();
    let batch = config.batch_size.max(1);
    let mut opt = OptimizerState::new(
        config.adam,
        &[head.weight.as_slice().len(), head.bias.len()],
    );
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let order = rng.permutation(n);
        let mut total = 0.0;
        let mut batches = 0usize;
        for rows in order.chunks(batch) {
            let fb = features.select_rows(rows);
            let out = head.forward(&fb)?;
            let (loss, grads) = objective.loss_and_grad(rows, &[out]);
            let (g, _) = head.backward(&fb, &grads[0])?;
            opt.step(&mut head.param_slices_mut(), &g.slices())?;
            total += loss;
            batches += 1;
        }
        history.push(total / batches as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::adam::AdamConfig;
    use crate::numeric::{normal_pdf, normal_quantile};

    fn tau(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    fn random_features(n: usize, p: usize, rng: &mut RngStream) -> Matrix {
        let data = (0..n * p).map(|_| rng.uniform()).collect();
        Matrix::from_vec(n, p, data).unwrap()
    }

    #[test]
    fn invalid_delta_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert!(ThreeHeadQuantileNet::new(2, &[4], tau(0.9), 0.1, &mut rng).is_err());
        assert!(ThreeHeadQuantileNet::new(2, &[4], tau(0.9), 0.0, &mut rng).is_err());
        assert!(ThreeHeadQuantileNet::new(2, &[4], tau(0.9), 0.02, &mut rng).is_ok());
    }

    #[test]
    fn zero_gap_heads_give_ln2_gaps() {
        let mut rng = RngStream::new(2, 0);
        let mut net = ThreeHeadQuantileNet::new(3, &[5], tau(0.9), 0.02, &mut rng).unwrap();
        let (low, high) = net.head_gaps_mut();
        for s in low
            .param_slices_mut()
            .into_iter()
            .chain(high.param_slices_mut())
        {
            s.fill(0.0);
        }
        let q = net.forward(&[0.2, 0.4, 0.9]).unwrap();
        assert!((q.main - q.low - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((q.high - q.main - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn saturated_gap_head_is_linear() {
        let mut rng = RngStream::new(3, 0);
        let mut net = ThreeHeadQuantileNet::new(2, &[4], tau(0.9), 0.02, &mut rng).unwrap();
        let (_, high) = net.head_gaps_mut();
        high.weight.as_mut_slice().fill(0.0);
        high.bias[0] = 50.0;
        let q = net.forward(&[0.1, 0.3]).unwrap();
        assert!((q.high - q.main - 50.0).abs() < 1e-9);
    }

    #[test]
    fn random_nets_never_cross() {
        let mut rng = RngStream::new(4, 0);
        for trial in 0..5 {
            let net = ThreeHeadQuantileNet::new(4, &[8, 8], tau(0.8), 0.05, &mut rng).unwrap();
            let x = random_features(200, 4, &mut rng);
            for q in net.forward_batch(&x).unwrap() {
                assert!(q.low < q.main && q.main < q.high, "trial {trial}: {q:?}");
            }
        }
    }

    #[test]
    fn zero_epochs_leave_net_untouched() {
        let mut rng = RngStream::new(5, 0);
        let mut net = ThreeHeadQuantileNet::new(2, &[4], tau(0.9), 0.02, &mut rng).unwrap();
        let before = net.head_net().clone();
        let x = random_features(10, 2, &mut rng);
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        train_quantile_joint(&mut net, &x, &s, &cfg, &mut rng).unwrap();
        assert_eq!(net.head_net(), &before);
    }

    #[test]
    fn homoscedastic_joint_training_recovers_normal_quantiles() {
        let mut rng = RngStream::new(6, 0);
        let n = 2000;
        let x = random_features(n, 3, &mut rng);
        let s: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let cfg = TrainConfig {
            hidden: vec![32, 32],
            epochs: 150,
            batch_size: 64,
            adam: AdamConfig::default(),
        };
        let mut net = ThreeHeadQuantileNet::new(3, &cfg.hidden, tau(0.9), 0.02, &mut rng).unwrap();
        train_quantile_joint(&mut net, &x, &s, &cfg, &mut rng).unwrap();
        let test = random_features(500, 3, &mut rng);
        let qs = net.forward_batch(&test).unwrap();
        let mean_main = qs.iter().map(|q| q.main).sum::<f64>() / qs.len() as f64;
        let mean_gap = qs.iter().map(|q| q.high - q.low).sum::<f64>() / qs.len() as f64;
        let z = normal_quantile(0.9);
        assert!((mean_main - z).abs() < 0.1, "mean q_main {mean_main}");
        let target_gap = 2.0 * 0.02 / normal_pdf(z);
        assert!((target_gap - 0.2279).abs() < 1e-3);
        assert!(
            mean_gap > target_gap / 2.0 && mean_gap < target_gap * 2.0,
            "mean gap {mean_gap} vs {target_gap}"
        );
        for q in &qs {
            assert!(q.low < q.main && q.main < q.high);
        }
    }

    #[test]
    fn finetune_touches_only_main_head() {
        let mut rng = RngStream::new(7, 0);
        let cfg = TrainConfig {
            hidden: vec![8, 8],
            epochs: 3,
            batch_size: 16,
            adam: AdamConfig::default(),
        };
        let x = random_features(100, 2, &mut rng);
        let s: Vec<f64> = (0..100).map(|_| rng.standard_normal().abs()).collect();
        let mut net = ThreeHeadQuantileNet::new(2, &cfg.hidden, tau(0.9), 0.02, &mut rng).unwrap();
        train_quantile_joint(&mut net, &x, &s, &cfg, &mut rng).unwrap();
        let before = net.clone();
        let w: Vec<f64> = (0..100).map(|i| 0.5 + (i % 3) as f64).collect();
        finetune_main_head(&mut net, &x, &s, &w, 0.5, &cfg, &mut rng).unwrap();
        assert_eq!(net.backbone(), before.backbone());
        assert_eq!(net.head_low_gap(), before.head_low_gap());
        assert_eq!(net.head_high_gap(), before.head_high_gap());
        assert_eq!(net.score_scaling(), before.score_scaling());
        assert_ne!(net.head_main(), before.head_main());
    }

    #[test]
    fn unit_weights_match_plain_finetuning_bitwise() {
        let mut rng = RngStream::new(8, 0);
        let cfg = TrainConfig {
            hidden: vec![8],
            epochs: 5,
            batch_size: 16,
            adam: AdamConfig::default(),
        };
        let x = random_features(80, 2, &mut rng);
        let s: Vec<f64> = (0..80).map(|_| rng.standard_normal().abs()).collect();
        let mut net = ThreeHeadQuantileNet::new(2, &cfg.hidden, tau(0.9), 0.02, &mut rng).unwrap();
        train_quantile_joint(&mut net, &x, &s, &cfg, &mut rng).unwrap();
        let ones = vec![1.0; 80];
        let mut weighted = net.clone();
        let mut plain = net.clone();
        finetune_main_head(
            &mut weighted,
            &x,
            &s,
            &ones,
            1.0,
            &cfg,
            &mut RngStream::new(9, 1),
        )
        .unwrap();
        let arbitrary: Vec<f64> = (0..80).map(|i| i as f64).collect();
        finetune_main_head(
            &mut plain,
            &x,
            &s,
            &arbitrary,
            0.0,
            &cfg,
            &mut RngStream::new(9, 1),
        )
        .unwrap();
        assert_eq!(weighted, plain);
    }

    #[test]
    fn finetune_rejects_weight_count_mismatch() {
        let mut rng = RngStream::new(10, 0);
        let mut net = ThreeHeadQuantileNet::new(2, &[4], tau(0.9), 0.02, &mut rng).unwrap();
        let x = random_features(5, 2, &mut rng);
        let s = vec![1.0; 5];
        let cfg = TrainConfig::default();
        assert!(finetune_main_head(&mut net, &x, &s, &[1.0; 4], 0.5, &cfg, &mut rng).is_err());
        assert!(finetune_main_head(&mut net, &x, &s, &[1.0; 5], 1.5, &cfg, &mut rng).is_err());
    }
}
