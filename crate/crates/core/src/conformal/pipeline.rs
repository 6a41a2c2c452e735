//! Three-stage calibration: pretrain a three-head quantile net on the first
//! calibration part, fine-tune its main head with density weights on the
//! second, conformalize rectified residuals on the third.

use serde::{Deserialize, Serialize};

use crate::conformal::rcp_fit;
use crate::conformal::weights::{
    clip_normalize_weights, estimate_weights, normalize_weights, unit_mean_weights,
};
use crate::error::{Error, Result};
use crate::losses::QuantileLevel;
use crate::nn::{finetune_main_head, train_quantile_joint, ThreeHeadQuantileNet, TrainConfig};
use crate::numeric::{Matrix, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpcpConfig {
    pub tau: QuantileLevel,
    pub delta: f64,
    /// Cap multiple `M`; `None` disables clipping.
    pub clip: Option<f64>,
    /// Share of the weighted term in the fine-tuning objective.
    pub lambda: f64,
    pub pretrain: TrainConfig,
    /// Only `epochs`, `batch_size` and `adam` are used.
    pub finetune: TrainConfig,
}

impl CpcpConfig {
    pub fn new(tau: QuantileLevel) -> Self {
        CpcpConfig {
            tau,
            delta: 0.02,
            clip: None,
            lambda: 1.0,
            pretrain: TrainConfig::default(),
            finetune: TrainConfig {
                epochs: 50,
                ..TrainConfig::default()
            },
        }
    }
}

/// How the fine-tuning stage weights its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinetuneWeighting {
    /// Finite-difference density estimates from the pretrained gap heads.
    Estimated,
    /// Plain pinball loss.
    Uniform,
}

/// Disjoint positions into the calibration set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationSplit {
    pub pretrain: Vec<usize>,
    pub finetune: Vec<usize>,
    pub conformal: Vec<usize>,
}

/// Seeded permutation cut into `⌊0.4n⌋`, `⌊0.4n⌋` and the remainder.
pub fn calibration_split(n: usize, rng: &mut RngStream) -> Result<CalibrationSplit> {
    let a = n * 2 / 5;
    if a == 0 || n - 2 * a == 0 {
        return Err(Error::invalid(format!(
            "calibration set of {n} rows is too small for a three-way split"
        )));
    }
    let perm = rng.permutation(n);
    Ok(CalibrationSplit {
        pretrain: perm[..a].to_vec(),
        finetune: perm[a..2 * a].to_vec(),
        conformal: perm[2 * a..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainedStage {
    pub split: CalibrationSplit,
    pub net: ThreeHeadQuantileNet,
}

fn pick(scores: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| scores[i]).collect()
}

/// Splits the calibration set and jointly trains the three heads on the first part.
pub fn pretrain_stage(
    x: &Matrix,
    scores: &[f64],
    config: &CpcpConfig,
    split_rng: &mut RngStream,
    train_rng: &mut RngStream,
) -> Result<PretrainedStage> {
    if x.rows() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "calibration scores",
            expected: x.rows(),
            actual: scores.len(),
        });
    }
    let split = calibration_split(x.rows(), split_rng)?;
    let mut net = ThreeHeadQuantileNet::new(
        x.cols(),
        &config.pretrain.hidden,
        config.tau,
        config.delta,
        train_rng,
    )?;
    train_quantile_joint(
        &mut net,
        &x.select_rows(&split.pretrain),
        &pick(scores, &split.pretrain),
        &config.pretrain,
        train_rng,
    )?;
    Ok(PretrainedStage { split, net })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifiedFit {
    pub net: ThreeHeadQuantileNet,
    pub shift: f64,
    /// Unit-mean fine-tuning weights, aligned with `split.finetune`.
    pub weights: Vec<f64>,
    pub calibration_size: usize,
}

/// Fine-tunes a copy of the pretrained net and conformalizes on the last part.
pub fn finetune_stage(
    stage: &PretrainedStage,
    x: &Matrix,
    scores: &[f64],
    config: &CpcpConfig,
    weighting: FinetuneWeighting,
    rng: &mut RngStream,
) -> Result<RectifiedFit> {
    let split = &stage.split;
    let x2 = x.select_rows(&split.finetune);
    let s2 = pick(scores, &split.finetune);
    let weights = match weighting {
        FinetuneWeighting::Uniform => vec![1.0; s2.len()],
        FinetuneWeighting::Estimated => {
            let raw = estimate_weights(&stage.net, &x2)?;
            let normalized = match config.clip {
                Some(m) => clip_normalize_weights(&raw, m)?,
                None => normalize_weights(&raw)?,
            };
            unit_mean_weights(&normalized)?
        }
    };
    let mut net = stage.net.clone();
    finetune_main_head(
        &mut net,
        &x2,
        &s2,
        &weights,
        config.lambda,
        &config.finetune,
        rng,
    )?;
    let x3 = x.select_rows(&split.conformal);
    let shift = rcp_fit(
        &pick(scores, &split.conformal),
        &net.main_quantiles(&x3)?,
        config.tau,
    )?;
    Ok(RectifiedFit {
        net,
        shift,
        weights,
        calibration_size: split.conformal.len(),
    })
}

/// Full density-weighted pipeline with streams derived from `rng`.
pub fn cpcp_fit(
    x: &Matrix,
    scores: &[f64],
    config: &CpcpConfig,
    rng: &RngStream,
) -> Result<RectifiedFit> {
    let stage = pretrain_stage(
        x,
        scores,
        config,
        &mut rng.derive("cal-split"),
        &mut rng.derive("three-head-pretrain"),
    )?;
    finetune_stage(
        &stage,
        x,
        scores,
        config,
        FinetuneWeighting::Estimated,
        &mut rng.derive("finetune-shuffle"),
    )
}
