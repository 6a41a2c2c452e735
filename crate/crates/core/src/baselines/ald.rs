//! Quantile regression by asymmetric-Laplace maximum likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::QuantileLevel;
use crate::nn::{ald_scale, fit_head_net, AldObjective, HeadNet, TrainConfig};
use crate::numeric::{mean, population_std, Matrix, RngStream};

/// Shared backbone with a quantile head and a softplus scale head. Only the
/// quantile head is used for prediction sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AldModel {
    net: HeadNet,
    tau: QuantileLevel,
    score_center: f64,
    score_scale: f64,
}

impl AldModel {
    pub fn tau(&self) -> QuantileLevel {
        self.tau
    }

    pub fn head_net(&self) -> &HeadNet {
        &self.net
    }

    pub fn quantiles(&self, x: &Matrix) -> Result<Vec<f64>> {
        let f = self.net.features(x)?;
        Ok(self.net.heads[0]
            .forward(&f)?
            .as_slice()
            .iter()
            .map(|q| self.score_center + self.score_scale * q)
            .collect())
    }

    /// Fitted scale in score units; strictly positive.
    pub fn scales(&self, x: &Matrix) -> Result<Vec<f64>> {
        let f = self.net.features(x)?;
        Ok(self.net.heads[1]
            .forward(&f)?
            .as_slice()
            .iter()
            .map(|r| self.score_scale * ald_scale(*r))
            .collect())
    }
}

pub(crate) fn ald_fit_with(
    x: &Matrix,
    scores: &[f64],
    tau: QuantileLevel,
    config: &TrainConfig,
    freeze_scale: bool,
    rng: &mut RngStream,
) -> Result<AldModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyData("likelihood training set".into()));
    }
    if x.rows() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "likelihood training scores",
            expected: x.rows(),
            actual: scores.len(),
        });
    }
    let center = mean(scores);
    let sd = population_std(scores);
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let targets: Vec<f64> = scores.iter().map(|s| (s - center) / scale).collect();
    let mut dims = vec![x.cols()];
    dims.extend_from_slice(&config.hidden);
    let mut net = HeadNet::init(&dims, &[1, 1], rng)?;
    let objective = AldObjective {
        targets: &targets,
        tau,
        freeze_scale,
    };
    fit_head_net(&mut net, x, &objective, config, rng)?;
    Ok(AldModel {
        net,
        tau,
        score_center: center,
        score_scale: scale,
    })
}

/// Jointly fits the quantile and scale heads by minimizing the mean
/// negative log-likelihood `ln σ̂ + ρ_τ(q̂, s)/σ̂`.
pub fn ald_fit(
    x: &Matrix,
    scores: &[f64],
    tau: QuantileLevel,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<AldModel> {
    ald_fit_with(x, scores, tau, config, false, rng)
}
