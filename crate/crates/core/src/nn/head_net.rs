//! A shared ReLU backbone feeding several linear heads, plus the generic
//! mini-batch training loop used by every network in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::adam::OptimizerState;
use crate::nn::mlp::{Activation, Dense, DenseGrad, MlpCache, MlpGrads, MlpParams};
use crate::nn::TrainConfig;
use crate::numeric::{Matrix, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadNet {
    /// Feature extractor; ReLU on every layer including the last.
    pub backbone: MlpParams,
    pub heads: Vec<Dense>,
}

#[derive(Debug, Clone)]
pub struct HeadNetCache {
    backbone: MlpCache,
    features: Matrix,
}

#[derive(Debug, Clone)]
pub struct HeadNetGrads {
    pub backbone: MlpGrads,
    pub heads: Vec<DenseGrad>,
}

impl HeadNetGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.backbone.slices();
        for h in &self.heads {
            out.extend(h.slices());
        }
        out
    }
}

/// Mean loss over a mini-batch and its gradient w.r.t. each head's output.
pub trait Objective {
    /// `rows` are dataset indices of the batch; `outputs[k]` is head `k`'s
    /// output with one row per entry of `rows`.
    fn loss_and_grad(&self, rows: &[usize], outputs: &[Matrix]) -> (f64, Vec<Matrix>);
}

impl HeadNet {
    /// `backbone_dims = [input, hidden...]`; one head per entry of `head_outputs`.
    /// Initialisation order: backbone layers, then heads in order.
    pub fn init(
        backbone_dims: &[usize],
        head_outputs: &[usize],
        rng: &mut RngStream,
    ) -> Result<Self> {
        if backbone_dims.len() < 2 {
            return Err(Error::invalid("backbone needs at least one hidden layer"));
        }
        let backbone = MlpParams::init(backbone_dims, Activation::Relu, rng)?;
        let width = *backbone_dims.last().unwrap();
        let heads = head_outputs
            .iter()
            .map(|&k| Dense::init(width, k, rng))
            .collect();
        Ok(HeadNet { backbone, heads })
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.input_dim()
    }

    pub fn features(&self, x: &Matrix) -> Result<Matrix> {
        self.backbone.forward_batch(x)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        let f = self.features(x)?;
        self.heads.iter().map(|h| h.forward(&f)).collect()
    }

    pub fn forward_cached(&self, x: &Matrix) -> Result<(Vec<Matrix>, HeadNetCache)> {
        let (features, backbone) = self.backbone.forward_cached(x)?;
        let outs = self
            .heads
            .iter()
            .map(|h| h.forward(&features))
            .collect::<Result<Vec<_>>>()?;
        Ok((outs, HeadNetCache { backbone, features }))
    }

    pub fn backward(&self, cache: &HeadNetCache, grad_outputs: &[Matrix]) -> Result<HeadNetGrads> {
        let mut grad_features = Matrix::zeros(cache.features.rows(), cache.features.cols());
        let mut heads = Vec::with_capacity(self.heads.len());
        for (head, g) in self.heads.iter().zip(grad_outputs) {
            let (hg, gf) = head.backward(&cache.features, g)?;
            for (acc, v) in grad_features.as_mut_slice().iter_mut().zip(gf.as_slice()) {
                *acc += v;
            }
            heads.push(hg);
        }
        let (backbone, _) = self.backbone.backward(&cache.backbone, &grad_features)?;
        Ok(HeadNetGrads { backbone, heads })
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.backbone.param_slices_mut();
        for h in &mut self.heads {
            out.extend(h.param_slices_mut());
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        let mut out = self.backbone.param_sizes();
        for h in &self.heads {
            out.push(h.weight.as_slice().len());
            out.push(h.bias.len());
        }
        out
    }

    /// Loss and full gradient on the rows `rows` of `x` (no parameter update).
    pub fn loss_and_grad(
        &self,
        x: &Matrix,
        rows: &[usize],
        objective: &impl Objective,
    ) -> Result<(f64, HeadNetGrads)> {
        let xb = x.select_rows(rows);
        let (outs, cache) = self.forward_cached(&xb)?;
        let (loss, g) = objective.loss_and_grad(rows, &outs);
        Ok((loss, self.backward(&cache, &g)?))
    }

    pub fn is_finite(&self) -> bool {
        self.backbone.is_finite()
            && self
                .heads
                .iter()
                .all(|h| h.weight.is_finite() && h.bias.iter().all(|b| b.is_finite()))
    }
}

/// Mini-batch Adam on all parameters of `net`. Batches follow a fresh
/// permutation drawn from `rng` every epoch. Returns the mean batch loss of
/// each epoch.
pub fn fit_head_net(
    net: &mut HeadNet,
    x: &Matrix,
    objective: &impl Objective,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::EmptyData("training set".into()));
    }
    if x.cols() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "training features",
            expected: net.input_dim(),
            actual: x.cols(),
        });
    }
    let batch = config.batch_size.max(1);
    let mut opt = OptimizerState::new(config.adam, &net.param_sizes());
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let order = rng.permutation(n);
        let mut total = 0.0;
        let mut batches = 0usize;
        for rows in order.chunks(batch) {
            let (loss, grads) = net.loss_and_grad(x, rows, objective)?;
            opt.step(&mut net.param_slices_mut(), &grads.slices())?;
            total += loss;
            batches += 1;
        }
        history.push(total / batches as f64);
    }
    Ok(history)
}
