//! Point regression by mean squared error.

use crate::error::{Error, Result};
use crate::nn::head_net::{fit_head_net, HeadNet};
use crate::nn::mlp::{Activation, MlpParams};
use crate::nn::objectives::MseObjective;
use crate::nn::TrainConfig;
use crate::numeric::{Matrix, RngStream};

/// Flattens a single-head network into one MLP with identity output, applying
/// `out_j ↦ center_j + scale_j · out_j` to the head.
pub fn head_net_to_mlp(net: &HeadNet, center: &[f64], scale: &[f64]) -> Result<MlpParams> {
    if net.heads.len() != 1 {
        return Err(Error::invalid("only single-head networks can be flattened"));
    }
    let mut head = net.heads[0].clone();
    let d = head.outputs();
    if center.len() != d || scale.len() != d {
        return Err(Error::DimensionMismatch {
            context: "output rescaling",
            expected: d,
            actual: center.len().min(scale.len()),
        });
    }
    for i in 0..head.inputs() {
        for j in 0..d {
            head.weight[(i, j)] *= scale[j];
        }
    }
    for j in 0..d {
        head.bias[j] = center[j] + scale[j] * head.bias[j];
    }
    let mut layers = net.backbone.layers.clone();
    layers.push(head);
    Ok(MlpParams {
        layers,
        output_activation: Activation::Identity,
    })
}

/// Column means and population standard deviations; a constant column gets scale 1.
pub(crate) fn column_moments(y: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = y.rows() as f64;
    let mut center = vec![0.0; y.cols()];
    let mut scale = vec![0.0; y.cols()];
    for j in 0..y.cols() {
        let col = y.column(j);
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        center[j] = m;
        scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    (center, scale)
}

/// Fits `x ↦ y` by MSE on standardized targets and returns a network that
/// predicts in the original units.
pub fn train_regressor_mse(
    x: &Matrix,
    y: &Matrix,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<MlpParams> {
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch {
            context: "regression targets",
            expected: x.rows(),
            actual: y.rows(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::EmptyData("regression training set".into()));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::invalid("non-finite regression data"));
    }
    let (center, scale) = column_moments(y);
    let mut standardized = y.clone();
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            standardized[(i, j)] = (y[(i, j)] - center[j]) / scale[j];
        }
    }
    let mut dims = vec![x.cols()];
    dims.extend_from_slice(&config.hidden);
    let mut net = HeadNet::init(&dims, &[y.cols()], rng)?;
    let objective = MseObjective {
        targets: &standardized,
    };
    fit_head_net(&mut net, x, &objective, config, rng)?;
    head_net_to_mlp(&net, &center, &scale)
}
