//! Partition-learning conformal prediction: a soft partition of feature space
//! co-trained with per-group score quantiles, then recalibrated per group.

use serde::{Deserialize, Serialize};

use crate::conformal::{conformal_rank, kth_smallest, split_cp_fit, ConformalRank};
use crate::error::{Error, Result};
use crate::losses::{pinball, pinball_subgrad_q, QuantileLevel};
use crate::nn::{Activation, MlpParams, OptimizerState, TrainConfig};
use crate::numeric::{mean, population_std, Matrix, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcpModel {
    /// Logits over groups; probabilities are their softmax.
    partition: MlpParams,
    /// Recalibrated per-group score thresholds.
    pub thresholds: Vec<f64>,
    /// Threshold used by groups too small for a finite conformal rank.
    pub fallback: f64,
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

impl PlcpModel {
    pub fn groups(&self) -> usize {
        self.thresholds.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.partition.input_dim()
    }

    /// Group membership probabilities; every row sums to one.
    pub fn group_probabilities(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax_rows(&self.partition.forward_batch(x)?))
    }

    pub fn assign(&self, x: &Matrix) -> Result<Vec<usize>> {
        let logits = self.partition.forward_batch(x)?;
        Ok((0..x.rows()).map(|i| argmax(logits.row(i))).collect())
    }

    pub fn thresholds(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self
            .assign(x)?
            .into_iter()
            .map(|g| self.thresholds[g])
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlcpFit {
    pub model: PlcpModel,
    /// Size of the held-out recalibration half.
    pub calibration_size: usize,
    /// Full-data objective on the training half after each epoch, in
    /// standardized score units; entry 0 is before training.
    pub objective_history: Vec<f64>,
}

/// `mean_j Σ_i h_i(x_j) ρ_τ(q_i, s_j)` and its gradients w.r.t. logits and `q`.
fn partition_objective(
    tau: QuantileLevel,
    probs: &Matrix,
    q: &[f64],
    scores: &[f64],
) -> (f64, Matrix, Vec<f64>) {
    let n = scores.len() as f64;
    let g = q.len();
    let mut grad_logits = Matrix::zeros(probs.rows(), g);
    let mut grad_q = vec![0.0; g];
    let mut loss = 0.0;
    let mut rho = vec![0.0; g];
    for (b, &s) in scores.iter().enumerate() {
        let h = probs.row(b);
        let mut expected = 0.0;
        for i in 0..g {
            rho[i] = pinball(tau, q[i], s);
            expected += h[i] * rho[i];
            grad_q[i] += h[i] * pinball_subgrad_q(tau, q[i], s) / n;
        }
        loss += expected;
        for i in 0..g {
            grad_logits[(b, i)] = h[i] * (rho[i] - expected) / n;
        }
    }
    (loss / n, grad_logits, grad_q)
}

fn full_objective(
    tau: QuantileLevel,
    net: &MlpParams,
    q: &[f64],
    x: &Matrix,
    s: &[f64],
) -> Result<f64> {
    let probs = softmax_rows(&net.forward_batch(x)?);
    Ok(partition_objective(tau, &probs, q, s).0)
}

/// Co-trains the partition and group quantiles on one half of the
/// calibration data and recalibrates per argmax group on the other half.
/// `config.hidden` sets the partition network's hidden widths.
pub fn plcp_fit(
    x: &Matrix,
    scores: &[f64],
    tau: QuantileLevel,
    groups: usize,
    config: &TrainConfig,
    rng: &mut RngStream,
) -> Result<PlcpFit> {
    if groups == 0 {
        return Err(Error::invalid("partition needs at least one group"));
    }
    if x.rows() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "partition scores",
            expected: x.rows(),
            actual: scores.len(),
        });
    }
    if x.rows() < 2 {
        return Err(Error::EmptyData(
            "partition learning needs two or more calibration rows".into(),
        ));
    }
    if groups > x.rows() / 2 {
        return Err(Error::invalid(format!(
            "{groups} groups exceed the {} rows available to learn the partition",
            x.rows() / 2
        )));
    }
    let perm = rng.permutation(x.rows());
    let half = x.rows() / 2;
    let (fit_idx, cal_idx) = perm.split_at(half);
    let xf = x.select_rows(fit_idx);
    let center = mean(&fit_idx.iter().map(|&i| scores[i]).collect::<Vec<_>>());
    let raw_fit: Vec<f64> = fit_idx.iter().map(|&i| scores[i]).collect();
    let sd = population_std(&raw_fit);
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let sf: Vec<f64> = raw_fit.iter().map(|s| (s - center) / scale).collect();

    let mut dims = vec![x.cols()];
    dims.extend_from_slice(&config.hidden);
    dims.push(groups);
    let mut net = MlpParams::init(&dims, Activation::Identity, rng)?;
    let mut sorted = sf.clone();
    sorted.sort_by(f64::total_cmp);
    let mut q: Vec<f64> = (0..groups)
        .map(|i| {
            let level = (i as f64 + 0.5) / groups as f64;
            sorted[((level * sorted.len() as f64) as usize).min(sorted.len() - 1)]
        })
        .collect();

    let mut sizes = net.param_sizes();
    sizes.push(groups);
    let mut opt = OptimizerState::new(config.adam, &sizes);
    let mut history = vec![full_objective(tau, &net, &q, &xf, &sf)?];
    let batch = config.batch_size.max(1);
    for _ in 0..config.epochs {
        let order = rng.permutation(half);
        for rows in order.chunks(batch) {
            let xb = xf.select_rows(rows);
            let sb: Vec<f64> = rows.iter().map(|&r| sf[r]).collect();
            let (logits, cache) = net.forward_cached(&xb)?;
            let (_, g_logits, g_q) = partition_objective(tau, &softmax_rows(&logits), &q, &sb);
            let (grads, _) = net.backward(&cache, &g_logits)?;
            let mut g_slices = grads.slices();
            g_slices.push(&g_q);
            let mut params = net.param_slices_mut();
            params.push(&mut q);
            opt.step(&mut params, &g_slices)?;
        }
        history.push(full_objective(tau, &net, &q, &xf, &sf)?);
    }

    let held_scores: Vec<f64> = cal_idx.iter().map(|&i| scores[i]).collect();
    let fallback = split_cp_fit(&held_scores, tau)?;
    let mut model = PlcpModel {
        partition: net,
        thresholds: vec![fallback; groups],
        fallback,
    };
    let assigned = model.assign(&x.select_rows(cal_idx))?;
    let mut per_group: Vec<Vec<f64>> = vec![Vec::new(); groups];
    for (g, s) in assigned.into_iter().zip(&held_scores) {
        per_group[g].push(*s);
    }
    for (g, vals) in per_group.iter().enumerate() {
        if let ConformalRank::Finite(k) = conformal_rank(vals.len(), tau) {
            model.thresholds[g] = kth_smallest(vals, k)?;
        }
    }
    Ok(PlcpFit {
        model,
        calibration_size: cal_idx.len(),
        objective_history: history,
    })
}
