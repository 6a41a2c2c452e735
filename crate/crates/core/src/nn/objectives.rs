//! Batch objectives for [`HeadNet`](super::HeadNet) training.
//!
//! Every objective reports the mean loss over the batch rows and the gradient
//! of that mean with respect to the raw head outputs.

use crate::losses::{
    ald_negloglik_grad, mixed_coefficient, pinball, pinball_subgrad_q, QuantileLevel,
};
use crate::nn::head_net::Objective;
use crate::nn::mlp::{sigmoid, softplus};
use crate::numeric::Matrix;

/// Lower bound added to the softplus scale of asymmetric-Laplace heads.
pub const ALD_SCALE_FLOOR: f64 = 1e-4;

/// Mean squared error over samples and output dimensions; one head.
pub struct MseObjective<'a> {
    pub targets: &'a Matrix,
}

impl Objective for MseObjective<'_> {
    fn loss_and_grad(&self, rows: &[usize], outputs: &[Matrix]) -> (f64, Vec<Matrix>) {
        let out = &outputs[0];
        let d = out.cols();
        let denom = (rows.len() * d) as f64;
        let mut grad = Matrix::zeros(out.rows(), d);
        let mut loss = 0.0;
        for (b, &r) in rows.iter().enumerate() {
            for j in 0..d {
                let diff = out[(b, j)] - self.targets[(r, j)];
                loss += diff * diff;
                grad[(b, j)] = 2.0 * diff / denom;
            }
        }
        (loss / denom, vec![grad])
    }
}

/// Weighted, mixed pinball loss on a single scalar head:
/// `λ·mean(wᵢρᵢ) + (1 − λ)·mean(ρᵢ)`. Without weights it is plain pinball.
pub struct PinballObjective<'a> {
    pub targets: &'a [f64],
    pub tau: QuantileLevel,
    pub weights: Option<&'a [f64]>,
    pub lambda: f64,
}

impl PinballObjective<'_> {
    #[inline]
    fn coefficient(&self, row: usize) -> f64 {
        match self.weights {
            Some(w) => mixed_coefficient(w[row], self.lambda),
            None => 1.0,
        }
    }
}

impl Objective for PinballObjective<'_> {
    fn loss_and_grad(&self, rows: &[usize], outputs: &[Matrix]) -> (f64, Vec<Matrix>) {
        let out = &outputs[0];
        let n = rows.len() as f64;
        let mut grad = Matrix::zeros(out.rows(), 1);
        let mut loss = 0.0;
        for (b, &r) in rows.iter().enumerate() {
            let (q, s) = (out[(b, 0)], self.targets[r]);
            let c = self.coefficient(r);
            loss += c * pinball(self.tau, q, s);
            grad[(b, 0)] = c * pinball_subgrad_q(self.tau, q, s) / n;
        }
        (loss / n, vec![grad])
    }
}

/// Sum of three pinball losses at `τ − δ`, `τ`, `τ + δ` on the monotone
/// parameterisation `q_low = m − softplus(a)`, `q_high = m + softplus(b)`.
/// Heads are ordered `[main, low_gap, high_gap]`.
pub struct JointQuantileObjective<'a> {
    pub targets: &'a [f64],
    pub low: QuantileLevel,
    pub main: QuantileLevel,
    pub high: QuantileLevel,
}

impl Objective for JointQuantileObjective<'_> {
    fn loss_and_grad(&self, rows: &[usize], outputs: &[Matrix]) -> (f64, Vec<Matrix>) {
        let n = rows.len() as f64;
        let mut g_main = Matrix::zeros(rows.len(), 1);
        let mut g_low = Matrix::zeros(rows.len(), 1);
        let mut g_high = Matrix::zeros(rows.len(), 1);
        let mut loss = 0.0;
        for (b, &r) in rows.iter().enumerate() {
            let s = self.targets[r];
            let m = outputs[0][(b, 0)];
            let (a, c) = (outputs[1][(b, 0)], outputs[2][(b, 0)]);
            let q_low = m - softplus(a);
            let q_high = m + softplus(c);
            loss += pinball(self.low, q_low, s)
                + pinball(self.main, m, s)
                + pinball(self.high, q_high, s);
            let d_low = pinball_subgrad_q(self.low, q_low, s);
            let d_main = pinball_subgrad_q(self.main, m, s);
            let d_high = pinball_subgrad_q(self.high, q_high, s);
            g_main[(b, 0)] = (d_low + d_main + d_high) / n;
            g_low[(b, 0)] = -d_low * sigmoid(a) / n;
            g_high[(b, 0)] = d_high * sigmoid(c) / n;
        }
        (loss / n, vec![g_main, g_low, g_high])
    }
}

/// Asymmetric-Laplace likelihood with heads `[quantile, raw_scale]` and
/// `σ = softplus(raw) + ALD_SCALE_FLOOR`. With `freeze_scale` the scale is
/// pinned to 1 and the scale head receives no gradient.
pub struct AldObjective<'a> {
    pub targets: &'a [f64],
    pub tau: QuantileLevel,
    pub freeze_scale: bool,
}

/// Scale implied by a raw ALD head output.
#[inline]
pub fn ald_scale(raw: f64) -> f64 {
    softplus(raw) + ALD_SCALE_FLOOR
}

impl Objective for AldObjective<'_> {
    fn loss_and_grad(&self, rows: &[usize], outputs: &[Matrix]) -> (f64, Vec<Matrix>) {
        let n = rows.len() as f64;
        let mut g_q = Matrix::zeros(rows.len(), 1);
        let mut g_s = Matrix::zeros(rows.len(), 1);
        let mut loss = 0.0;
        for (b, &r) in rows.iter().enumerate() {
            let s = self.targets[r];
            let q = outputs[0][(b, 0)];
            let raw = outputs[1][(b, 0)];
            let sigma = if self.freeze_scale {
                1.0
            } else {
                ald_scale(raw)
            };
            loss += sigma.ln() + pinball(self.tau, q, s) / sigma;
            let (dq, dsigma) = ald_negloglik_grad(self.tau, q, sigma, s);
            g_q[(b, 0)] = dq / n;
            if !self.freeze_scale {
                g_s[(b, 0)] = dsigma * sigmoid(raw) / n;
            }
        }
        (loss / n, vec![g_q, g_s])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    fn level(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    /// Central differences of the loss w.r.t. every head output.
    fn check_gradient(objective: &impl Objective, rows: &[usize], outputs: &[Matrix]) {
        let (_, grads) = objective.loss_and_grad(rows, outputs);
        let h = 1e-6;
        for k in 0..outputs.len() {
            for idx in 0..outputs[k].as_slice().len() {
                let mut plus = outputs.to_vec();
                let mut minus = outputs.to_vec();
                plus[k].as_mut_slice()[idx] += h;
                minus[k].as_mut_slice()[idx] -= h;
                let fd = (objective.loss_and_grad(rows, &plus).0
                    - objective.loss_and_grad(rows, &minus).0)
                    / (2.0 * h);
                let a = grads[k].as_slice()[idx];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-7);
                assert!(rel < 1e-4, "head {k} entry {idx}: {a} vs {fd}");
            }
        }
    }

    fn column(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn mse_gradient() {
        let targets = Matrix::from_vec(3, 2, vec![0.1, 0.2, -1.0, 0.5, 2.0, 0.0]).unwrap();
        let obj = MseObjective { targets: &targets };
        let out = Matrix::from_vec(2, 2, vec![0.3, -0.1, 1.5, 0.2]).unwrap();
        check_gradient(&obj, &[2, 0], &[out]);
    }

    #[test]
    fn weighted_pinball_gradient() {
        let targets = [0.0, 1.0, -0.5, 2.0];
        let weights = [0.5, 2.0, 1.0, 0.1];
        let obj = PinballObjective {
            targets: &targets,
            tau: level(0.9),
            weights: Some(&weights),
            lambda: 0.3,
        };
        check_gradient(&obj, &[0, 1, 2, 3], &[column(&[0.4, 0.7, -0.9, 2.5])]);
    }

    #[test]
    fn joint_quantile_gradient_away_from_kinks() {
        let mut rng = RngStream::new(21, 0);
        let targets: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let obj = JointQuantileObjective {
            targets: &targets,
            low: level(0.88),
            main: level(0.9),
            high: level(0.92),
        };
        let rows: Vec<usize> = (0..6).collect();
        loop {
            let outs: Vec<Matrix> = (0..3)
                .map(|_| column(&(0..6).map(|_| rng.standard_normal()).collect::<Vec<_>>()))
                .collect();
            let near_kink = (0..6).any(|b| {
                let m = outs[0][(b, 0)];
                let s = targets[b];
                let lo = m - softplus(outs[1][(b, 0)]);
                let hi = m + softplus(outs[2][(b, 0)]);
                [lo, m, hi].iter().any(|q| (q - s).abs() < 1e-3)
            });
            if !near_kink {
                check_gradient(&obj, &rows, &outs);
                break;
            }
        }
    }

    #[test]
    fn ald_gradient_and_frozen_scale() {
        let targets = [0.3, -1.2, 2.2];
        let outs = [column(&[0.1, -0.4, 1.0]), column(&[0.5, -1.0, 2.0])];
        let obj = AldObjective {
            targets: &targets,
            tau: level(0.7),
            freeze_scale: false,
        };
        check_gradient(&obj, &[0, 1, 2], &outs);
        let frozen = AldObjective {
            freeze_scale: true,
            ..obj
        };
        let (loss, grads) = frozen.loss_and_grad(&[0, 1, 2], &outs);
        assert!(grads[1].as_slice().iter().all(|g| *g == 0.0));
        let plain: f64 = (0..3)
            .map(|b| pinball(level(0.7), outs[0][(b, 0)], targets[b]))
            .sum::<f64>()
            / 3.0;
        assert!((loss - plain).abs() < 1e-15);
    }

    #[test]
    fn ald_scale_has_floor() {
        assert!((ald_scale(-800.0) - ALD_SCALE_FLOOR).abs() < 1e-18);
        assert!((ald_scale(0.0) - (std::f64::consts::LN_2 + 1e-4)).abs() < 1e-15);
    }
}
