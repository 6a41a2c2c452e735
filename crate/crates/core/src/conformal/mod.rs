//! Scores, exact conformal ranks, and the split / rectified / density-weighted
//! calibration procedures.

mod pipeline;
mod predictor;
mod weights;

pub use pipeline::{
    calibration_split, cpcp_fit, finetune_stage, pretrain_stage, CalibrationSplit, CpcpConfig,
    FinetuneWeighting, PretrainedStage, RectifiedFit,
};
pub use predictor::{
    predict_box, ConformalPredictor, FittedPredictor, PredictionBox, QuantileModel,
};
pub use weights::{
    clip_normalize_weights, estimate_weights, normalize_weights, unit_mean_weights,
    weights_from_gaps, WEIGHT_DENOMINATOR_FLOOR,
};

use crate::error::{Error, Result};
use crate::losses::QuantileLevel;

/// `max_j |y_j − center_j|`.
pub fn linf_score(center: &[f64], y: &[f64]) -> Result<f64> {
    if center.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "score label dimension",
            expected: center.len(),
            actual: y.len(),
        });
    }
    Ok(center
        .iter()
        .zip(y)
        .map(|(c, v)| (v - c).abs())
        .fold(0.0, f64::max))
}

/// Rank of the conformal order statistic among `n` calibration scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConformalRank {
    /// 1-based rank `k = ⌈(n + 1)τ⌉ ≤ n`.
    Finite(usize),
    /// `⌈(n + 1)τ⌉ > n`: the threshold is `+∞` and every label is covered.
    Infinite,
}

pub fn conformal_rank(n: usize, tau: QuantileLevel) -> ConformalRank {
    let raw = (n as f64 + 1.0) * tau.value();
    // guard against products like 10·0.9 = 9.000000000000002
    let rounded = raw.round();
    let k = if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) {
        rounded
    } else {
        raw.ceil()
    } as usize;
    if k == 0 {
        ConformalRank::Finite(1)
    } else if k > n {
        ConformalRank::Infinite
    } else {
        ConformalRank::Finite(k)
    }
}

/// The `k`-th smallest value (1-based), identical to indexing a sorted copy.
pub fn kth_smallest(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > values.len() {
        return Err(Error::invalid(format!(
            "rank {k} out of range for {} values",
            values.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN among order-statistic inputs"));
    }
    let mut buf = values.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*v)
}

/// Order statistic at the conformal rank, or `+∞` under the rank sentinel.
pub fn conformal_quantile(values: &[f64], tau: QuantileLevel) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyData("calibration scores".into()));
    }
    match conformal_rank(values.len(), tau) {
        ConformalRank::Finite(k) => kth_smallest(values, k),
        ConformalRank::Infinite => Ok(f64::INFINITY),
    }
}

/// Split conformal threshold on raw scores: the rule is `S(x, y) ≤ q̂`.
pub fn split_cp_fit(scores: &[f64], tau: QuantileLevel) -> Result<f64> {
    conformal_quantile(scores, tau)
}

/// Conformal shift of the rectified residuals `Sⱼ − q̂(xⱼ)`: the rule is
/// `S(x, y) ≤ q̂(x) + γ̂`.
pub fn rcp_fit(scores: &[f64], quantiles: &[f64], tau: QuantileLevel) -> Result<f64> {
    if scores.len() != quantiles.len() {
        return Err(Error::DimensionMismatch {
            context: "rectified residuals",
            expected: scores.len(),
            actual: quantiles.len(),
        });
    }
    let residuals: Vec<f64> = scores.iter().zip(quantiles).map(|(s, q)| s - q).collect();
    conformal_quantile(&residuals, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;
    use proptest::prelude::*;

    fn tau(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    #[test]
    fn linf_examples() {
        assert_eq!(linf_score(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(linf_score(&[0.0, 0.0], &[1.0, -3.0]).unwrap(), 3.0);
        assert_eq!(linf_score(&[2.0], &[0.5]).unwrap(), 1.5);
        assert!(linf_score(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(conformal_rank(9, tau(0.9)), ConformalRank::Finite(9));
        assert_eq!(conformal_rank(99, tau(0.9)), ConformalRank::Finite(90));
        assert_eq!(conformal_rank(5, tau(0.9)), ConformalRank::Infinite);
    }

    #[test]
    fn kth_examples() {
        assert_eq!(kth_smallest(&[3.0, 1.0, 2.0], 2).unwrap(), 2.0);
        assert_eq!(kth_smallest(&[3.0, 7.0, 2.0], 3).unwrap(), 7.0);
        assert!(kth_smallest(&[1.0], 0).is_err());
        assert!(kth_smallest(&[1.0], 2).is_err());
    }

    #[test]
    fn split_examples() {
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(split_cp_fit(&ten, tau(0.9)).unwrap(), 10.0);
        let ninety_nine: Vec<f64> = (1..=99).map(f64::from).collect();
        assert_eq!(split_cp_fit(&ninety_nine, tau(0.9)).unwrap(), 90.0);
        assert_eq!(split_cp_fit(&[2.5; 7], tau(0.5)).unwrap(), 2.5);
        assert_eq!(split_cp_fit(&[1.0; 5], tau(0.9)).unwrap(), f64::INFINITY);
        assert!(split_cp_fit(&[], tau(0.9)).is_err());
    }

    #[test]
    fn rcp_with_zero_quantile_is_split() {
        let mut rng = RngStream::new(41, 0);
        let s: Vec<f64> = (0..57).map(|_| rng.standard_normal().abs()).collect();
        assert_eq!(
            rcp_fit(&s, &vec![0.0; 57], tau(0.9)).unwrap(),
            split_cp_fit(&s, tau(0.9)).unwrap()
        );
    }

    #[test]
    fn oracle_quantile_gives_near_zero_shift() {
        // S = σ(x)|ξ| with the exact conditional 0.9-quantile
        let mut rng = RngStream::new(42, 0);
        let m = 2000;
        let z = crate::numeric::normal_quantile(0.95);
        let mut s = Vec::new();
        let mut q = Vec::new();
        for _ in 0..m {
            let sigma = 0.5 + 2.0 * rng.uniform();
            s.push(sigma * rng.standard_normal().abs());
            q.push(sigma * z);
        }
        let gamma = rcp_fit(&s, &q, tau(0.9)).unwrap();
        // residual density at 0 is E[2φ(z)/σ] = φ(z)·ln 5 for σ ~ U[0.5, 2.5]
        let f0 = crate::numeric::normal_pdf(z) * 5f64.ln();
        let sd = (0.09 / m as f64).sqrt() / f0;
        assert!(gamma.abs() < 3.0 * sd, "γ̂ {gamma}, sd {sd}");
    }

    proptest! {
        #[test]
        fn kth_matches_full_sort(values in prop::collection::vec(-1e6f64..1e6, 1..200), pick in any::<prop::sample::Index>()) {
            let k = pick.index(values.len()) + 1;
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assert_eq!(kth_smallest(&values, k).unwrap(), sorted[k - 1]);
        }

        #[test]
        fn rank_is_exact_ceiling(n in 1usize..5000, t in 0.01f64..0.99) {
            let exact = ((n as f64 + 1.0) * t).ceil() as usize;
            match conformal_rank(n, tau(t)) {
                ConformalRank::Finite(k) => prop_assert!(k == exact || (k + 1 == exact && ((n as f64 + 1.0) * t).fract() < 1e-8)),
                ConformalRank::Infinite => prop_assert!(exact > n),
            }
        }

        #[test]
        fn rcp_shift_equivariance(values in prop::collection::vec(0.0f64..10.0, 20..100), c in -5.0f64..5.0) {
            let q: Vec<f64> = values.iter().map(|v| v * 0.3).collect();
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            let a = rcp_fit(&values, &q, tau(0.8)).unwrap();
            let b = rcp_fit(&shifted, &q, tau(0.8)).unwrap();
            prop_assert!((b - (a + c)).abs() < 1e-9);
        }

        #[test]
        fn split_threshold_monotone_in_level(values in prop::collection::vec(0.0f64..10.0, 1..100), t1 in 0.05f64..0.95, dt in 0.0f64..0.04) {
            let a = split_cp_fit(&values, tau(t1)).unwrap();
            let b = split_cp_fit(&values, tau(t1 + dt)).unwrap();
            prop_assert!(a <= b);
        }

        #[test]
        fn shuffling_leaves_shift_unchanged(values in prop::collection::vec(0.0f64..10.0, 5..100), seed in any::<u64>()) {
            let q: Vec<f64> = values.iter().map(|v| v.sqrt()).collect();
            let perm = RngStream::new(seed, 0).permutation(values.len());
            let vp: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
            let qp: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
            prop_assert_eq!(rcp_fit(&values, &q, tau(0.9)).unwrap(), rcp_fit(&vp, &qp, tau(0.9)).unwrap());
        }
    }
}
