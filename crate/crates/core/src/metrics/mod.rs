//! Marginal and conditional coverage diagnostics.

mod kmeans;
mod wsc;

pub use kmeans::{kmeans, KMeansResult};
pub use wsc::{wsc, SlabParams, SlabSearch, WorstSlice, WscConfig};

use serde::{Deserialize, Serialize};

use crate::conformal::PredictionBox;
use crate::data::{Standardizer, SyntheticOracle};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, RngStream};

/// Lloyd iteration cap used by [`msce_clustered`].
pub const KMEANS_MAX_ITER: usize = 100;

/// Evaluation summary of one fitted method on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub marginal_coverage: f64,
    pub msce_k10: f64,
    pub msce_k50: f64,
    /// Only for synthetic data with a known conditional law.
    pub oracle_msce: Option<f64>,
    pub wsc: f64,
    pub log_volume_per_dim: f64,
}

pub fn marginal_coverage(covered: &[bool]) -> Result<f64> {
    if covered.is_empty() {
        return Err(Error::EmptyData("coverage indicators".into()));
    }
    Ok(covered.iter().filter(|c| **c).count() as f64 / covered.len() as f64)
}

/// `Σ_g (n_g/n)(coverage_g − τ)²` for a fixed assignment into `k` groups.
pub fn msce_from_assignments(
    assignments: &[usize],
    covered: &[bool],
    tau: f64,
    k: usize,
) -> Result<f64> {
    if assignments.len() != covered.len() {
        return Err(Error::DimensionMismatch {
            context: "cluster assignments",
            expected: covered.len(),
            actual: assignments.len(),
        });
    }
    if covered.is_empty() {
        return Err(Error::EmptyData("coverage indicators".into()));
    }
    let mut counts = vec![0usize; k];
    let mut hits = vec![0usize; k];
    for (&a, &c) in assignments.iter().zip(covered) {
        if a >= k {
            return Err(Error::invalid(format!(
                "cluster id {a} out of range for {k} clusters"
            )));
        }
        counts[a] += 1;
        hits[a] += c as usize;
    }
    let n = covered.len() as f64;
    Ok(counts
        .iter()
        .zip(&hits)
        .filter(|(c, _)| **c > 0)
        .map(|(&c, &h)| {
            let dev = h as f64 / c as f64 - tau;
            c as f64 / n * dev * dev
        })
        .sum())
}

/// Clusters standardized features with k-means and scores the size-weighted
/// squared deviation of per-cluster coverage from `τ`.
pub fn msce_clustered(
    features: &Matrix,
    covered: &[bool],
    tau: f64,
    k: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let assignments = cluster_features(features, k, rng)?;
    msce_from_assignments(&assignments, covered, tau, k)
}

/// k-means assignments of standardized features.
pub fn cluster_features(features: &Matrix, k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if k > features.rows() {
        return Err(Error::invalid(format!(
            "{k} clusters requested for {} rows",
            features.rows()
        )));
    }
    let z = Standardizer::fit(features)?.transform(features)?;
    Ok(kmeans(&z, k, rng, KMEANS_MAX_ITER)?.assignments)
}

/// Mean over rows of `(π(x) − τ)²` with `π(x)` the exact conditional
/// probability that the box contains the label. `features` are raw
/// (unstandardized) covariates.
pub fn oracle_msce(
    oracle: Option<&SyntheticOracle>,
    features: &Matrix,
    boxes: &[PredictionBox],
    tau: f64,
) -> Result<f64> {
    let oracle = oracle.ok_or(Error::NoOracle)?;
    if boxes.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            context: "boxes per test row",
            expected: features.rows(),
            actual: boxes.len(),
        });
    }
    if boxes.is_empty() {
        return Err(Error::EmptyData("test rows".into()));
    }
    let total: f64 = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let pi = if b.empty {
                0.0
            } else {
                oracle.box_coverage(features.row(i), &b.lower, &b.upper)
            };
            (pi - tau) * (pi - tau)
        })
        .sum();
    Ok(total / boxes.len() as f64)
}

/// `(1/d) Σ_j ln(upper_j − lower_j)`; `−∞` for an empty box.
pub fn log_volume_per_dim(b: &PredictionBox) -> f64 {
    if b.empty || b.dim() == 0 {
        return f64::NEG_INFINITY;
    }
    b.lower
        .iter()
        .zip(&b.upper)
        .map(|(l, u)| (u - l).ln())
        .sum::<f64>()
        / b.dim() as f64
}

/// Mean log volume over boxes with a finite value, and how many were excluded.
pub fn mean_log_volume(boxes: &[PredictionBox]) -> (f64, usize) {
    let vals: Vec<f64> = boxes
        .iter()
        .map(log_volume_per_dim)
        .filter(|v| v.is_finite())
        .collect();
    let excluded = boxes.len() - vals.len();
    if vals.is_empty() {
        return (f64::NAN, excluded);
    }
    (vals.iter().sum::<f64>() / vals.len() as f64, excluded)
}
