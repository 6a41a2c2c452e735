//! Worst-slice coverage over random-direction slabs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::numeric::{dot, Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WscConfig {
    /// Minimum share of search rows a slab must contain.
    pub mass_fraction: f64,
    pub directions: usize,
    /// Empirical-quantile knots per direction; the outermost are unbounded.
    pub knots: usize,
    /// Share of rows used to find the worst slab.
    pub search_fraction: f64,
}

impl Default for WscConfig {
    fn default() -> Self {
        WscConfig {
            mass_fraction: 0.1,
            directions: 1000,
            knots: 41,
            search_fraction: 0.25,
        }
    }
}

/// `{x : lower ≤ ⟨direction, x⟩ ≤ upper}` in standardized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabParams {
    pub direction: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl SlabParams {
    pub fn contains(&self, x: &[f64]) -> bool {
        let p = dot(&self.direction, x);
        self.lower <= p && p <= self.upper
    }
}

struct DirectionIndex {
    direction: Vec<f64>,
    /// Search rows sorted by projection.
    order: Vec<usize>,
    sorted_proj: Vec<f64>,
    knots: Vec<f64>,
    eval_proj: Vec<f64>,
}

/// Precomputed directions and projections, reusable across coverage vectors
/// for the same features.
pub struct SlabSearch {
    config: WscConfig,
    search_rows: Vec<usize>,
    eval_rows: Vec<usize>,
    directions: Vec<DirectionIndex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstSlice {
    /// Coverage of the worst slab on the evaluation rows.
    pub coverage: f64,
    /// `None` when no slab met the mass bound or the slab is empty on the
    /// evaluation rows; `coverage` is then the evaluation marginal.
    pub slab: Option<SlabParams>,
}

impl SlabSearch {
    pub fn new(features: &Matrix, config: WscConfig, rng: &RngStream) -> Result<Self> {
        let n = features.rows();
        if n < 2 {
            return Err(Error::EmptyData(
                "worst-slice coverage needs at least two rows".into(),
            ));
        }
        if config.directions == 0 || config.knots < 2 {
            return Err(Error::invalid("need at least one direction and two knots"));
        }
        if !(config.mass_fraction > 0.0 && config.mass_fraction <= 1.0) {
            return Err(Error::invalid("mass fraction must lie in (0, 1]"));
        }
        if !(config.search_fraction > 0.0 && config.search_fraction < 1.0) {
            return Err(Error::invalid("search fraction must lie in (0, 1)"));
        }
        let z = Standardizer::fit(features)?.transform(features)?;
        let perm = rng.derive("wsc-split").permutation(n);
        let n_search = ((n as f64 * config.search_fraction) as usize).clamp(1, n - 1);
        let (search_rows, eval_rows) = (perm[..n_search].to_vec(), perm[n_search..].to_vec());
        let p = features.cols();
        let directions = (0..config.directions)
            .into_par_iter()
            .map(|k| {
                let mut r = rng.derive_id(k as u64);
                let mut v: Vec<f64> = (0..p).map(|_| r.standard_normal()).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.iter_mut().for_each(|a| *a /= norm);
                let proj: Vec<f64> = search_rows.iter().map(|&i| dot(&v, z.row(i))).collect();
                let mut order: Vec<usize> = (0..proj.len()).collect();
                order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
                let sorted_proj: Vec<f64> = order.iter().map(|&i| proj[i]).collect();
                let m = sorted_proj.len();
                let knots = (0..config.knots)
                    .map(|l| {
                        if l == 0 {
                            f64::NEG_INFINITY
                        } else if l == config.knots - 1 {
                            f64::INFINITY
                        } else {
                            let level = l as f64 / (config.knots - 1) as f64;
                            sorted_proj[((level * m as f64) as usize).min(m - 1)]
                        }
                    })
                    .collect();
                let eval_proj = eval_rows.iter().map(|&i| dot(&v, z.row(i))).collect();
                DirectionIndex {
                    direction: v,
                    order,
                    sorted_proj,
                    knots,
                    eval_proj,
                }
            })
            .collect();
        Ok(SlabSearch {
            config,
            search_rows,
            eval_rows,
            directions,
        })
    }

    pub fn evaluate(&self, covered: &[bool]) -> Result<WorstSlice> {
        let n = self.search_rows.len() + self.eval_rows.len();
        if covered.len() != n {
            return Err(Error::DimensionMismatch {
                context: "coverage indicators",
                expected: n,
                actual: covered.len(),
            });
        }
        let eval_marginal = self.eval_rows.iter().filter(|&&i| covered[i]).count() as f64
            / self.eval_rows.len() as f64;
        let m = self.search_rows.len();
        let min_count = (self.config.mass_fraction * m as f64).ceil() as usize;
        // (coverage, direction, lower knot, upper knot)
        let best = self
            .directions
            .par_iter()
            .enumerate()
            .filter_map(|(k, dir)| {
                let mut prefix = vec![0usize; m + 1];
                for (pos, &r) in dir.order.iter().enumerate() {
                    prefix[pos + 1] = prefix[pos] + covered[self.search_rows[r]] as usize;
                }
                let mut local: Option<(f64, usize, usize, usize)> = None;
                for a in 0..dir.knots.len() {
                    let lo = dir.sorted_proj.partition_point(|p| *p < dir.knots[a]);
                    for b in a + 1..dir.knots.len() {
                        let hi = dir.sorted_proj.partition_point(|p| *p <= dir.knots[b]);
                        let count = hi.saturating_sub(lo);
                        if count == 0 || count < min_count {
                            continue;
                        }
                        let cov = (prefix[hi] - prefix[lo]) as f64 / count as f64;
                        if local.is_none_or(|l| cov < l.0) {
                            local = Some((cov, k, a, b));
                        }
                    }
                }
                local
            })
            .min_by(|x, y| {
                x.0.total_cmp(&y.0)
                    .then((x.1, x.2, x.3).cmp(&(y.1, y.2, y.3)))
            });
        let Some((_, k, a, b)) = best else {
            return Ok(WorstSlice {
                coverage: eval_marginal,
                slab: None,
            });
        };
        let dir = &self.directions[k];
        let (lower, upper) = (dir.knots[a], dir.knots[b]);
        let mut inside = 0usize;
        let mut hits = 0usize;
        for (pos, &r) in self.eval_rows.iter().enumerate() {
            let p = dir.eval_proj[pos];
            if lower <= p && p <= upper {
                inside += 1;
                hits += covered[r] as usize;
            }
        }
        if inside == 0 {
            return Ok(WorstSlice {
                coverage: eval_marginal,
                slab: None,
            });
        }
        Ok(WorstSlice {
            coverage: hits as f64 / inside as f64,
            slab: Some(SlabParams {
                direction: dir.direction.clone(),
                lower,
                upper,
            }),
        })
    }
}

/// One-shot worst-slice coverage.
pub fn wsc(features: &Matrix, covered: &[bool], config: WscConfig, rng: &RngStream) -> Result<f64> {
    Ok(SlabSearch::new(features, config, rng)?
        .evaluate(covered)?
        .coverage)
}
