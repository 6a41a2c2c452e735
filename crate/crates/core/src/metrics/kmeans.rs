//! Lloyd's algorithm with k-means++ seeding.

use crate::error::{Error, Result};
use crate::numeric::{Matrix, RngStream};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centers: Matrix,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub wcss_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = sq_dist(point, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(points: &Matrix, k: usize, rng: &mut RngStream) -> Matrix {
    let n = points.rows();
    let mut centers = Matrix::zeros(k, points.cols());
    centers.row_mut(0).copy_from_slice(points.row(rng.below(n)));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centers.row(c)));
        }
    }
    centers
}

/// Partitions rows of `points` into `k` clusters. An empty cluster is moved
/// onto the point currently farthest from its center.
pub fn kmeans(
    points: &Matrix,
    k: usize,
    rng: &mut RngStream,
    max_iter: usize,
) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    let p = points.cols();
    let mut centers = plus_plus_seeds(points, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centers);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
            dists[i] = d;
        }
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assignments[i]] > 1)
                    .max_by(|&i, &j| dists[i].total_cmp(&dists[j]).then(j.cmp(&i)))
                    .ok_or_else(|| {
                        Error::invalid("not enough distinct points to fill every cluster")
                    })?;
                counts[assignments[far]] -= 1;
                assignments[far] = c;
                counts[c] = 1;
                dists[far] = 0.0;
                changed = true;
            }
        }
        let mut sums = Matrix::zeros(k, p);
        for (i, &a) in assignments.iter().enumerate() {
            for (s, v) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            let cnt = counts[c] as f64;
            for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / cnt;
            }
        }
        let wcss = (0..n)
            .map(|i| sq_dist(points.row(i), centers.row(assignments[i])))
            .sum();
        history.push(wcss);
        if !changed {
            break;
        }
    }
    Ok(KMeansResult {
        assignments,
        centers,
        wcss_history: history,
    })
}
