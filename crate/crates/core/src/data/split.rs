use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Disjoint train/calibration/test index lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub cal: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded permutation cut into `⌊0.6n⌋`, `⌊0.2n⌋` and the remainder.
pub fn split_622(n: usize, rng: &mut RngStream) -> Result<DataSplit> {
    if n < 10 {
        return Err(Error::invalid(format!(
            "need at least 10 rows to split, got {n}"
        )));
    }
    let perm = rng.permutation(n);
    let n_train = n * 6 / 10;
    let n_cal = n * 2 / 10;
    Ok(DataSplit {
        train: perm[..n_train].to_vec(),
        cal: perm[n_train..n_train + n_cal].to_vec(),
        test: perm[n_train + n_cal..].to_vec(),
    })
}
