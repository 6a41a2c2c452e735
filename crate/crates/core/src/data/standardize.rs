use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Per-column affine standardization fitted on training rows. Columns with
/// zero spread pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::EmptyData("standardizer fit".into()));
        }
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        let mut std = vec![0.0; x.cols()];
        for j in 0..x.cols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            if var > 0.0 {
                mean[j] = m;
                std[j] = var.sqrt();
            } else {
                std[j] = 1.0;
            }
        }
        Ok(Standardizer { mean, std })
    }

    /// Identity map on `dim` columns.
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "standardizer columns",
                expected: self.dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row.len())?;
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.cols())?;
        let mut out = x.clone();
        for i in 0..x.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &Matrix) -> Result<Matrix> {
        self.check(z.cols())?;
        let mut out = z.clone();
        for i in 0..z.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        Ok(out)
    }
}
