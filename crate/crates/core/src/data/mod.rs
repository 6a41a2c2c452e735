//! Datasets: synthetic generation, CSV ingestion, standardization, splitting.

mod csv_io;
mod split;
mod standardize;
pub mod synthetic;

pub use csv_io::{load_csv, write_csv};
pub use split::{split_622, DataSplit};
pub use standardize::Standardizer;
pub use synthetic::{
    generate_synthetic, LocationFn, ScaleFn, SyntheticOracle, SyntheticSpec, PRESET_NAMES,
};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Features `x` (n × p) and labels `y` (n × d), optionally with the exact
/// conditional law they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
    pub oracle: Option<SyntheticOracle>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows",
                expected: x.rows(),
                actual: y.rows(),
            });
        }
        for (m, _) in [(&x, "x"), (&y, "y")] {
            if let Some(pos) = m.as_slice().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row: pos / m.cols(),
                    col: pos % m.cols(),
                });
            }
        }
        Ok(Dataset { x, y, oracle: None })
    }

    pub fn with_oracle(mut self, oracle: SyntheticOracle) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn label_dim(&self) -> usize {
        self.y.cols()
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            oracle: self.oracle,
        }
    }
}
