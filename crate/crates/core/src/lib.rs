pub mod baselines;
pub mod conformal;
pub mod data;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod numeric;

pub use error::{Error, Result};
