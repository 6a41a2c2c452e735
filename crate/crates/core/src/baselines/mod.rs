//! Comparison methods: interval regression, likelihood-based quantiles, and
//! learned partitions.

mod ald;
mod cqr;
mod methods;
mod plcp;

pub use ald::{ald_fit, AldModel};
pub use cqr::{cqr_fit, cqr_score, CqrModel};
pub use methods::{Method, DEFAULT_METHODS};
pub use plcp::{plcp_fit, PlcpFit, PlcpModel};
