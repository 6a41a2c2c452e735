//! Numeric foundation: dense matrices, seeded random streams and the
//! distribution functions used by oracles and data generation.

pub mod linalg;
pub mod rng;
pub mod special;

pub use linalg::{
    dot, matmul, matmul_transpose_a, matmul_transpose_b, mean, population_std, Matrix,
};
pub use rng::{seeded_stream, RngStream};
pub use special::{
    laplace_cdf, laplace_pdf, laplace_quantile, normal_cdf, normal_pdf, normal_quantile,
    BaseDistribution,
};
