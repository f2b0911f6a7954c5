//! Dense diagonalization of sector blocks and level statistics.

mod data;
pub mod eigh;
pub mod gemm;
pub mod levels;

pub use data::{diagonalize, diagonalize_full, diagonalize_with_limit, Eigenvectors, SpectralData, Spectrum, DENSE_LIMIT};
pub use levels::{
    chi2_distance, classify_spacing, poisson, surmise, unfold, Classification, Histogram, SpacingClass,
    SpacingDistribution, UnfoldOptions, Unfolded,
};
