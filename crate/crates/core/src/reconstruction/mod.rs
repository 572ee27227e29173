//! Efficiency fit, Wigner-function reconstruction and diagonal sampling from
//! calibrated quadrature data.

pub mod abel;
pub mod diagonals;
pub mod efficiency;
pub mod histogram;
pub mod pattern;
pub mod smoothing;

pub use abel::{abel_inverse, project_radial, radial_grid, AbelConfig, RadialWignerProfile};
pub use diagonals::{sample_diagonals, DiagonalEstimate};
pub use efficiency::{fit_efficiency, Boundary, EfficiencyFit, EfficiencyFitConfig, EfficiencyMethod, StderrMethod};
pub use histogram::{bin_samples, BinEdges, MarginalHistogram};
pub use pattern::{pattern_function, PatternFunction, MAX_FOCK_INDEX};
pub use smoothing::{silverman_bandwidth, smooth_marginal, GridDensity, SmoothedMarginal, SmoothingConfig};
