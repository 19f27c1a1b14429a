//! Linear post-processing and baselines: whitening, FastICA, linear SFA
//! and the lagged-covariance independence diagnostic.

pub mod diagnostics;
pub mod fastica;
pub mod linalg;
pub mod sfa;
pub mod whiten;

pub use diagnostics::{lagged_cov_diagnostic, LaggedCovariance};
pub use fastica::{fastica, DemixingMatrix, FastIcaConfig, IcaResult, IcaWarning};
pub use sfa::{linear_sfa, mean_squared_increments, LinearSfa};
pub use whiten::{whiten_fit, Whitener};
