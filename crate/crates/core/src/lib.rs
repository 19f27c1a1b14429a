//! Time-series blind source separation with slow normalizing flows.
//!
//! A RealNVP flow is trained by exact maximum likelihood with the prior
//! placed on the temporal increments of the latent series (the "slow"
//! prior). The encoded series equals the sources up to a linear map, which
//! FastICA then removes.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which every experiment uses.

pub mod ad;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod flows;
pub mod ica;
pub mod io;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = ad::Matrix<f64>;
pub type Series = ad::Series<f64>;
pub type Tape = ad::Tape<f64>;
pub type Mlp = ad::Mlp<f64>;
pub type AdamState = ad::AdamState<f64>;
pub type AffineCoupling = flows::AffineCoupling<f64>;
pub type FlowStack = flows::FlowStack<f64>;
pub type Whitener = ica::Whitener<f64>;
pub type DemixingMatrix = ica::DemixingMatrix<f64>;
pub type MixingModel = datagen::MixingModel<f64>;
pub type Dataset = datagen::Dataset<f64>;
