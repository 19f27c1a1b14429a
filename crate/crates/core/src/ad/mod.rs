//! Reverse-mode autodiff, conditioner networks and the optimizer.

pub mod adam;
pub mod matrix;
pub mod mlp;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use matrix::{Matrix, Series};
pub use mlp::{Init, Mlp, MlpVars};
pub use tape::{Gradients, Tape, Var};
