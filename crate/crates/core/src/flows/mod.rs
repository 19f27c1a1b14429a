//! Invertible layers, flow stacks and maximum-likelihood training.

pub mod checkpoint;
pub mod coupling;
pub mod likelihood;
pub mod slow;
pub mod stack;
pub mod train;

pub use coupling::{alternating_mask, AffineCoupling, CouplingVars, DEFAULT_SCALE_CLAMP};
pub use likelihood::{gaussian_logpdf, log_likelihood, nll_tape};
pub use slow::{slow_cumsum, slow_diff, SlowFlow};
pub use stack::{FlowLayer, FlowStack, StackVars};
pub use train::{nll_and_grad, train, TrainConfig, TrainReport};
