//! Maximum-likelihood training of a [`FlowStack`] with Adam.

use std::time::Instant;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::{AdamConfig, AdamState, Matrix, Series, Tape};
use crate::error::{Error, Result};
use crate::flows::likelihood::nll_tape;
use crate::flows::stack::FlowStack;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Windows per gradient step; `None` trains full-batch.
    pub batch_windows: Option<usize>,
    pub adam: AdamConfig,
    /// Seeds mini-batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_windows: None,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean NLL per epoch, in nats per time step per dimension, measured at
    /// the parameters before each step.
    pub nll: Vec<f64>,
    pub steps: u64,
    pub wall_clock_secs: f64,
    pub seed: u64,
}

impl TrainReport {
    pub fn final_nll(&self) -> Option<f64> {
        self.nll.last().copied()
    }
}

/// One forward/backward pass: NLL and gradients for every parameter.
pub fn nll_and_grad<T: Real>(
    stack: &FlowStack<T>,
    windows: &[&Series<T>],
    slow: bool,
) -> Result<(T, Vec<Matrix<T>>)> {
    let owned: Vec<Series<T>> = windows.iter().map(|w| (*w).clone()).collect();
    let batch = Matrix::vstack(&owned)?;
    let segments: Vec<usize> = windows.iter().map(|w| w.rows()).collect();
    let mut tape = Tape::new();
    let vars = stack.register(&mut tape);
    let x = tape.leaf(batch);
    let loss = nll_tape(stack, &mut tape, &vars, x, &segments, slow)?;
    let value = tape.value(loss).item().expect("scalar loss");
    let mut grads = tape.backward(loss)?;
    let g = vars.flat::<T>().into_iter().map(|v| grads.take(v)).collect();
    Ok((value, g))
}

/// Maximizes the mean log-likelihood of `data` under `stack`.
///
/// Deterministic for a given seed. On divergence the stack is restored to
/// the last parameters that produced a finite loss and gradient.
pub fn train<T: Real>(
    stack: &mut FlowStack<T>,
    data: &[Series<T>],
    cfg: &TrainConfig,
    slow: bool,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::contract("train: no data"));
    }
    if let Some(bad) = data.iter().find(|s| s.cols() != stack.dim() || s.rows() == 0) {
        return Err(Error::Shape {
            op: "train",
            lhs: (bad.rows(), stack.dim()),
            rhs: bad.shape(),
        });
    }
    let batch = cfg.batch_windows.unwrap_or(data.len()).clamp(1, data.len());
    let layer_of = stack.param_layers();
    let mut opt = AdamState::new(cfg.adam, stack.params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let started = Instant::now();
    let mut nll = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if batch < data.len() {
            order.shuffle(&mut rng);
        }
        let mut weighted = 0.0;
        let mut rows = 0usize;
        for chunk in order.chunks(batch) {
            let windows: Vec<&Series<T>> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grads) = match nll_and_grad(stack, &windows, slow) {
                Ok(r) => r,
                Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let n: usize = windows.iter().map(|w| w.rows()).sum();
            weighted += loss.as_f64() * n as f64;
            rows += n;

            let snapshot: Vec<Matrix<T>> = stack.params().into_iter().cloned().collect();
            let mut params = stack.params_mut();
            match opt.update(&mut params, &grads) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient { param, step, .. }) => {
                    return Err(Error::NonFiniteGradient {
                        param,
                        layer: layer_of[param],
                        step,
                    })
                }
                Err(e) => return Err(e),
            }
            if params.iter().any(|p| !p.is_finite()) {
                for (p, s) in params.iter_mut().zip(snapshot) {
                    **p = s;
                }
                return Err(Error::Diverged { epoch });
            }
        }
        let epoch_nll = weighted / rows as f64;
        if epoch % 50 == 0 {
            debug!("epoch {epoch}: nll {epoch_nll:.5}");
        }
        nll.push(epoch_nll);
    }

    Ok(TrainReport {
        nll,
        steps: opt.step(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}
