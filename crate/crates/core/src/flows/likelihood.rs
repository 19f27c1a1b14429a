//! Exact log-likelihood under the change-of-variables formula.
//!
//! With `z = f^{-1}(x)` the per-step log-density is
//! `log p(z_t) + log|det d f^{-1}/dx|_t`. Under the slow prior the
//! increments `z_t - z_{t-1}` (with `z_0 = 0`) are standard normal instead
//! of `z_t` itself; differencing has unit Jacobian and adds nothing.

use std::f64::consts::PI;

use crate::ad::{Matrix, Series, Tape, Var};
use crate::error::{Error, Result};
use crate::flows::slow::slow_diff;
use crate::flows::stack::{FlowStack, StackVars};
use crate::scalar::Real;

/// `-d/2 log(2 pi) - |z_t|^2 / 2` for every row.
pub fn gaussian_logpdf<T: Real>(z: &Series<T>) -> Vec<T> {
    let c = T::lit(-0.5 * z.cols() as f64 * (2.0 * PI).ln());
    let half = T::lit(0.5);
    (0..z.rows())
        .map(|i| c - half * z.row(i).iter().map(|&v| v * v).sum::<T>())
        .collect()
}

/// Mean over time steps of `log p(x_t)`, in nats per step.
pub fn log_likelihood<T: Real>(stack: &FlowStack<T>, x: &Series<T>, slow: bool) -> Result<T> {
    if x.rows() == 0 {
        return Err(Error::contract("log_likelihood: empty series"));
    }
    let (z, logdet) = stack.encode_with_logdet(x)?;
    let scored = if slow { slow_diff(&z)? } else { z };
    let prior = gaussian_logpdf(&scored);
    let total: T = prior.iter().zip(&logdet).map(|(&p, &l)| p + l).sum();
    let mean = total / T::lit(x.rows() as f64);
    if !mean.is_finite() {
        return Err(Error::NonFinite {
            layer: stack.len(),
            what: "log-likelihood".into(),
        });
    }
    Ok(mean)
}

/// Negative log-likelihood in nats per time step per dimension, recorded on
/// `tape` for a batch of windows stacked row-wise in `x`.
pub fn nll_tape<T: Real>(
    stack: &FlowStack<T>,
    tape: &mut Tape<T>,
    vars: &StackVars,
    x: Var,
    segments: &[usize],
    slow: bool,
) -> Result<Var> {
    let (rows, d) = tape.value(x).shape();
    let (mut z, logdet) = stack.encode_tape(tape, x, vars, segments)?;
    if slow {
        z = tape.slow_diff(z, segments)?;
    }
    let sq = tape.square(z);
    let energy = tape.sum(sq);
    let energy = tape.scale(energy, T::lit(0.5));
    let neg = match logdet {
        Some(ld) => {
            let ld_sum = tape.sum(ld);
            tape.sub(energy, ld_sum)?
        }
        None => energy,
    };
    let per_dim = tape.scale(neg, T::one() / T::lit((rows * d) as f64));
    let constant = tape.leaf(Matrix::scalar(T::lit(0.5 * (2.0 * PI).ln())));
    tape.add(per_dim, constant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn logpdf_reference_values() {
        let one = gaussian_logpdf(&Matrix::<f64>::zeros(1, 1))[0];
        assert!((one + 0.918_938_533_204_672_7).abs() < 1e-12);
        let two = gaussian_logpdf(&Matrix::<f64>::zeros(1, 2))[0];
        assert!((two + 1.837_877_066_409_345_5).abs() < 1e-12);
        let unit = gaussian_logpdf(&Matrix::<f64>::filled(1, 1, 1.0))[0];
        assert!((unit + 1.418_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn identity_stack_on_zeros() {
        let s = FlowStack::<f64>::identity(2);
        let ll = log_likelihood(&s, &Matrix::zeros(7, 2), false).unwrap();
        assert!((ll + 1.837_877_066_409_345_5).abs() < 1e-12);
    }

    #[test]
    fn slowness_rewards_constant_series() {
        let s = FlowStack::<f64>::identity(2);
        let x = Matrix::filled(200, 2, 2.5);
        let iid = log_likelihood(&s, &x, false).unwrap();
        let slow = log_likelihood(&s, &x, true).unwrap();
        assert!(slow > iid, "slow {slow} iid {iid}");
    }

    #[test]
    fn tape_nll_matches_plain_log_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stack = FlowStack::<f64>::realnvp(4, 3, &[7], Init::Normal(0.6), false, &mut rng).unwrap();
        let x = Matrix::from_fn(20, 4, |_, _| StandardNormal.sample(&mut rng));
        for slow in [false, true] {
            let ll = log_likelihood(&stack, &x, slow).unwrap();
            let mut tape = Tape::new();
            let vars = stack.register(&mut tape);
            let xv = tape.leaf(x.clone());
            let nll = nll_tape(&stack, &mut tape, &vars, xv, &[20], slow).unwrap();
            let v = tape.value(nll).item().unwrap();
            assert!((v + ll / 4.0).abs() < 1e-12, "slow={slow}: {v} vs {}", -ll / 4.0);
        }
    }
}
