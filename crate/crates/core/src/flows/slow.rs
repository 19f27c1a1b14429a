//! The slow flow: temporal differencing and its inverse, the running sum.
//!
//! Both maps are triangular with unit diagonal, so `log|det J| = 0`. The
//! series is taken to start from a zero state, so differencing keeps row 0.

use crate::ad::tape::diff_segments;
use crate::ad::Series;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parameter-free, volume-preserving layer. The generative map is the
/// running sum, the inverse map is differencing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SlowFlow;

fn non_empty<T: Real>(z: &Series<T>, op: &str) -> Result<()> {
    if z.rows() == 0 {
        return Err(Error::contract(format!("{op}: empty series")));
    }
    Ok(())
}

/// `out[0] = z[0]`, `out[t] = z[t] - z[t-1]`.
pub fn slow_diff<T: Real>(z: &Series<T>) -> Result<Series<T>> {
    non_empty(z, "slow_diff")?;
    Ok(diff_segments(z, &[z.rows()]))
}

/// Running prefix sum along time; inverse of [`slow_diff`].
pub fn slow_cumsum<T: Real>(z_tilde: &Series<T>) -> Result<Series<T>> {
    non_empty(z_tilde, "slow_cumsum")?;
    let mut out = z_tilde.clone();
    for t in 1..out.rows() {
        for j in 0..out.cols() {
            let v = out.get(t - 1, j) + out.get(t, j);
            out.set(t, j, v);
        }
    }
    Ok(out)
}

impl SlowFlow {
    pub fn forward<T: Real>(&self, z_tilde: &Series<T>) -> Result<Series<T>> {
        slow_cumsum(z_tilde)
    }

    pub fn inverse<T: Real>(&self, z: &Series<T>) -> Result<Series<T>> {
        slow_diff(z)
    }

    pub fn log_det(&self) -> f64 {
        0.0
    }
}
