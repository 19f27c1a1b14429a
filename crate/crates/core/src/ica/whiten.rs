//! Symmetric (ZCA) whitening.

use crate::ad::{Matrix, Series};
use crate::error::{Error, Result};
use crate::ica::linalg::{center, covariance, sym_eigen, sym_fn};
use crate::scalar::Real;

/// Relative eigenvalue below which the covariance counts as rank-deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Eigenvalue floor, relative to `trace / d`.
pub const JITTER: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Whitener<T> {
    pub mean: Vec<T>,
    /// Inverse principal square root of the covariance (symmetric).
    pub transform: Matrix<T>,
}

impl<T: Real> Whitener<T> {
    pub fn fit(x: &Series<T>) -> Result<Self> {
        whiten_fit(x)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &Series<T>) -> Result<Series<T>> {
        if x.cols() != self.dim() {
            return Err(Error::Shape {
                op: "whiten_apply",
                lhs: (x.rows(), self.dim()),
                rhs: x.shape(),
            });
        }
        let c = Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - self.mean[j]);
        c.matmul_nt(&self.transform)
    }
}

pub fn whiten_fit<T: Real>(x: &Series<T>) -> Result<Whitener<T>> {
    let (t, d) = x.shape();
    if t <= d {
        return Err(Error::contract(format!("whiten_fit needs T > d, got T={t}, d={d}")));
    }
    let cov = covariance(x);
    let e = sym_eigen(&cov)?;
    let scale = e.values.iter().copied().sum::<T>() / T::lit(d as f64);
    if !(scale > T::zero()) || e.values[0] <= T::lit(RANK_TOL) * scale {
        let null: Vec<String> = e.vectors.col(0).iter().map(|v| format!("{:.4}", v.as_f64())).collect();
        return Err(Error::Degenerate(format!(
            "rank-deficient covariance (eigenvalue {:.3e}); null direction [{}]",
            e.values[0].as_f64(),
            null.join(", ")
        )));
    }
    let floor = T::lit(JITTER) * scale;
    let transform = sym_fn(&e, |l| T::one() / l.max(floor).sqrt());
    Ok(Whitener {
        mean: center(x).1,
        transform,
    })
}
