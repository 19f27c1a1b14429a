//! Instantaneous and lag-1 covariance of standardized channels.
//!
//! For independent sources both matrices are diagonal, so the largest
//! off-diagonal entry measures residual dependence.

use crate::ad::{Matrix, Series};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct LaggedCovariance<T> {
    pub instantaneous: Matrix<T>,
    pub lag1: Matrix<T>,
    pub max_offdiag: T,
}

/// Channels are standardized first, so entries are correlations.
pub fn lagged_cov_diagnostic<T: Real>(z: &Series<T>) -> Result<LaggedCovariance<T>> {
    let (n, d) = z.shape();
    if n < 3 {
        return Err(Error::contract(format!("lagged_cov_diagnostic needs T >= 3, got {n}")));
    }
    let mean = z.col_means();
    let nf = T::lit(n as f64);
    let std: Vec<T> = (0..d)
        .map(|j| ((0..n).map(|i| (z.get(i, j) - mean[j]).powi(2)).sum::<T>() / nf).sqrt())
        .collect();
    if let Some(j) = std.iter().position(|&s| !(s > T::zero())) {
        return Err(Error::Degenerate(format!("channel {j} is constant")));
    }
    let s = Matrix::from_fn(n, d, |i, j| (z.get(i, j) - mean[j]) / std[j]);
    let instantaneous = s.matmul_tn(&s)?.scale(T::one() / nf);
    let head = s.slice_rows(0, n - 1);
    let tail = s.slice_rows(1, n);
    let lag1 = head.matmul_tn(&tail)?.scale(T::one() / T::lit((n - 1) as f64));
    let mut max_offdiag = T::zero();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                max_offdiag = max_offdiag.max(instantaneous.get(i, j).abs()).max(lag1.get(i, j).abs());
            }
        }
    }
    Ok(LaggedCovariance {
        instantaneous,
        lag1,
        max_offdiag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn independent_white_sources_have_small_offdiag() {
        // Monte Carlo: across seeds at T = 10^4 the statistic stays well
        // under 0.1 (its scale is ~ 1/sqrt(T) = 0.01).
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = Matrix::from_fn(10_000, 3, |_, _| StandardNormal.sample(&mut rng));
            let r = lagged_cov_diagnostic::<f64>(&z).unwrap();
            assert!(r.max_offdiag < 0.1, "seed {seed}: {}", r.max_offdiag);
        }
    }

    #[test]
    fn duplicated_channel_has_unit_offdiag() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z = Matrix::from_fn(500, 2, |i, _| base[i]);
        let r = lagged_cov_diagnostic(&z).unwrap();
        assert!((r.instantaneous.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((r.max_offdiag - 1.0).abs() < 1e-12);
    }

    #[test]
    fn instantaneous_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = Matrix::from_fn(300, 4, |_, _| StandardNormal.sample(&mut rng));
        let r = lagged_cov_diagnostic::<f64>(&z).unwrap();
        assert_eq!(r.instantaneous, r.instantaneous.transpose());
    }

    #[test]
    fn too_short_series() {
        assert!(lagged_cov_diagnostic(&Matrix::<f64>::zeros(2, 2)).is_err());
    }
}
