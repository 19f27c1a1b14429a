//! Classical linear slow feature analysis.

use crate::ad::{Matrix, Series};
use crate::error::{Error, Result};
use crate::flows::slow::slow_diff;
use crate::ica::linalg::{covariance, sym_eigen};
use crate::ica::whiten::whiten_fit;
use crate::scalar::Real;

/// Linear SFA model: whitening followed by a rotation onto the directions
/// of smallest increment variance.
#[derive(Clone, Debug)]
pub struct LinearSfa<T> {
    pub mean: Vec<T>,
    /// `k x d`; rows ordered from slowest to fastest.
    pub projection: Matrix<T>,
    /// Increment variance of each component, ascending.
    pub slowness: Vec<T>,
}

impl<T: Real> LinearSfa<T> {
    pub fn fit(x: &Series<T>, k: usize) -> Result<Self> {
        let d = x.cols();
        if k > d || k == 0 {
            return Err(Error::contract(format!("linear_sfa: k={k} must be in 1..={d}")));
        }
        let w = whiten_fit(x)?;
        let white = w.apply(x)?;
        // Drop the first row: it carries the level, not an increment.
        let inc = slow_diff(&white)?.slice_rows(1, white.rows());
        let e = sym_eigen(&covariance(&inc))?;
        let basis = e.vectors.select_cols(&(0..k).collect::<Vec<_>>());
        let projection = basis.matmul_tn(&w.transform)?;
        Ok(Self {
            mean: w.mean,
            projection,
            slowness: e.values[..k].to_vec(),
        })
    }

    pub fn transform(&self, x: &Series<T>) -> Result<Series<T>> {
        let c = Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - self.mean[j]);
        c.matmul_nt(&self.projection)
    }
}

/// The `k` slowest unit-variance, zero-mean components of `x`, slowest first.
pub fn linear_sfa<T: Real>(x: &Series<T>, k: usize) -> Result<Series<T>> {
    LinearSfa::fit(x, k)?.transform(x)
}

/// Mean squared increment of each column, `<(z_t - z_{t-1})^2>` over `t >= 2`.
pub fn mean_squared_increments<T: Real>(z: &Series<T>) -> Vec<T> {
    let n = z.rows();
    if n < 2 {
        return vec![T::zero(); z.cols()];
    }
    (0..z.cols())
        .map(|j| {
            (1..n).map(|t| (z.get(t, j) - z.get(t - 1, j)).powi(2)).sum::<T>() / T::lit((n - 1) as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ica::linalg::covariance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn sine_plus_noise(t: usize) -> (Matrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sine: Vec<f64> = (0..t).map(|i| (i as f64 * 2.0 * std::f64::consts::PI / 500.0).sin()).collect();
        let src = Matrix::from_fn(t, 2, |i, j| {
            if j == 0 {
                sine[i]
            } else {
                StandardNormal.sample(&mut rng)
            }
        });
        let mix = Matrix::from_rows(&[vec![1.0, 0.6], vec![0.4, 1.0]]).unwrap();
        (src.matmul(&mix).unwrap(), sine)
    }

    #[test]
    fn slowest_component_is_the_sinusoid() {
        let (x, sine) = sine_plus_noise(5000);
        let y = linear_sfa(&x, 1).unwrap();
        assert!(pearson(&y.col(0), &sine).abs() > 0.99);
    }

    #[test]
    fn components_are_white_and_ordered() {
        let (x, _) = sine_plus_noise(3000);
        let y = linear_sfa(&x, 2).unwrap();
        assert!(covariance(&y).max_abs_diff(&Matrix::identity(2)).unwrap() < 1e-8);
        assert!(y.col_means().iter().all(|m| m.abs() < 1e-10));
        let inc = mean_squared_increments(&y);
        assert!(inc[0] <= inc[1]);
    }

    #[test]
    fn full_rank_output_is_invertible_rotation_of_input() {
        let (x, _) = sine_plus_noise(1000);
        let sfa = LinearSfa::fit(&x, 2).unwrap();
        let y = sfa.transform(&x).unwrap();
        // Regress x (centered) on y: exact reconstruction if y spans x.
        let (xc, _) = crate::ica::linalg::center(&x);
        let coef = y.matmul_tn(&xc).unwrap().scale(1.0 / 1000.0);
        let back = y.matmul(&coef).unwrap();
        assert!(back.max_abs_diff(&xc).unwrap() < 1e-9);
    }

    #[test]
    fn k_larger_than_d_is_rejected() {
        let (x, _) = sine_plus_noise(100);
        assert!(matches!(linear_sfa(&x, 3), Err(Error::Contract(_))));
    }
}
