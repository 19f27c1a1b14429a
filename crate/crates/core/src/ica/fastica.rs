//! Symmetric FastICA with the log-cosh contrast.
//!
//! The fixed-point update in whitened coordinates is
//! `W <- E[g(W x) x^T] - diag(E[g'(W x)]) W` with `g = tanh`, followed by
//! symmetric decorrelation. Iteration stops when every row of `W` stays
//! within `tol` of its previous direction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ad::{Matrix, Series};
use crate::error::{Error, Result};
use crate::ica::linalg::sym_decorrelate;
use crate::ica::whiten::{whiten_fit, Whitener};
use crate::scalar::Real;

/// `E[log cosh(v)]` for `v ~ N(0, 1)`.
pub const GAUSSIAN_LOGCOSH_MEAN: f64 = 0.374_567_207_491_438_07;
/// Standard deviation of `log cosh(v)` for `v ~ N(0, 1)`.
pub const GAUSSIAN_LOGCOSH_STD: f64 = 0.435_623_058_586_624_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FastIcaConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Seeds the random orthogonal starting point.
    pub seed: u64,
}

impl Default for FastIcaConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcaWarning {
    /// Hit `max_iter`; the returned matrix is the best iterate.
    NotConverged,
    /// At least one component is statistically indistinguishable from a
    /// Gaussian, so its direction is not identifiable.
    NearGaussian,
}

/// Maps centered data to unit-variance source estimates:
/// `s_t = diag(scales) * a * (z_t - mean)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DemixingMatrix<T> {
    /// Unit-norm rows.
    pub a: Matrix<T>,
    pub scales: Vec<T>,
    pub mean: Vec<T>,
}

impl<T: Real> DemixingMatrix<T> {
    pub fn from_unmixing(unmixing: &Matrix<T>, mean: Vec<T>) -> Self {
        let d = unmixing.rows();
        let scales: Vec<T> = (0..d)
            .map(|i| unmixing.row(i).iter().map(|&v| v * v).sum::<T>().sqrt())
            .collect();
        let a = Matrix::from_fn(d, unmixing.cols(), |i, j| unmixing.get(i, j) / scales[i]);
        Self { a, scales, mean }
    }

    /// The full unmixing matrix `diag(scales) * a`.
    pub fn unmixing(&self) -> Matrix<T> {
        Matrix::from_fn(self.a.rows(), self.a.cols(), |i, j| self.a.get(i, j) * self.scales[i])
    }

    pub fn apply(&self, z: &Series<T>) -> Result<Series<T>> {
        if z.cols() != self.mean.len() {
            return Err(Error::Shape {
                op: "demix",
                lhs: (z.rows(), self.mean.len()),
                rhs: z.shape(),
            });
        }
        let c = Matrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j) - self.mean[j]);
        c.matmul_nt(&self.unmixing())
    }
}

#[derive(Clone, Debug)]
pub struct IcaResult<T> {
    pub demixing: DemixingMatrix<T>,
    /// Orthogonal rotation in whitened coordinates.
    pub rotation: Matrix<T>,
    pub whitener: Whitener<T>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<IcaWarning>,
}

impl<T: Real> IcaResult<T> {
    pub fn has_warning(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// FastICA with default seed.
pub fn fastica<T: Real>(z: &Series<T>, max_iter: usize, tol: f64) -> Result<IcaResult<T>> {
    FastIcaConfig {
        max_iter,
        tol,
        ..FastIcaConfig::default()
    }
    .fit(z)
}

impl FastIcaConfig {
    /// Whitens `z`, runs the fixed-point iteration and composes the result
    /// with the whitener.
    pub fn fit<T: Real>(&self, z: &Series<T>) -> Result<IcaResult<T>> {
        let whitener = whiten_fit(z)?;
        let white = whitener.apply(z)?;
        let (mut rotation, iterations, converged) = self.rotate(&white)?;
        orient_signs(&mut rotation, &white, z, &whitener)?;
        let unmixing = rotation.matmul(&whitener.transform)?;

        let mut warnings = Vec::new();
        if !converged {
            warnings.push(IcaWarning::NotConverged);
        }
        let sources = white.matmul_nt(&rotation)?;
        if near_gaussian(&sources) {
            warnings.push(IcaWarning::NearGaussian);
        }
        Ok(IcaResult {
            demixing: DemixingMatrix::from_unmixing(&unmixing, whitener.mean.clone()),
            rotation,
            whitener,
            iterations,
            converged,
            warnings,
        })
    }

    /// Orthogonal `W` maximizing log-cosh negentropy of `W x` for whitened `x`.
    pub fn rotate<T: Real>(&self, white: &Series<T>) -> Result<(Matrix<T>, usize, bool)> {
        let (n, d) = white.shape();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let init = Matrix::from_fn(d, d, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::lit(v)
        });
        let mut w = sym_decorrelate(&init)?;
        let inv_n = T::one() / T::lit(n as f64);
        let tol = T::lit(self.tol);

        for it in 1..=self.max_iter {
            // y = x W^T, g = tanh(y)
            let y = white.matmul_nt(&w)?;
            let g = y.map(T::tanh);
            let g_prime_mean: Vec<T> = (0..d)
                .map(|j| (0..n).map(|i| T::one() - g.get(i, j) * g.get(i, j)).sum::<T>() * inv_n)
                .collect();
            let egx = g.matmul_tn(white)?.scale(inv_n);
            let update = Matrix::from_fn(d, d, |i, j| egx.get(i, j) - g_prime_mean[i] * w.get(i, j));
            let w_new = sym_decorrelate(&update)?;

            let change = (0..d)
                .map(|i| {
                    let dot: T = w_new.row(i).iter().zip(w.row(i)).map(|(&a, &b)| a * b).sum();
                    (dot.abs() - T::one()).abs()
                })
                .fold(T::zero(), T::max);
            w = w_new;
            if change < tol {
                return Ok((w, it, true));
            }
        }
        Ok((w, self.max_iter, false))
    }
}

/// Flips each row so the source's largest-magnitude correlation with an
/// input channel is positive.
fn orient_signs<T: Real>(
    rotation: &mut Matrix<T>,
    white: &Series<T>,
    z: &Series<T>,
    whitener: &Whitener<T>,
) -> Result<()> {
    let sources = white.matmul_nt(rotation)?;
    let (n, d) = z.shape();
    let std: Vec<T> = (0..d)
        .map(|j| {
            let m = whitener.mean[j];
            ((0..n).map(|i| (z.get(i, j) - m).powi(2)).sum::<T>() / T::lit(n as f64)).sqrt()
        })
        .collect();
    for k in 0..d {
        let mut best = T::zero();
        for j in 0..d {
            let m = whitener.mean[j];
            let cov: T = (0..n).map(|i| sources.get(i, k) * (z.get(i, j) - m)).sum::<T>() / T::lit(n as f64);
            let corr = cov / std[j].max(T::min_positive_value());
            if corr.abs() > best.abs() {
                best = corr;
            }
        }
        if best < T::zero() {
            for v in rotation.row_mut(k) {
                *v = -*v;
            }
        }
    }
    Ok(())
}

/// Any component whose mean log-cosh lies within three standard errors of
/// the Gaussian value.
fn near_gaussian<T: Real>(sources: &Series<T>) -> bool {
    let n = sources.rows() as f64;
    let threshold = 3.0 * GAUSSIAN_LOGCOSH_STD / n.sqrt();
    (0..sources.cols()).any(|j| {
        let m: f64 = sources.col(j).iter().map(|v| logcosh(v.as_f64())).sum::<f64>() / n;
        (m - GAUSSIAN_LOGCOSH_MEAN).abs() < threshold
    })
}

/// Overflow-free `ln(cosh(x))`.
pub fn logcosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ica::linalg::covariance;
    use rand_distr::Uniform;

    fn uniform_sources(t: usize, d: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new(-3f64.sqrt(), 3f64.sqrt());
        Matrix::from_fn(t, d, |_, _| u.sample(&mut rng))
    }

    fn max_abs_corr_each(truth: &Matrix<f64>, est: &Matrix<f64>) -> Vec<f64> {
        let d = truth.cols();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| pearson(&truth.col(i), &est.col(j)).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    /// Independent oracle: grid search over the rotation angle for the one
    /// maximizing summed log-cosh negentropy of the whitened data.
    fn grid_oracle(white: &Matrix<f64>) -> f64 {
        let n = white.rows() as f64;
        let negentropy = |theta: f64| {
            let (c, s) = (theta.cos(), theta.sin());
            let mut j = 0.0;
            for (u, v) in [(c, s), (-s, c)] {
                let m: f64 = (0..white.rows())
                    .map(|i| logcosh(u * white.get(i, 0) + v * white.get(i, 1)))
                    .sum::<f64>()
                    / n;
                j += (m - GAUSSIAN_LOGCOSH_MEAN).powi(2);
            }
            j
        };
        (0..900)
            .map(|k| k as f64 * std::f64::consts::FRAC_PI_2 / 900.0)
            .max_by(|&a, &b| negentropy(a).partial_cmp(&negentropy(b)).unwrap())
            .unwrap()
    }

    #[test]
    fn recovers_rotated_uniform_sources() {
        let s = uniform_sources(10_000, 2, 1);
        let r = std::f64::consts::FRAC_PI_4;
        let rot = Matrix::from_rows(&[vec![r.cos(), -r.sin()], vec![r.sin(), r.cos()]]).unwrap();
        let x = s.matmul(&rot).unwrap();
        let res = fastica(&x, 500, 1e-6).unwrap();
        assert!(res.converged);
        let est = res.demixing.apply(&x).unwrap();
        for c in max_abs_corr_each(&s, &est) {
            assert!(c > 0.99, "{c}");
        }

        // The recovered rotation agrees with the brute-force optimum.
        let white = res.whitener.apply(&x).unwrap();
        let theta = grid_oracle(&white);
        let (c, sn) = (theta.cos(), theta.sin());
        let oracle_est = white.matmul_nt(&Matrix::from_rows(&[vec![c, sn], vec![-sn, c]]).unwrap()).unwrap();
        for c in max_abs_corr_each(&oracle_est, &est) {
            assert!(c > 0.999, "oracle disagreement {c}");
        }
    }

    #[test]
    fn independent_input_gives_permutation() {
        let s = uniform_sources(20_000, 3, 2);
        let res = fastica(&s, 500, 1e-6).unwrap();
        let u = res.demixing.a.clone();
        for i in 0..3 {
            let row_max = u.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(row_max > 0.99, "row {i}: {:?}", u.row(i));
        }
    }

    #[test]
    fn rotation_is_orthonormal_and_rows_unit_norm() {
        let s = uniform_sources(5000, 4, 3);
        let mix = Matrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.3 * (i + j) as f64 / 4.0 });
        let x = s.matmul(&mix).unwrap();
        let res = fastica(&x, 500, 1e-6).unwrap();
        let g = res.rotation.matmul_nt(&res.rotation).unwrap();
        assert!(g.max_abs_diff(&Matrix::identity(4)).unwrap() < 1e-8);
        for i in 0..4 {
            let norm: f64 = res.demixing.a.row(i).iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
        let est = res.demixing.apply(&x).unwrap();
        assert!(covariance(&est).max_abs_diff(&Matrix::identity(4)).unwrap() < 1e-8);
    }

    #[test]
    fn gaussian_sources_raise_warning() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::from_fn(10_000, 2, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let res = fastica(&x, 500, 1e-6).unwrap();
        assert!(res.has_warning(), "{:?}", res.warnings);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let s = uniform_sources(2000, 3, 5);
        let res = fastica(&s, 1, 1e-15).unwrap();
        assert!(!res.converged);
        assert!(res.warnings.contains(&IcaWarning::NotConverged));
    }

    #[test]
    fn sign_convention_is_positive() {
        let s = uniform_sources(5000, 2, 6);
        let res = fastica(&s, 500, 1e-6).unwrap();
        let est = res.demixing.apply(&s).unwrap();
        for k in 0..2 {
            let best = (0..2)
                .map(|j| pearson(&est.col(k), &s.col(j)))
                .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
                .unwrap();
            assert!(best > 0.0);
        }
    }
}
