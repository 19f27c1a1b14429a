//! Scoring estimated sources against ground truth.
//!
//! Scores are mean absolute Pearson correlations under the best one-to-one
//! pairing of true and estimated channels, reported on a 0-100 scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ad::{Matrix, Series};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest width handled by exhaustive assignment (9! candidates).
pub const MAX_EXHAUSTIVE_DIM: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ICA")]
    Ica,
    #[serde(rename = "FBM+ICA")]
    FbmIca,
    #[serde(rename = "S-FBM")]
    SlowFbm,
    #[serde(rename = "S-FBM+ICA")]
    SlowFbmIca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ica, Method::FbmIca, Method::SlowFbm, Method::SlowFbmIca];

    pub fn label(self) -> &'static str {
        match self {
            Method::Ica => "ICA",
            Method::FbmIca => "FBM+ICA",
            Method::SlowFbm => "S-FBM",
            Method::SlowFbmIca => "S-FBM+ICA",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::contract(format!("unknown method `{s}` (expected ICA, FBM+ICA, S-FBM, S-FBM+ICA)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReport<T> {
    /// `|corr(truth_i, est_j)|`, rows = true sources.
    pub corr: Matrix<T>,
    /// `assignment[i]` is the estimate paired with true source `i`.
    pub assignment: Vec<usize>,
    pub per_pair: Vec<T>,
    /// `100 * mean(per_pair)`.
    pub matched_mean: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub method: String,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single run.
    pub std: Option<f64>,
    pub n_seeds: usize,
}

fn column_moments<T: Real>(x: &Series<T>, j: usize) -> (T, T) {
    let n = T::lit(x.rows() as f64);
    let mean = (0..x.rows()).map(|i| x.get(i, j)).sum::<T>() / n;
    let ss = (0..x.rows()).map(|i| (x.get(i, j) - mean).powi(2)).sum::<T>();
    (mean, ss.sqrt())
}

/// Absolute Pearson correlation between every true and estimated channel.
pub fn correlation_matrix<T: Real>(truth: &Series<T>, est: &Series<T>) -> Result<Matrix<T>> {
    if truth.shape() != est.shape() {
        return Err(Error::Shape {
            op: "correlation_matrix",
            lhs: truth.shape(),
            rhs: est.shape(),
        });
    }
    let d = truth.cols();
    let tm: Vec<(T, T)> = (0..d).map(|j| column_moments(truth, j)).collect();
    let em: Vec<(T, T)> = (0..d).map(|j| column_moments(est, j)).collect();
    for (name, m) in [("truth", &tm), ("estimate", &em)] {
        if let Some(j) = m.iter().position(|&(_, s)| !(s > T::zero())) {
            return Err(Error::Degenerate(format!("{name} column {j} is constant")));
        }
    }
    Ok(Matrix::from_fn(d, d, |i, j| {
        let cov: T = (0..truth.rows())
            .map(|t| (truth.get(t, i) - tm[i].0) * (est.get(t, j) - em[j].0))
            .sum();
        (cov / (tm[i].1 * em[j].1)).abs().min(T::one())
    }))
}

/// Best one-to-one assignment by exhaustive search over permutations.
pub fn match_and_score<T: Real>(corr: &Matrix<T>) -> Result<(Vec<usize>, T)> {
    let d = corr.rows();
    if corr.cols() != d {
        return Err(Error::contract(format!("match_and_score needs a square matrix, got {:?}", corr.shape())));
    }
    if d == 0 || d > MAX_EXHAUSTIVE_DIM {
        return Err(Error::contract(format!("match_and_score supports 1..={MAX_EXHAUSTIVE_DIM} channels, got {d}")));
    }
    let score = |p: &[usize]| (0..d).map(|i| corr.get(i, p[i])).sum::<T>();

    // Heap's algorithm, iterative.
    let mut perm: Vec<usize> = (0..d).collect();
    let mut best = perm.clone();
    let mut best_score = score(&perm);
    let mut c = vec![0usize; d];
    let mut i = 0;
    while i < d {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let s = score(&perm);
            if s > best_score {
                best_score = s;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best, T::lit(100.0) * best_score / T::lit(d as f64)))
}

/// Correlation matrix plus optimal matching in one report.
pub fn score_sources<T: Real>(truth: &Series<T>, est: &Series<T>) -> Result<CorrelationReport<T>> {
    let corr = correlation_matrix(truth, est)?;
    let (assignment, matched_mean) = match_and_score(&corr)?;
    let per_pair = assignment.iter().enumerate().map(|(i, &j)| corr.get(i, j)).collect();
    Ok(CorrelationReport {
        corr,
        assignment,
        per_pair,
        matched_mean,
    })
}

/// Sample mean and `(n - 1)`-denominator standard deviation.
pub fn aggregate(runs: &[f64], label: &str) -> Result<AggregateScore> {
    if runs.is_empty() {
        return Err(Error::contract("aggregate: no runs"));
    }
    let n = runs.len();
    let mean = runs.iter().sum::<f64>() / n as f64;
    let std = (n >= 2).then(|| (runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Ok(AggregateScore {
        method: label.to_string(),
        mean,
        std,
        n_seeds: n,
    })
}
