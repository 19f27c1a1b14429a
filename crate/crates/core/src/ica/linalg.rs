//! Symmetric eigendecomposition and covariance helpers for small matrices.

use crate::ad::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues (ascending) and matching unit eigenvectors (as columns).
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

/// Cyclic Jacobi rotations; exact enough for the `d <= 16` matrices used here.
pub fn sym_eigen<T: Real>(a: &Matrix<T>) -> Result<SymEigen<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape {
            op: "sym_eigen",
            lhs: a.shape(),
            rhs: (n, n),
        });
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += m.get(i, i) * m.get(i, i);
            for j in i + 1..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SymEigen {
        values: order.iter().map(|&i| m.get(i, i)).collect(),
        vectors: v.select_cols(&order),
    })
}

/// `V diag(f(lambda)) V^T` for a symmetric matrix.
pub fn sym_fn<T: Real>(e: &SymEigen<T>, f: impl Fn(T) -> T) -> Matrix<T> {
    let n = e.values.len();
    let scaled = Matrix::from_fn(n, n, |i, j| e.vectors.get(i, j) * f(e.values[j]));
    scaled.matmul_nt(&e.vectors).expect("square")
}

/// Subtracts column means.
pub fn center<T: Real>(x: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let mean = x.col_means();
    let c = Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - mean[j]);
    (c, mean)
}

/// Sample covariance (`1/T` normalization) of the columns.
pub fn covariance<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    let (c, _) = center(x);
    c.matmul_tn(&c).expect("same rows").scale(T::one() / T::lit(x.rows() as f64))
}

/// Symmetric decorrelation `(W W^T)^{-1/2} W`.
pub fn sym_decorrelate<T: Real>(w: &Matrix<T>) -> Result<Matrix<T>> {
    let e = sym_eigen(&w.matmul_nt(w)?)?;
    let inv_sqrt = sym_fn(&e, |l| T::one() / l.max(T::min_positive_value()).sqrt());
    inv_sqrt.matmul(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_reconstructs() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.2],
            vec![0.5, -0.2, 1.0],
        ])
        .unwrap();
        let e = sym_eigen(&a).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let back = sym_fn(&e, |l| l);
        assert!(back.max_abs_diff(&a).unwrap() < 1e-12);
        let vtv = e.vectors.matmul_tn(&e.vectors).unwrap();
        assert!(vtv.max_abs_diff(&Matrix::identity(3)).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_input() {
        let a = Matrix::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = sym_eigen(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 4.0]);
    }

    #[test]
    fn decorrelated_rows_are_orthonormal() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.3, -1.0]]).unwrap();
        let o = sym_decorrelate(&w).unwrap();
        assert!(o.matmul_nt(&o).unwrap().max_abs_diff(&Matrix::identity(2)).unwrap() < 1e-12);
    }
}
