//! Feed-forward conditioner network: tanh hidden layers, linear output.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::ad::matrix::Matrix;
use crate::ad::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Weight initialization scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
    FanIn,
    /// `N(0, std^2)` for weights and biases.
    Normal(f64),
    Zeros,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    layer_sizes: Vec<usize>,
    /// `fan_in x fan_out` per layer.
    weights: Vec<Matrix<T>>,
    /// `1 x fan_out` per layer.
    biases: Vec<Matrix<T>>,
}

/// Tape handles for one network's parameters.
#[derive(Clone, Debug)]
pub struct MlpVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl<T: Real> Mlp<T> {
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], init: Init, rng: &mut R) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::contract(format!(
                "mlp needs at least two non-zero layer sizes, got {layer_sizes:?}"
            )));
        }
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut draw = |n: usize| -> Vec<T> {
                match init {
                    Init::FanIn => {
                        let bound = 1.0 / (fan_in as f64).sqrt();
                        let dist = Uniform::new_inclusive(-bound, bound);
                        (0..n).map(|_| T::lit(dist.sample(rng))).collect()
                    }
                    Init::Normal(std) => (0..n)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(rng);
                            T::lit(std * z)
                        })
                        .collect(),
                    Init::Zeros => vec![T::zero(); n],
                }
            };
            weights.push(Matrix::new(fan_in, fan_out, draw(fan_in * fan_out))?);
            biases.push(Matrix::new(1, fan_out, draw(fan_out))?);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Rebuilds a network from stored parameters.
    pub fn from_parts(weights: Vec<Matrix<T>>, biases: Vec<Matrix<T>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::contract("mlp parts: weight/bias count mismatch"));
        }
        let mut layer_sizes = vec![weights[0].rows()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.rows() != *layer_sizes.last().unwrap() || b.shape() != (1, w.cols()) {
                return Err(Error::Shape {
                    op: "mlp_from_parts",
                    lhs: w.shape(),
                    rhs: b.shape(),
                });
            }
            layer_sizes.push(w.cols());
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Matrix<T>] {
        &self.biases
    }

    /// Zeroes the output layer so the network computes the constant 0.
    pub fn zero_output(&mut self) {
        if let (Some(w), Some(b)) = (self.weights.last_mut(), self.biases.last_mut()) {
            w.map_inplace(|_| T::zero());
            b.map_inplace(|_| T::zero());
        }
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let last = self.weights.len() - 1;
        let mut h = x.matmul(&self.weights[0])?.add_row(&self.biases[0])?;
        for l in 1..=last {
            h.map_inplace(T::tanh);
            h = h.matmul(&self.weights[l])?.add_row(&self.biases[l])?;
        }
        Ok(h)
    }

    pub fn register(&self, tape: &mut Tape<T>) -> MlpVars {
        MlpVars {
            weights: self.weights.iter().map(|w| tape.leaf(w.clone())).collect(),
            biases: self.biases.iter().map(|b| tape.leaf(b.clone())).collect(),
        }
    }

    pub fn forward_tape(&self, tape: &mut Tape<T>, x: Var, vars: &MlpVars) -> Result<Var> {
        let last = vars.weights.len() - 1;
        let mut h = tape.matmul(x, vars.weights[0])?;
        h = tape.add_row(h, vars.biases[0])?;
        for l in 1..=last {
            h = tape.tanh(h);
            h = tape.matmul(h, vars.weights[l])?;
            h = tape.add_row(h, vars.biases[l])?;
        }
        Ok(h)
    }

    /// Parameters in a fixed order: `w0, b0, w1, b1, ...`.
    pub fn params(&self) -> Vec<&Matrix<T>> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    /// Tape handles in the same order as [`Mlp::params`].
    pub fn vars_in_order(vars: &MlpVars) -> Vec<Var> {
        vars.weights
            .iter()
            .zip(&vars.biases)
            .flat_map(|(&w, &b)| [w, b])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tape_and_plain_forward_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::new(&[3, 5, 4, 2], Init::FanIn, &mut rng).unwrap();
        let x = Matrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64).sin());
        let plain = net.forward(&x).unwrap();
        let mut tape = Tape::new();
        let xv = tape.leaf(x);
        let vars = net.register(&mut tape);
        let y = net.forward_tape(&mut tape, xv, &vars).unwrap();
        assert_eq!(tape.value(y), &plain);
    }

    #[test]
    fn zero_output_gives_zero_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::<f64>::new(&[2, 8, 1], Init::FanIn, &mut rng).unwrap();
        net.zero_output();
        let y = net.forward(&Matrix::filled(4, 2, 3.0)).unwrap();
        assert_eq!(y, Matrix::zeros(4, 1));
    }

    #[test]
    fn rejects_degenerate_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(Mlp::<f64>::new(&[2], Init::FanIn, &mut rng).is_err());
        assert!(Mlp::<f64>::new(&[2, 0, 1], Init::FanIn, &mut rng).is_err());
    }
}
