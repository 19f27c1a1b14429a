//! Affine coupling layer (RealNVP).
//!
//! In the generative direction the active coordinates become
//! `y = x * exp(s(x_p)) + t(x_p)`, where `x_p` are the passive (masked)
//! coordinates, which are copied through. `s` is soft-clamped to
//! `[-scale_clamp, scale_clamp]` via `c * tanh(s / c)`.

use rand::Rng;

use crate::ad::{Init, Matrix, Mlp, MlpVars, Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_SCALE_CLAMP: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct AffineCoupling<T> {
    mask: Vec<bool>,
    scale_net: Mlp<T>,
    shift_net: Mlp<T>,
    scale_clamp: T,
    passive: Vec<usize>,
    active: Vec<usize>,
}

/// Tape handles for one coupling layer.
#[derive(Clone, Debug)]
pub struct CouplingVars {
    pub scale: MlpVars,
    pub shift: MlpVars,
}

/// Even/odd split: coordinate `i` passes through when `i % 2 == parity`.
pub fn alternating_mask(d: usize, parity: usize) -> Vec<bool> {
    (0..d).map(|i| i % 2 == parity % 2).collect()
}

impl<T: Real> AffineCoupling<T> {
    pub fn new(mask: Vec<bool>, scale_net: Mlp<T>, shift_net: Mlp<T>, scale_clamp: T) -> Result<Self> {
        let passive: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let active: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        if passive.is_empty() || active.is_empty() {
            return Err(Error::contract(format!(
                "coupling mask needs both passive and active coordinates: {mask:?}"
            )));
        }
        for net in [&scale_net, &shift_net] {
            if net.input_dim() != passive.len() || net.output_dim() != active.len() {
                return Err(Error::Shape {
                    op: "coupling_new",
                    lhs: (passive.len(), active.len()),
                    rhs: (net.input_dim(), net.output_dim()),
                });
            }
        }
        if !(scale_clamp > T::zero()) {
            return Err(Error::contract("scale_clamp must be positive"));
        }
        Ok(Self {
            mask,
            scale_net,
            shift_net,
            scale_clamp,
            passive,
            active,
        })
    }

    /// Layer with `hidden` tanh layers in both conditioners.
    ///
    /// With `identity_init` the output layers start at zero, so the layer is
    /// the identity map until trained.
    pub fn random<R: Rng + ?Sized>(
        mask: Vec<bool>,
        hidden: &[usize],
        init: Init,
        identity_init: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let k = mask.iter().filter(|&&m| m).count();
        let sizes: Vec<usize> = std::iter::once(k)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(mask.len() - k))
            .collect();
        let mut scale_net = Mlp::new(&sizes, init, rng)?;
        let mut shift_net = Mlp::new(&sizes, init, rng)?;
        if identity_init {
            scale_net.zero_output();
            shift_net.zero_output();
        }
        Self::new(mask, scale_net, shift_net, T::lit(DEFAULT_SCALE_CLAMP))
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn scale_net(&self) -> &Mlp<T> {
        &self.scale_net
    }

    pub fn shift_net(&self) -> &Mlp<T> {
        &self.shift_net
    }

    pub fn scale_clamp(&self) -> T {
        self.scale_clamp
    }

    fn check_width(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::Shape {
                op: "coupling",
                lhs: (x.rows(), self.dim()),
                rhs: x.shape(),
            });
        }
        Ok(())
    }

    /// Clamped log-scale and shift for the given passive coordinates.
    fn conditioners(&self, passive: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
        let c = self.scale_clamp;
        let s = self.scale_net.forward(passive)?.map(|v| c * (v / c).tanh());
        let t = self.shift_net.forward(passive)?;
        Ok((s, t))
    }

    /// Generative direction. Returns the output and per-row `log|det J|`.
    pub fn forward(&self, z: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
        self.check_width(z)?;
        let (s, t) = self.conditioners(&z.select_cols(&self.passive))?;
        let mut out = z.clone();
        for i in 0..z.rows() {
            for (k, &j) in self.active.iter().enumerate() {
                out.set(i, j, z.get(i, j) * s.get(i, k).exp() + t.get(i, k));
            }
        }
        Ok((out, s.sum_rows().into_vec()))
    }

    /// Exact inverse of [`AffineCoupling::forward`]; the log-det is negated.
    pub fn inverse(&self, x: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
        self.check_width(x)?;
        let (s, t) = self.conditioners(&x.select_cols(&self.passive))?;
        let mut out = x.clone();
        for i in 0..x.rows() {
            for (k, &j) in self.active.iter().enumerate() {
                out.set(i, j, (x.get(i, j) - t.get(i, k)) * (-s.get(i, k)).exp());
            }
        }
        let logdet = s.sum_rows().into_vec().into_iter().map(|v| -v).collect();
        Ok((out, logdet))
    }

    pub fn register(&self, tape: &mut Tape<T>) -> CouplingVars {
        CouplingVars {
            scale: self.scale_net.register(tape),
            shift: self.shift_net.register(tape),
        }
    }

    /// [`AffineCoupling::inverse`] recorded on a tape. Returns the latent and
    /// a `rows x 1` node of per-row log-determinants.
    pub fn inverse_tape(&self, tape: &mut Tape<T>, x: Var, vars: &CouplingVars) -> Result<(Var, Var)> {
        let width = tape.value(x).cols();
        if width != self.dim() {
            return Err(Error::Shape {
                op: "coupling",
                lhs: (tape.value(x).rows(), self.dim()),
                rhs: tape.value(x).shape(),
            });
        }
        let c = self.scale_clamp;
        let xp = tape.select_cols(x, &self.passive)?;
        let xa = tape.select_cols(x, &self.active)?;
        let raw = self.scale_net.forward_tape(tape, xp, &vars.scale)?;
        let s = tape.scale(raw, T::one() / c);
        let s = tape.tanh(s);
        let s = tape.scale(s, c);
        let t = self.shift_net.forward_tape(tape, xp, &vars.shift)?;
        let centered = tape.sub(xa, t)?;
        let neg_s = tape.scale(s, -T::one());
        let inv_scale = tape.exp(neg_s);
        let za = tape.mul(centered, inv_scale)?;
        let z = tape.scatter_cols(&[(xp, &self.passive), (za, &self.active)], width)?;
        let logdet = tape.sum_rows(neg_s);
        Ok((z, logdet))
    }

    pub fn params(&self) -> Vec<&Matrix<T>> {
        let mut p = self.scale_net.params();
        p.extend(self.shift_net.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut p = self.scale_net.params_mut();
        p.extend(self.shift_net.params_mut());
        p
    }

    pub fn vars_in_order(vars: &CouplingVars) -> Vec<Var> {
        let mut v = Mlp::<T>::vars_in_order(&vars.scale);
        v.extend(Mlp::<T>::vars_in_order(&vars.shift));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn zero_conditioners_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer =
            AffineCoupling::<f64>::random(alternating_mask(4, 0), &[8], Init::FanIn, true, &mut rng).unwrap();
        let z = randn(10, 4, &mut rng);
        let (x, ld) = layer.forward(&z).unwrap();
        assert_eq!(x, z);
        assert!(ld.iter().all(|&v| v == 0.0));
        let (back, ld_inv) = layer.inverse(&z).unwrap();
        assert_eq!(back, z);
        assert!(ld_inv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_log_scale_gives_closed_form_logdet() {
        // scale net: weights zero, output bias raw; clamp maps raw -> c.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clamp = 3.0_f64;
        let c = 0.7_f64;
        let raw = clamp * (c / clamp).atanh();
        let mask = vec![true, false, false, true, false];
        let mut scale = Mlp::<f64>::new(&[2, 4, 3], Init::Zeros, &mut rng).unwrap();
        scale.params_mut()[3].map_inplace(|_| raw);
        let shift = Mlp::<f64>::new(&[2, 4, 3], Init::FanIn, &mut rng).unwrap();
        let layer = AffineCoupling::new(mask, scale, shift, clamp).unwrap();
        let (_, ld) = layer.forward(&randn(6, 5, &mut rng)).unwrap();
        for v in ld {
            assert!((v - 3.0 * c).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn inverse_undoes_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let d = 2 + seed % 5;
            let layer = AffineCoupling::<f64>::random(
                alternating_mask(d, seed),
                &[16, 16],
                Init::Normal(0.8),
                false,
                &mut rng,
            )
            .unwrap();
            let z = randn(40, d, &mut rng);
            let (x, ld_f) = layer.forward(&z).unwrap();
            let (back, ld_i) = layer.inverse(&x).unwrap();
            assert!(back.max_abs_diff(&z).unwrap() < 1e-9);
            for (a, b) in ld_f.iter().zip(&ld_i) {
                assert!((a + b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer =
            AffineCoupling::<f64>::random(alternating_mask(4, 1), &[8], Init::FanIn, false, &mut rng).unwrap();
        assert!(matches!(layer.forward(&Matrix::zeros(3, 5)), Err(Error::Shape { .. })));
        assert!(matches!(layer.inverse(&Matrix::zeros(3, 3)), Err(Error::Shape { .. })));
    }

    #[test]
    fn mask_must_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::<f64>::new(&[2, 2], Init::Zeros, &mut rng).unwrap();
        assert!(AffineCoupling::new(vec![true, true], net.clone(), net, 3.0).is_err());
    }

    #[test]
    fn tape_inverse_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer =
            AffineCoupling::<f64>::random(alternating_mask(3, 1), &[6, 5], Init::Normal(0.7), false, &mut rng)
                .unwrap();
        let x = randn(9, 3, &mut rng);
        let (z, ld) = layer.inverse(&x).unwrap();
        let mut tape = Tape::new();
        let xv = tape.leaf(x);
        let vars = layer.register(&mut tape);
        let (zv, ldv) = layer.inverse_tape(&mut tape, xv, &vars).unwrap();
        assert!(tape.value(zv).max_abs_diff(&z).unwrap() < 1e-14);
        assert!(tape.value(ldv).max_abs_diff(&Matrix::column(&ld)).unwrap() < 1e-14);
    }
}
