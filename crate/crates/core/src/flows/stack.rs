//! Ordered chains of invertible layers.

use rand::Rng;

use crate::ad::{Init, Matrix, Series, Tape, Var};
use crate::error::{Error, Result};
use crate::flows::coupling::{alternating_mask, AffineCoupling, CouplingVars};
use crate::flows::slow::SlowFlow;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum FlowLayer<T> {
    Coupling(AffineCoupling<T>),
    Slow(SlowFlow),
}

/// A normalizing flow `x = f(z)`.
///
/// `layers` are stored in generative order: `decode` applies `layers[0]`
/// first, `encode` inverts them from the last to the first. A slow flow
/// therefore sits at index 0 and `encode` differences last.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStack<T> {
    d: usize,
    layers: Vec<FlowLayer<T>>,
}

/// Tape handles for a stack's parameters, one entry per layer.
#[derive(Clone, Debug)]
pub struct StackVars {
    layers: Vec<Option<CouplingVars>>,
}

impl StackVars {
    /// Parameter handles in [`FlowStack::params`] order.
    pub fn flat<T: Real>(&self) -> Vec<Var> {
        self.layers
            .iter()
            .flatten()
            .flat_map(AffineCoupling::<T>::vars_in_order)
            .collect()
    }
}

impl<T: Real> FlowStack<T> {
    /// The identity flow on `d` coordinates.
    pub fn identity(d: usize) -> Self {
        Self { d, layers: Vec::new() }
    }

    pub fn from_layers(d: usize, layers: Vec<FlowLayer<T>>) -> Result<Self> {
        let mut s = Self::identity(d);
        for l in layers {
            s.push(l)?;
        }
        Ok(s)
    }

    /// RealNVP stack of `depth` coupling layers with alternating even/odd
    /// masks and `hidden` tanh layers per conditioner.
    pub fn realnvp<R: Rng + ?Sized>(
        d: usize,
        depth: usize,
        hidden: &[usize],
        init: Init,
        identity_init: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::contract("coupling layers need d >= 2"));
        }
        let mut s = Self::identity(d);
        for i in 0..depth {
            let layer = AffineCoupling::random(alternating_mask(d, i), hidden, init, identity_init, rng)?;
            s.push(FlowLayer::Coupling(layer))?;
        }
        Ok(s)
    }

    /// Prepends a slow flow as the first generative layer.
    pub fn with_slow_flow(mut self) -> Self {
        if !self.has_slow_flow() {
            self.layers.insert(0, FlowLayer::Slow(SlowFlow));
        }
        self
    }

    pub fn push(&mut self, layer: FlowLayer<T>) -> Result<()> {
        if let FlowLayer::Coupling(c) = &layer {
            if c.dim() != self.d {
                return Err(Error::Shape {
                    op: "stack_push",
                    lhs: (1, self.d),
                    rhs: (1, c.dim()),
                });
            }
        }
        self.layers.push(layer);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn layers(&self) -> &[FlowLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [FlowLayer<T>] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn has_slow_flow(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, FlowLayer::Slow(_)))
    }

    fn check_width(&self, x: &Series<T>) -> Result<()> {
        if x.cols() != self.d {
            return Err(Error::Shape {
                op: "flow_stack",
                lhs: (x.rows(), self.d),
                rhs: x.shape(),
            });
        }
        Ok(())
    }

    /// `z = f^{-1}(x)` with per-row accumulated `log|det|` of the inverse.
    pub fn encode_with_logdet(&self, x: &Series<T>) -> Result<(Series<T>, Vec<T>)> {
        self.check_width(x)?;
        let mut z = x.clone();
        let mut logdet = vec![T::zero(); x.rows()];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            z = match layer {
                FlowLayer::Coupling(c) => {
                    let (out, ld) = c.inverse(&z)?;
                    for (acc, v) in logdet.iter_mut().zip(ld) {
                        *acc += v;
                    }
                    out
                }
                FlowLayer::Slow(s) => s.inverse(&z)?,
            };
            if !z.is_finite() {
                return Err(Error::NonFinite {
                    layer: idx,
                    what: "encoded values".into(),
                });
            }
        }
        Ok((z, logdet))
    }

    /// `x = f(z)` with per-row accumulated `log|det|` of the forward map.
    pub fn decode_with_logdet(&self, z: &Series<T>) -> Result<(Series<T>, Vec<T>)> {
        self.check_width(z)?;
        let mut x = z.clone();
        let mut logdet = vec![T::zero(); z.rows()];
        for (idx, layer) in self.layers.iter().enumerate() {
            x = match layer {
                FlowLayer::Coupling(c) => {
                    let (out, ld) = c.forward(&x)?;
                    for (acc, v) in logdet.iter_mut().zip(ld) {
                        *acc += v;
                    }
                    out
                }
                FlowLayer::Slow(s) => s.forward(&x)?,
            };
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    layer: idx,
                    what: "decoded values".into(),
                });
            }
        }
        Ok((x, logdet))
    }

    pub fn encode(&self, x: &Series<T>) -> Result<Series<T>> {
        Ok(self.encode_with_logdet(x)?.0)
    }

    pub fn decode(&self, z: &Series<T>) -> Result<Series<T>> {
        Ok(self.decode_with_logdet(z)?.0)
    }

    /// Encodes through the coupling layers only, skipping slow flows: the
    /// latent series itself rather than its increments.
    pub fn encode_latent(&self, x: &Series<T>) -> Result<Series<T>> {
        self.check_width(x)?;
        let mut z = x.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            if let FlowLayer::Coupling(c) = layer {
                z = c.inverse(&z)?.0;
                if !z.is_finite() {
                    return Err(Error::NonFinite {
                        layer: idx,
                        what: "encoded values".into(),
                    });
                }
            }
        }
        Ok(z)
    }

    pub fn register(&self, tape: &mut Tape<T>) -> StackVars {
        StackVars {
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    FlowLayer::Coupling(c) => Some(c.register(tape)),
                    FlowLayer::Slow(_) => None,
                })
                .collect(),
        }
    }

    /// [`FlowStack::encode_with_logdet`] on a tape over a batch of
    /// concatenated windows with the given row counts. Returns the latent
    /// and a `rows x 1` log-det node (`None` when no layer has parameters).
    pub fn encode_tape(
        &self,
        tape: &mut Tape<T>,
        x: Var,
        vars: &StackVars,
        segments: &[usize],
    ) -> Result<(Var, Option<Var>)> {
        self.check_width(tape.value(x))?;
        let mut z = x;
        let mut logdet: Option<Var> = None;
        for (layer, lv) in self.layers.iter().zip(&vars.layers).rev() {
            match (layer, lv) {
                (FlowLayer::Coupling(c), Some(cv)) => {
                    let (out, ld) = c.inverse_tape(tape, z, cv)?;
                    z = out;
                    logdet = Some(match logdet {
                        Some(acc) => tape.add(acc, ld)?,
                        None => ld,
                    });
                }
                (FlowLayer::Slow(_), _) => z = tape.slow_diff(z, segments)?,
                (FlowLayer::Coupling(_), None) => {
                    return Err(Error::contract("stack vars do not match stack layers"))
                }
            }
        }
        Ok((z, logdet))
    }

    /// All trainable parameters, layer by layer.
    pub fn params(&self) -> Vec<&Matrix<T>> {
        self.layers
            .iter()
            .flat_map(|l| match l {
                FlowLayer::Coupling(c) => c.params(),
                FlowLayer::Slow(_) => Vec::new(),
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| match l {
                FlowLayer::Coupling(c) => c.params_mut(),
                FlowLayer::Slow(_) => Vec::new(),
            })
            .collect()
    }

    /// Layer index owning each entry of [`FlowStack::params`].
    pub fn param_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| match l {
                FlowLayer::Coupling(c) => vec![i; c.params().len()],
                FlowLayer::Slow(_) => Vec::new(),
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
