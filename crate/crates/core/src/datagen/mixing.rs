//! Frozen random flows used as nonlinear mixing functions.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ad::{Init, Matrix, Mlp, Series};
use crate::error::{Error, Result};
use crate::flows::{alternating_mask, AffineCoupling, FlowLayer, FlowStack, DEFAULT_SCALE_CLAMP};
use crate::ica::linalg::{sym_eigen, sym_fn};
use crate::scalar::Real;

pub const MAX_TRIES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingConfig {
    pub hidden: Vec<usize>,
    /// Std of every scale-net parameter.
    pub scale_std: f64,
    /// Std of every shift-net parameter.
    pub shift_std: f64,
    /// Reject draws whose best affine fit explains more than `1 - min_residual`
    /// of the observed variance.
    pub min_residual: f64,
    pub probes: usize,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16],
            scale_std: 0.15,
            shift_std: 0.6,
            min_residual: 0.05,
            probes: 2048,
        }
    }
}

/// Measured on standard-normal probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub min_logdet: f64,
    pub max_logdet: f64,
    /// Unexplained variance fraction of the best affine fit of outputs on inputs.
    pub residual_fraction: f64,
    pub tries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixingModel<T> {
    pub stack: FlowStack<T>,
    pub seed: u64,
    pub report: ConditioningReport,
}

impl<T: Real> MixingModel<T> {
    pub fn mix(&self, sources: &Series<T>) -> Result<Series<T>> {
        self.stack.decode(sources)
    }

    pub fn unmix(&self, observed: &Series<T>) -> Result<Series<T>> {
        self.stack.encode(observed)
    }

    pub fn dim(&self) -> usize {
        self.stack.dim()
    }
}

/// Fraction of `y`'s total variance left by the least-squares fit on `[x, 1]`.
pub fn affine_residual_fraction<T: Real>(x: &Series<T>, y: &Series<T>) -> Result<f64> {
    if x.rows() != y.rows() {
        return Err(Error::Shape {
            op: "affine_residual_fraction",
            lhs: x.shape(),
            rhs: y.shape(),
        });
    }
    let (n, k) = (x.rows(), x.cols() + 1);
    let design = Matrix::from_fn(n, k, |i, j| if j < x.cols() { x.get(i, j).as_f64() } else { 1.0 });
    let y64: Matrix<f64> = y.cast();
    let gram = design.matmul_tn(&design)?;
    let e = sym_eigen(&gram)?;
    let floor = e.values.last().copied().unwrap_or(0.0) * 1e-12;
    let pinv = sym_fn(&e, |v| if v > floor { 1.0 / v } else { 0.0 });
    let coef = pinv.matmul(&design.matmul_tn(&y64)?)?;
    let resid = y64.sub(&design.matmul(&coef)?)?;
    let mean = y64.col_means();
    let total: f64 = (0..n)
        .flat_map(|i| (0..y.cols()).map(move |j| (i, j)))
        .map(|(i, j)| (y64.get(i, j) - mean[j]).powi(2))
        .sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(resid.as_slice().iter().map(|v| v * v).sum::<f64>() / total)
}

fn draw_stack<T: Real>(d: usize, depth: usize, cfg: &MixingConfig, rng: &mut ChaCha8Rng) -> Result<FlowStack<T>> {
    let init = |std: f64| if std == 0.0 { Init::Zeros } else { Init::Normal(std) };
    let mut stack = FlowStack::identity(d);
    for i in 0..depth {
        let mask = alternating_mask(d, i);
        let k = mask.iter().filter(|&&m| m).count();
        let sizes: Vec<usize> = std::iter::once(k)
            .chain(cfg.hidden.iter().copied())
            .chain(std::iter::once(d - k))
            .collect();
        let scale = Mlp::new(&sizes, init(cfg.scale_std), rng)?;
        let shift = Mlp::new(&sizes, init(cfg.shift_std), rng)?;
        stack.push(FlowLayer::Coupling(AffineCoupling::new(
            mask,
            scale,
            shift,
            T::lit(DEFAULT_SCALE_CLAMP),
        )?))?;
    }
    Ok(stack)
}

pub fn make_mixing<T: Real>(d: usize, depth: usize, seed: u64) -> Result<MixingModel<T>> {
    make_mixing_with(d, depth, seed, &MixingConfig::default())
}

/// Draws coupling stacks until one has per-sample `log|det|` within `[-d, d]`
/// and is nonlinear enough; gives up after [`MAX_TRIES`] draws.
pub fn make_mixing_with<T: Real>(d: usize, depth: usize, seed: u64, cfg: &MixingConfig) -> Result<MixingModel<T>> {
    if depth < 2 {
        return Err(Error::contract(format!("mixing depth must be >= 2, got {depth}")));
    }
    if d < 2 {
        return Err(Error::contract("mixing needs d >= 2"));
    }
    if cfg.probes <= d + 1 {
        return Err(Error::contract("mixing needs more probes than dimensions"));
    }
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let probes: Series<T> = Matrix::from_fn(cfg.probes, d, |_, _| {
        let v: f64 = StandardNormal.sample(&mut probe_rng);
        T::lit(v)
    });
    let bound = d as f64;
    for attempt in 0..MAX_TRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let stack = draw_stack::<T>(d, depth, cfg, &mut rng)?;
        let (out, logdet) = match stack.decode_with_logdet(&probes) {
            Ok(r) => r,
            Err(Error::NonFinite { .. }) => continue,
            Err(e) => return Err(e),
        };
        let lo = logdet.iter().map(|v| v.as_f64()).fold(f64::INFINITY, f64::min);
        let hi = logdet.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let residual = affine_residual_fraction(&probes, &out)?;
        debug!("mixing try {attempt}: logdet [{lo:.3}, {hi:.3}], residual {residual:.3}");
        if lo >= -bound && hi <= bound && residual >= cfg.min_residual {
            return Ok(MixingModel {
                stack,
                seed,
                report: ConditioningReport {
                    min_logdet: lo,
                    max_logdet: hi,
                    residual_fraction: residual,
                    tries: attempt + 1,
                },
            });
        }
    }
    Err(Error::Conditioning { tries: MAX_TRIES })
}
