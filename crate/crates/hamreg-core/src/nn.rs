//! MLP parametrization of the learned Hamiltonian/Lagrangian/vector field,
//! plus the Adam optimizer with a piecewise-constant learning-rate schedule.
//!
//! Architecture: affine layers with softplus on hidden layers and identity
//! on the output layer. All arithmetic is f64.

use crate::autodiff::backprop::{mlp_eval, GradBuf};
use crate::error::{CoreError, Result};
use crate::math;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_core::{RngCore, SeedableRng};

/// One affine layer, `rows x cols` weight matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Weights and biases of the network. Hidden activations are softplus, the
/// output layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.rows));
        sizes
    }

    /// Total parameter count: sum over layers of `in*out + out`.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Consecutive layer dimensions must chain.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(CoreError::Config("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.w.len() != l.rows * l.cols || l.b.len() != l.rows {
                return Err(CoreError::ShapeMismatch {
                    context: "layer storage",
                    expected: l.rows * l.cols,
                    got: l.w.len(),
                });
            }
            if i > 0 && self.layers[i - 1].rows != l.cols {
                return Err(CoreError::ShapeMismatch {
                    context: "layer chaining",
                    expected: self.layers[i - 1].rows,
                    got: l.cols,
                });
            }
        }
        Ok(())
    }

    /// All parameters as one flat vector (layer order, weights then bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    /// Rebuild parameters with the same shapes from a flat vector.
    pub fn from_flat(&self, flat: &[f64]) -> Result<MlpParams> {
        if flat.len() != self.param_count() {
            return Err(CoreError::ShapeMismatch {
                context: "flat parameter vector",
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            let w = flat[off..off + l.w.len()].to_vec();
            off += l.w.len();
            let b = flat[off..off + l.b.len()].to_vec();
            off += l.b.len();
            layers.push(Layer {
                rows: l.rows,
                cols: l.cols,
                w,
                b,
            });
        }
        Ok(MlpParams { layers })
    }
}

/// Draw a uniform f64 in [0, 1) from 53 random bits.
#[inline]
fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [-bound, bound].
#[inline]
pub(crate) fn uniform_symmetric(rng: &mut impl RngCore, bound: f64) -> f64 {
    (2.0 * uniform01(rng) - 1.0) * bound
}

/// Glorot-uniform weights (bound `sqrt(6 / (in + out))`), zero biases,
/// deterministic in the seed.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<MlpParams> {
    if layer_sizes.len() < 2 {
        return Err(CoreError::Config(format!(
            "need at least 2 layer sizes, got {}",
            layer_sizes.len()
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(CoreError::Config("layer sizes must be positive".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
    for win in layer_sizes.windows(2) {
        let (nin, nout) = (win[0], win[1]);
        let bound = math::sqrt(6.0 / (nin + nout) as f64);
        let w = (0..nin * nout)
            .map(|_| uniform_symmetric(&mut rng, bound))
            .collect();
        layers.push(Layer {
            rows: nout,
            cols: nin,
            w,
            b: vec![0.0; nout],
        });
    }
    Ok(MlpParams { layers })
}

/// Plain forward pass.
pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    mlp_eval::<f64>(params, input)
}

/// Piecewise-constant learning-rate schedule. Rate `rates[i]` applies to
/// epochs in `[boundaries[i-1], boundaries[i])` (half-open).
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub rates: Vec<f64>,
    pub boundaries: Vec<usize>,
}

impl LrSchedule {
    /// 1e-2 until 50k epochs, 1e-3 until 100k, then 1e-4.
    pub fn full_scale() -> Self {
        LrSchedule {
            rates: vec![1e-2, 1e-3, 1e-4],
            boundaries: vec![50_000, 100_000],
        }
    }

    /// Same shape scaled to 30k-epoch desk runs: boundaries at 10k and 20k.
    pub fn desk_scale() -> Self {
        LrSchedule {
            rates: vec![1e-2, 1e-3, 1e-4],
            boundaries: vec![10_000, 20_000],
        }
    }

    pub fn constant(rate: f64) -> Self {
        LrSchedule {
            rates: vec![rate],
            boundaries: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() || self.boundaries.len() + 1 != self.rates.len() {
            return Err(CoreError::Config(
                "schedule needs exactly one more rate than boundaries".into(),
            ));
        }
        if self.rates.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CoreError::Config("rates must be strictly decreasing".into()));
        }
        if self.boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Config(
                "boundaries must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn rate_at(&self, epoch: usize) -> f64 {
        let idx = self
            .boundaries
            .iter()
            .position(|&b| epoch < b)
            .unwrap_or(self.boundaries.len());
        self.rates[idx]
    }
}

/// Adam moment accumulators shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: GradBuf<f64>,
    pub v: GradBuf<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Reference defaults: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(params: &MlpParams) -> Self {
        AdamState {
            m: GradBuf::zeros_like(params),
            v: GradBuf::zeros_like(params),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update; the learning rate comes from the schedule
/// at `epoch`. Errors out on non-finite gradients, naming the layer.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &GradBuf<f64>,
    state: &mut AdamState,
    schedule: &LrSchedule,
    epoch: usize,
) -> Result<()> {
    debug_assert!(epoch as u64 >= state.step);
    for (li, g) in grads.layers.iter().enumerate() {
        if g.w.iter().chain(g.b.iter()).any(|x| !x.is_finite()) {
            return Err(CoreError::NonFiniteGrad { layer: li });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let lr = schedule.rate_at(epoch);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let bc1 = 1.0 - powi(b1, t);
    let bc2 = 1.0 - powi(b2, t);
    for (li, layer) in params.layers.iter_mut().enumerate() {
        let g = &grads.layers[li];
        let m = &mut state.m.layers[li];
        let v = &mut state.v.layers[li];
        for (p, (gi, (mi, vi))) in layer
            .w
            .iter_mut()
            .chain(layer.b.iter_mut())
            .zip(g.w.iter().chain(g.b.iter()).zip(
                m.w.iter_mut()
                    .chain(m.b.iter_mut())
                    .zip(v.w.iter_mut().chain(v.b.iter_mut())),
            ))
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let mhat = *mi / bc1;
            let vhat = *vi / bc2;
            *p -= lr * mhat / (math::sqrt(vhat) + eps);
        }
    }
    Ok(())
}

#[inline]
fn powi(base: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    let mut e = n as u32;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_determinism() {
        let p = init_params(&[2, 32, 32, 1], 0).unwrap();
        assert_eq!(p.layers.len(), 3);
        assert_eq!((p.layers[0].rows, p.layers[0].cols), (32, 2));
        assert_eq!((p.layers[1].rows, p.layers[1].cols), (32, 32));
        assert_eq!((p.layers[2].rows, p.layers[2].cols), (1, 32));
        assert!(p.layers.iter().all(|l| l.b.iter().all(|&b| b == 0.0)));
        let q = init_params(&[2, 32, 32, 1], 0).unwrap();
        assert_eq!(p, q);
        let r = init_params(&[2, 32, 32, 1], 1).unwrap();
        assert_ne!(p, r);
    }

    #[test]
    fn param_count_formula() {
        let p = init_params(&[4, 128, 128, 1], 7).unwrap();
        let expect = 4 * 128 + 128 + 128 * 128 + 128 + 128 + 1;
        assert_eq!(p.param_count(), expect);
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(matches!(init_params(&[2], 0), Err(CoreError::Config(_))));
        assert!(matches!(init_params(&[2, 0, 1], 0), Err(CoreError::Config(_))));
    }

    #[test]
    fn glorot_bound_respected() {
        let p = init_params(&[2, 32, 32, 1], 3).unwrap();
        for l in &p.layers {
            let bound = math::sqrt(6.0 / (l.rows + l.cols) as f64);
            assert!(l.w.iter().all(|w| w.abs() <= bound));
        }
    }

    #[test]
    fn forward_zero_network_is_zero() {
        let mut p = init_params(&[2, 32, 32, 1], 0).unwrap();
        for l in &mut p.layers {
            l.w.iter_mut().for_each(|w| *w = 0.0);
        }
        let y = mlp_forward(&p, &[0.3, -1.2]).unwrap();
        assert_eq!(y, vec![0.0]);
    }

    #[test]
    fn single_affine_layer_is_identity_map() {
        let p = MlpParams {
            layers: vec![Layer {
                rows: 2,
                cols: 2,
                w: vec![1.0, 0.0, 0.0, 1.0],
                b: vec![0.0, 0.0],
            }],
        };
        assert_eq!(mlp_forward(&p, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn hidden_zero_preactivation_gives_ln2() {
        // One hidden unit with zero weights: softplus(0) = ln 2 feeds the
        // output layer with unit weight.
        let p = MlpParams {
            layers: vec![
                Layer {
                    rows: 1,
                    cols: 1,
                    w: vec![0.0],
                    b: vec![0.0],
                },
                Layer {
                    rows: 1,
                    cols: 1,
                    w: vec![1.0],
                    b: vec![0.0],
                },
            ],
        };
        let y = mlp_forward(&p, &[5.0]).unwrap();
        assert!((y[0] - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn schedule_boundaries_are_half_open() {
        let s = LrSchedule::full_scale();
        s.validate().unwrap();
        assert_eq!(s.rate_at(0), 1e-2);
        assert_eq!(s.rate_at(49_999), 1e-2);
        assert_eq!(s.rate_at(50_000), 1e-3);
        assert_eq!(s.rate_at(100_000), 1e-4);
        assert_eq!(s.rate_at(149_999), 1e-4);
    }

    #[test]
    fn adam_first_step_closed_form() {
        // Scalar parameter, gradient 0.5, lr 1e-2: first update is about
        // -lr * sign(g) after bias correction.
        let mut p = MlpParams {
            layers: vec![Layer {
                rows: 1,
                cols: 1,
                w: vec![1.0],
                b: vec![0.0],
            }],
        };
        let mut g = GradBuf::zeros_like(&p);
        g.layers[0].w[0] = 0.5;
        let mut st = AdamState::new(&p);
        let sched = LrSchedule::constant(1e-2);
        adam_step(&mut p, &g, &mut st, &sched, 0).unwrap();
        let update = p.layers[0].w[0] - 1.0;
        assert!((update + 1e-2).abs() < 1e-6, "update {update}");
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut p = init_params(&[2, 4, 1], 0).unwrap();
        let before = p.clone();
        let g = GradBuf::zeros_like(&p);
        let mut st = AdamState::new(&p);
        // Warm the moments so the decay branch is exercised too.
        adam_step(&mut p, &g, &mut st, &LrSchedule::constant(1e-2), 0).unwrap();
        adam_step(&mut p, &g, &mut st, &LrSchedule::constant(1e-2), 1).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut p = init_params(&[2, 4, 1], 0).unwrap();
        let mut g = GradBuf::zeros_like(&p);
        g.layers[1].w[0] = f64::NAN;
        let mut st = AdamState::new(&p);
        let err = adam_step(&mut p, &g, &mut st, &LrSchedule::constant(1e-2), 0).unwrap_err();
        assert_eq!(err, CoreError::NonFiniteGrad { layer: 1 });
    }

    #[test]
    fn flatten_round_trip() {
        let p = init_params(&[3, 5, 2], 11).unwrap();
        let q = p.from_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
    }
}
