//! Reverse-mode differentiation of the MLP, generic over [`Scalar`].
//!
//! The same reverse pass serves three roles:
//!
//! * `S = f64` — values, input gradients and parameter gradients,
//! * `S = Dual` with tangents seeded on the inputs — forward-over-reverse:
//!   the tangent parts of the parameter adjoints are mixed second-order
//!   derivatives d/dphi of directional input-derivatives,
//! * `S = HyperDual` — one order higher, for the Euler-Lagrange loss.
//!
//! Weights stay plain `f64` (parameter tangents are never needed); only
//! activations and adjoints carry tangents.

use crate::autodiff::scalar::{Dual, Scalar};
use crate::error::{CoreError, Result};
use crate::nn::MlpParams;
use alloc::vec;
use alloc::vec::Vec;

/// Per-layer gradient (or moment) storage shaped like [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
}

/// Gradient with identical shape and layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuf<S> {
    pub layers: Vec<LayerGrad<S>>,
}

impl<S: Scalar> GradBuf<S> {
    pub fn zeros_like(params: &MlpParams) -> Self {
        GradBuf {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    w: vec![S::ZERO; l.w.len()],
                    b: vec![S::ZERO; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|x| *x = S::ZERO);
            l.b.iter_mut().for_each(|x| *x = S::ZERO);
        }
    }

    /// In-place multiply by a constant.
    pub fn scale_assign(&mut self, k: f64) {
        for l in &mut self.layers {
            l.w.iter_mut().for_each(|x| *x = x.scale(k));
            l.b.iter_mut().for_each(|x| *x = x.scale(k));
        }
    }

    /// Flat view in the same order as `MlpParams::flatten`.
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }
}

impl GradBuf<f64> {
    /// `self += k * other`.
    pub fn axpy(&mut self, k: f64, other: &GradBuf<f64>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += k * y;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += k * y;
            }
        }
    }

    /// Accumulate the mixed second-order parts of a hyper-dual gradient:
    /// `self += k * t12(other)`.
    pub fn axpy_t12(&mut self, k: f64, other: &GradBuf<crate::autodiff::scalar::HyperDual>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += k * y.t12;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += k * y.t12;
            }
        }
    }

    /// Accumulate the tangent parts of a dual gradient: `self += k * tan(other)`.
    pub fn axpy_tangent(&mut self, k: f64, other: &GradBuf<Dual>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.w.iter_mut().zip(&b.w) {
                *x += k * y.t;
            }
            for (x, y) in a.b.iter_mut().zip(&b.b) {
                *x += k * y.t;
            }
        }
    }
}

/// Forward pass in `S` arithmetic (weights lifted as constants).
pub fn mlp_eval<S: Scalar>(params: &MlpParams, x: &[S]) -> Result<Vec<S>> {
    if x.len() != params.input_dim() {
        return Err(CoreError::ShapeMismatch {
            context: "mlp input",
            expected: params.input_dim(),
            got: x.len(),
        });
    }
    let n_layers = params.layers.len();
    let mut act: Vec<S> = x.to_vec();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut next = vec![S::ZERO; layer.rows];
        for i in 0..layer.rows {
            let row = &layer.w[i * layer.cols..(i + 1) * layer.cols];
            let mut acc = S::from_f64(layer.b[i]);
            for (a, &w) in act.iter().zip(row) {
                acc = acc + a.scale(w);
            }
            next[i] = if k + 1 < n_layers { acc.softplus() } else { acc };
        }
        act = next;
    }
    if act.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            context: "mlp forward",
        });
    }
    Ok(act)
}

/// Everything the reverse sweep produces.
pub struct Pullback<S> {
    pub output: Vec<S>,
    pub input_grad: Vec<S>,
}

fn forward_cached<S: Scalar>(
    params: &MlpParams,
    x: &[S],
) -> Result<(Vec<Vec<S>>, Vec<Vec<S>>, Vec<S>)> {
    if x.len() != params.input_dim() {
        return Err(CoreError::ShapeMismatch {
            context: "mlp input",
            expected: params.input_dim(),
            got: x.len(),
        });
    }
    let n_layers = params.layers.len();
    // acts[k] is the input of layer k; sigs[k] the softplus derivative at the
    // hidden pre-activations of layer k (empty for the output layer).
    let mut acts: Vec<Vec<S>> = Vec::with_capacity(n_layers);
    let mut sigs: Vec<Vec<S>> = Vec::with_capacity(n_layers);
    let mut act: Vec<S> = x.to_vec();
    let mut output = Vec::new();
    for (k, layer) in params.layers.iter().enumerate() {
        let mut pre = vec![S::ZERO; layer.rows];
        for i in 0..layer.rows {
            let row = &layer.w[i * layer.cols..(i + 1) * layer.cols];
            let mut acc = S::from_f64(layer.b[i]);
            for (a, &w) in act.iter().zip(row) {
                acc = acc + a.scale(w);
            }
            pre[i] = acc;
        }
        acts.push(act);
        if k + 1 < n_layers {
            sigs.push(pre.iter().map(|p| p.sigmoid()).collect());
            act = pre.iter().map(|p| p.softplus()).collect();
        } else {
            sigs.push(Vec::new());
            output = pre;
            act = Vec::new();
        }
    }
    if output.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            context: "mlp forward",
        });
    }
    Ok((acts, sigs, output))
}

/// Reverse sweep seeded with `out_adjoint`, accumulating parameter gradients
/// into `grads` (`+=`). Returns the output and the input gradient.
pub fn mlp_pullback_accum<S: Scalar>(
    params: &MlpParams,
    x: &[S],
    out_adjoint: &[S],
    grads: &mut GradBuf<S>,
) -> Result<Pullback<S>> {
    let (acts, sigs, output) = forward_cached(params, x)?;
    if out_adjoint.len() != output.len() {
        return Err(CoreError::ShapeMismatch {
            context: "output adjoint",
            expected: output.len(),
            got: out_adjoint.len(),
        });
    }
    let mut delta: Vec<S> = out_adjoint.to_vec();
    for k in (0..params.layers.len()).rev() {
        let layer = &params.layers[k];
        let g = &mut grads.layers[k];
        let a = &acts[k];
        for i in 0..layer.rows {
            let di = delta[i];
            g.b[i] = g.b[i] + di;
            let grow = &mut g.w[i * layer.cols..(i + 1) * layer.cols];
            for (gw, aj) in grow.iter_mut().zip(a.iter()) {
                *gw = *gw + di * *aj;
            }
        }
        // Propagate to this layer's inputs; multiply by the softplus
        // derivative when the inputs are a hidden activation.
        let mut prev = vec![S::ZERO; layer.cols];
        for i in 0..layer.rows {
            let di = delta[i];
            let row = &layer.w[i * layer.cols..(i + 1) * layer.cols];
            for (pj, &w) in prev.iter_mut().zip(row) {
                *pj = *pj + di.scale(w);
            }
        }
        if k > 0 {
            for (pj, s) in prev.iter_mut().zip(sigs[k - 1].iter()) {
                *pj = *pj * *s;
            }
        }
        delta = prev;
    }
    Ok(Pullback {
        output,
        input_grad: delta,
    })
}

/// Reverse sweep without parameter gradients (cheaper; used by vector-field
/// evaluation during rollouts).
pub fn mlp_input_pullback<S: Scalar>(
    params: &MlpParams,
    x: &[S],
    out_adjoint: &[S],
) -> Result<Pullback<S>> {
    let (acts, sigs, output) = forward_cached(params, x)?;
    let _ = acts;
    if out_adjoint.len() != output.len() {
        return Err(CoreError::ShapeMismatch {
            context: "output adjoint",
            expected: output.len(),
            got: out_adjoint.len(),
        });
    }
    let mut delta: Vec<S> = out_adjoint.to_vec();
    for k in (0..params.layers.len()).rev() {
        let layer = &params.layers[k];
        let mut prev = vec![S::ZERO; layer.cols];
        for i in 0..layer.rows {
            let di = delta[i];
            let row = &layer.w[i * layer.cols..(i + 1) * layer.cols];
            for (pj, &w) in prev.iter_mut().zip(row) {
                *pj = *pj + di.scale(w);
            }
        }
        if k > 0 {
            for (pj, s) in prev.iter_mut().zip(sigs[k - 1].iter()) {
                *pj = *pj * *s;
            }
        }
        delta = prev;
    }
    Ok(Pullback {
        output,
        input_grad: delta,
    })
}

/// Gradient of a scalar-output network with respect to its input.
pub fn mlp_input_gradient(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    if params.output_dim() != 1 {
        return Err(CoreError::ShapeMismatch {
            context: "scalar network output",
            expected: 1,
            got: params.output_dim(),
        });
    }
    Ok(mlp_input_pullback::<f64>(params, x, &[1.0])?.input_grad)
}
