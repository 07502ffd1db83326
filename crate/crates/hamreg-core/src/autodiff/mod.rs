//! Differentiation engine: exact first-order gradients with respect to
//! inputs and parameters, and mixed second-order derivatives
//! (parameter-gradients of expressions built from input-gradients).
//!
//! Strategy: forward-mode tangents propagated through a reverse-mode pass
//! (forward-over-reverse). See [`scalar`] for the tangent types and
//! [`backprop`] for the reverse pass.

pub mod backprop;
pub mod scalar;

pub use backprop::{mlp_input_gradient, mlp_pullback_accum, GradBuf, LayerGrad, Pullback};
pub use scalar::{Dual, HyperDual, Scalar};

use crate::error::{CoreError, Result};
use crate::nn::MlpParams;
use alloc::vec;
use alloc::vec::Vec;

/// A scalar function of a vector, expressed over the closed primitive set so
/// it can be evaluated with any [`Scalar`] type.
pub trait ScalarFn {
    fn eval<S: Scalar>(&self, x: &[S]) -> S;
}

/// A scalar function of a flattened parameter vector.
pub trait ParamFn {
    fn eval<S: Scalar>(&self, theta: &[S]) -> S;
}

/// A smooth scalar function of a scalar network's input-gradient (and of the
/// network value itself).
pub trait GradFn {
    fn eval<S: Scalar>(&self, input_grad: &[S], value: S) -> S;
}

/// Exact gradient of `f` at `x` (forward mode, one tangent per coordinate).
pub fn grad_input<F: ScalarFn>(f: &F, x: &[f64]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; x.len()];
    let mut lifted: Vec<Dual> = x.iter().map(|&v| Dual::from_f64(v)).collect();
    for i in 0..x.len() {
        lifted[i].t = 1.0;
        let y = f.eval(&lifted);
        lifted[i].t = 0.0;
        if !y.is_finite() {
            return Err(CoreError::NonFinite {
                context: "grad_input evaluation",
            });
        }
        grad[i] = y.t;
    }
    Ok(grad)
}

/// Exact gradient of `f` with respect to the parameters, returned with the
/// same shape and layout as `theta`. Parameters the function never touches
/// get exact zeros.
pub fn grad_params<F: ParamFn>(f: &F, theta: &MlpParams) -> Result<GradBuf<f64>> {
    let flat = theta.flatten();
    let mut lifted: Vec<Dual> = flat.iter().map(|&v| Dual::from_f64(v)).collect();
    let mut grad_flat = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        lifted[i].t = 1.0;
        let y = f.eval(&lifted);
        lifted[i].t = 0.0;
        if !y.is_finite() {
            return Err(CoreError::NonFinite {
                context: "grad_params evaluation",
            });
        }
        grad_flat[i] = y.t;
    }
    unflatten(theta, &grad_flat)
}

fn unflatten(theta: &MlpParams, flat: &[f64]) -> Result<GradBuf<f64>> {
    let mut buf = GradBuf::zeros_like(theta);
    let mut off = 0;
    for (g, l) in buf.layers.iter_mut().zip(&theta.layers) {
        g.w.copy_from_slice(&flat[off..off + l.w.len()]);
        off += l.w.len();
        g.b.copy_from_slice(&flat[off..off + l.b.len()]);
        off += l.b.len();
    }
    Ok(buf)
}

/// Mixed second-order derivative: `d g / d theta` where `g` is a scalar
/// function of the network's input-gradient `dH/dz` (and of `H(z)` itself).
///
/// Forward-over-reverse: one plain reverse pass recovers the input gradient
/// `u`, the local sensitivities `w = dg/du` and `c = dg/dH` come from
/// forward-mode over `g`, and a single reverse pass in [`Dual`] arithmetic
/// with input tangents `w` and output-adjoint seed `(1, c)` yields the full
/// parameter gradient in its tangent parts.
pub fn mixed_grad<G: GradFn>(g: &G, theta: &MlpParams, z: &[f64]) -> Result<GradBuf<f64>> {
    if theta.output_dim() != 1 {
        return Err(CoreError::ShapeMismatch {
            context: "scalar network output",
            expected: 1,
            got: theta.output_dim(),
        });
    }
    let base = backprop::mlp_input_pullback::<f64>(theta, z, &[1.0])?;
    let u = base.input_grad;
    let h = base.output[0];

    // Sensitivities of g with respect to (u, H), via forward mode.
    let mut ud: Vec<Dual> = u.iter().map(|&v| Dual::from_f64(v)).collect();
    let mut hd = Dual::from_f64(h);
    let mut w = vec![0.0; u.len()];
    for i in 0..u.len() {
        ud[i].t = 1.0;
        let y = g.eval(&ud, hd);
        ud[i].t = 0.0;
        if !y.is_finite() {
            return Err(CoreError::NonFinite {
                context: "mixed_grad sensitivity",
            });
        }
        w[i] = y.t;
    }
    hd.t = 1.0;
    let c = g.eval(&ud, hd).t;

    // Dual reverse pass: tangent parts carry d/dtheta (w . u + c H).
    let zd: Vec<Dual> = z
        .iter()
        .zip(&w)
        .map(|(&v, &t)| Dual::new(v, t))
        .collect();
    let mut dual_grads = GradBuf::<Dual>::zeros_like(theta);
    mlp_pullback_accum(theta, &zd, &[Dual::new(1.0, c)], &mut dual_grads)?;
    let mut out = GradBuf::zeros_like(theta);
    out.axpy_tangent(1.0, &dual_grads);
    Ok(out)
}
