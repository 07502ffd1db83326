//! Reference (per-sample) loss and gradient implementations.
//!
//! These trade speed for clarity: every sample gets its own reverse pass.
//! The batched kernel in `training::batch` must agree with these to near
//! machine precision, and both must agree with finite differences; the
//! tests enforce it.

use crate::autodiff::backprop::{mlp_pullback_accum, GradBuf};
use crate::autodiff::scalar::{Dual, HyperDual};
use crate::error::{CoreError, Result};
use crate::linalg;
use crate::models::{chnn_flow_matrix, ModelFamily, ModelSpec};
use crate::nn::MlpParams;
use crate::physics::{self, SystemParams};
use crate::training::Dataset;
use alloc::vec;
use alloc::vec::Vec;

/// Per-sample pieces of the Hamiltonian losses: the squared flow residual,
/// its gradient with respect to the network's input gradient, and the
/// predicted energy.
fn hnn_sample_terms(
    spec: &ModelSpec,
    z: &[f64],
    zdot: &[f64],
    sys: &SystemParams,
) -> Result<(f64, Vec<f64>, f64)> {
    let pb = crate::autodiff::backprop::mlp_input_pullback::<f64>(&spec.params, z, &[1.0])?;
    let u = pb.input_grad;
    let h = pb.output[0];
    match spec.family {
        ModelFamily::Hnn => {
            // Residuals of qdot = dH/dp and pdot = -dH/dq.
            let d = spec.system.dof();
            let mut loss = 0.0;
            let mut w = vec![0.0; 2 * d];
            for i in 0..d {
                let rq = u[i] + zdot[d + i];
                let rp = u[d + i] - zdot[i];
                loss += rq * rq + rp * rp;
                w[i] = 2.0 * rq;
                w[d + i] = 2.0 * rp;
            }
            Ok((loss, w, h))
        }
        ModelFamily::Chnn => {
            // Residual of the constrained flow A(z) grad H against the
            // observed Cartesian time derivative.
            let n = spec.system.cart_dim();
            let dim = 2 * n;
            let a = chnn_flow_matrix(spec.system, &z[..n], &z[n..], sys)?;
            let au = linalg::matvec(&a, &u, dim, dim);
            let mut loss = 0.0;
            let mut r = vec![0.0; dim];
            for i in 0..dim {
                r[i] = au[i] - zdot[i];
                loss += r[i] * r[i];
            }
            // w = 2 A^T r.
            let mut w = vec![0.0; dim];
            for i in 0..dim {
                for j in 0..dim {
                    w[j] += 2.0 * a[i * dim + j] * r[i];
                }
            }
            Ok((loss, w, h))
        }
        _ => Err(CoreError::UnsupportedFamily {
            op: "hamiltonian loss",
            family: spec.family.name(),
        }),
    }
}

/// Mean squared flow residual of a (constrained) Hamiltonian model.
pub fn hnn_loss(spec: &ModelSpec, dataset: &Dataset, sys: &SystemParams) -> Result<f64> {
    let mut acc = 0.0;
    for s in &dataset.samples {
        acc += hnn_sample_terms(spec, &s.z, &s.zdot, sys)?.0;
    }
    Ok(acc / dataset.samples.len() as f64)
}

/// Flow loss plus the energy-level penalty, `lambda` weighted inside the
/// per-sample mean. `lambda = 0` is exactly the plain flow loss.
pub fn regularized_loss(
    spec: &ModelSpec,
    dataset: &Dataset,
    lambda: f64,
    sys: &SystemParams,
) -> Result<f64> {
    let mut acc = 0.0;
    for s in &dataset.samples {
        let (l, _, h) = hnn_sample_terms(spec, &s.z, &s.zdot, sys)?;
        acc += l;
        if lambda > 0.0 {
            let e = h - s.h_hat;
            acc += lambda * e * e;
        }
    }
    Ok(acc / dataset.samples.len() as f64)
}

/// Mean squared discrepancy between Euler-Lagrange accelerations of the
/// learned Lagrangian and the true accelerations.
pub fn lnn_loss(spec: &ModelSpec, dataset: &Dataset, sys: &SystemParams) -> Result<f64> {
    let d = dataset.system.dof();
    let mut acc = 0.0;
    for s in &dataset.samples {
        let q = &s.z[..d];
        let qdot = &s.zdot[..d];
        let target = physics::qddot_from_pdot(dataset.system, q, qdot, &s.zdot[d..], sys);
        let a = crate::models::lnn_acceleration(&spec.params, q, qdot)?;
        acc += a
            .iter()
            .zip(&target)
            .map(|(ai, ti)| (ai - ti) * (ai - ti))
            .sum::<f64>();
    }
    Ok(acc / dataset.samples.len() as f64)
}

/// Mean squared error of the direct state-derivative regression.
pub fn baseline_loss(spec: &ModelSpec, dataset: &Dataset) -> Result<f64> {
    let mut acc = 0.0;
    for s in &dataset.samples {
        let out = crate::autodiff::backprop::mlp_eval::<f64>(&spec.params, &s.z)?;
        acc += out
            .iter()
            .zip(&s.zdot)
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>();
    }
    Ok(acc / dataset.samples.len() as f64)
}

/// Family dispatch for the training objective.
pub fn loss(
    spec: &ModelSpec,
    dataset: &Dataset,
    lambda: f64,
    sys: &SystemParams,
) -> Result<f64> {
    match spec.family {
        ModelFamily::Baseline => baseline_loss(spec, dataset),
        ModelFamily::Hnn | ModelFamily::Chnn => regularized_loss(spec, dataset, lambda, sys),
        ModelFamily::Lnn => lnn_loss(spec, dataset, sys),
    }
}

/// Per-sample loss-and-gradient of all families; the slow oracle the batch
/// kernel is checked against.
pub fn loss_and_grad_reference(
    spec: &ModelSpec,
    dataset: &Dataset,
    lambda: f64,
    sys: &SystemParams,
    grads: &mut GradBuf<f64>,
) -> Result<f64> {
    let n = dataset.samples.len() as f64;
    match spec.family {
        ModelFamily::Baseline => {
            let mut acc = 0.0;
            for s in &dataset.samples {
                let out = crate::autodiff::backprop::mlp_eval::<f64>(&spec.params, &s.z)?;
                let adjoint: Vec<f64> = out
                    .iter()
                    .zip(&s.zdot)
                    .map(|(o, t)| 2.0 * (o - t) / n)
                    .collect();
                acc += out
                    .iter()
                    .zip(&s.zdot)
                    .map(|(o, t)| (o - t) * (o - t))
                    .sum::<f64>();
                mlp_pullback_accum::<f64>(&spec.params, &s.z, &adjoint, grads)?;
            }
            Ok(acc / n)
        }
        ModelFamily::Hnn | ModelFamily::Chnn => {
            let mut acc = 0.0;
            let mut scratch = GradBuf::<Dual>::zeros_like(&spec.params);
            for s in &dataset.samples {
                let (l, w, h) = hnn_sample_terms(spec, &s.z, &s.zdot, sys)?;
                acc += l;
                let mut c = 0.0;
                if lambda > 0.0 {
                    let e = h - s.h_hat;
                    acc += lambda * e * e;
                    c = 2.0 * lambda * e;
                }
                // Forward-over-reverse: tangents carry the direction w, the
                // adjoint seed carries the energy-penalty weight. Tangent
                // parts of the parameter adjoints are then
                // grad_phi(w . grad_z H) + c grad_phi H.
                let x: Vec<Dual> = s.z.iter().zip(&w).map(|(&v, &t)| Dual::new(v, t)).collect();
                scratch.fill_zero();
                mlp_pullback_accum::<Dual>(&spec.params, &x, &[Dual::new(1.0, c)], &mut scratch)?;
                grads.axpy_tangent(1.0 / n, &scratch);
            }
            Ok(acc / n)
        }
        ModelFamily::Lnn => lnn_loss_and_grad(&spec.params, dataset, sys, grads),
    }
}

/// Loss and gradient of the Euler-Lagrange objective. The gradient needs
/// third-order derivatives of the network (second-order in the loss, once
/// more for the parameters); hyper-dual reverse passes supply them.
pub fn lnn_loss_and_grad(
    params: &MlpParams,
    dataset: &Dataset,
    sys: &SystemParams,
    grads: &mut GradBuf<f64>,
) -> Result<f64> {
    let d = dataset.system.dof();
    let n = dataset.samples.len() as f64;
    let mut acc = 0.0;
    let mut dual_scratch = GradBuf::<Dual>::zeros_like(params);
    let mut hyper_scratch = GradBuf::<HyperDual>::zeros_like(params);
    for s in &dataset.samples {
        let q = &s.z[..d];
        let qdot = &s.zdot[..d];
        let target = physics::qddot_from_pdot(dataset.system, q, qdot, &s.zdot[d..], sys);

        // Mass matrix, velocity-position coupling and configuration gradient
        // of the learned Lagrangian via one dual reverse pass per velocity.
        let mut g_q = vec![0.0; d];
        let mut mass = vec![0.0; d * d];
        let mut coup = vec![0.0; d * d];
        for i in 0..d {
            let x: Vec<Dual> = (0..2 * d)
                .map(|j| {
                    Dual::new(
                        if j < d { q[j] } else { qdot[j - d] },
                        if j == d + i { 1.0 } else { 0.0 },
                    )
                })
                .collect();
            let pb = crate::autodiff::backprop::mlp_input_pullback::<Dual>(
                params,
                &x,
                &[Dual::new(1.0, 0.0)],
            )?;
            if i == 0 {
                for j in 0..d {
                    g_q[j] = pb.input_grad[j].v;
                }
            }
            for j in 0..d {
                coup[i * d + j] = pb.input_grad[j].t;
                mass[i * d + j] = pb.input_grad[d + j].t;
            }
        }
        let cond = linalg::cond_estimate(&mass, d);
        if !cond.is_finite() || cond > 1e12 {
            return Err(CoreError::DegenerateLagrangian { cond });
        }
        let mut rhs = g_q.clone();
        for i in 0..d {
            for j in 0..d {
                rhs[i] -= coup[i * d + j] * qdot[j];
            }
        }
        let a = linalg::solve(&mass, &rhs, d, 1, "learned mass matrix")?;
        let r: Vec<f64> = a.iter().zip(&target).map(|(ai, ti)| 2.0 * (ai - ti)).collect();
        acc += a
            .iter()
            .zip(&target)
            .map(|(ai, ti)| (ai - ti) * (ai - ti))
            .sum::<f64>();
        // Sensitivity s = M^-1 r (M symmetric).
        let sv = linalg::solve(&mass, &r, d, 1, "learned mass matrix")?;

        // dloss/dphi = grad_phi(s . dL/dq) - grad_phi(s . (C qdot + M a)).
        // First term: dual reverse with input tangents (s, 0).
        let x1: Vec<Dual> = (0..2 * d)
            .map(|j| {
                Dual::new(
                    if j < d { q[j] } else { qdot[j - d] },
                    if j < d { sv[j] } else { 0.0 },
                )
            })
            .collect();
        dual_scratch.fill_zero();
        mlp_pullback_accum::<Dual>(params, &x1, &[Dual::new(1.0, 0.0)], &mut dual_scratch)?;
        grads.axpy_tangent(1.0 / n, &dual_scratch);
        // Second term: hyper-dual reverse with directions (0, s) and
        // (qdot, a); the mixed part is s^T (C qdot + M a).
        let x2: Vec<HyperDual> = (0..2 * d)
            .map(|j| {
                if j < d {
                    HyperDual::new(q[j], 0.0, qdot[j], 0.0)
                } else {
                    HyperDual::new(qdot[j - d], sv[j - d], a[j - d], 0.0)
                }
            })
            .collect();
        hyper_scratch.fill_zero();
        mlp_pullback_accum::<HyperDual>(
            params,
            &x2,
            &[HyperDual::new(1.0, 0.0, 0.0, 0.0)],
            &mut hyper_scratch,
        )?;
        grads.axpy_t12(-1.0 / n, &hyper_scratch);
    }
    Ok(acc / n)
}
