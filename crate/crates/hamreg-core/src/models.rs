//! Learned dynamics models and their vector fields.
//!
//! Four families share one MLP backbone:
//!
//! * `Baseline` — the network maps the state directly to its time derivative.
//! * `Hnn` — the network is a scalar Hamiltonian in generalized (q, p);
//!   the flow is its symplectic gradient.
//! * `Chnn` — a scalar Hamiltonian in stacked Cartesian (x, p); the flow is
//!   the symplectic gradient projected onto the rod-length constraint
//!   manifold.
//! * `Lnn` — a scalar Lagrangian in (q, qdot); accelerations come from the
//!   Euler-Lagrange equations, which needs second derivatives of the network.

use crate::autodiff::backprop::{mlp_eval, mlp_input_gradient, mlp_input_pullback};
use crate::autodiff::scalar::{Dual, Scalar};
use crate::error::{CoreError, Result};
use crate::linalg;
use crate::nn::MlpParams;
use crate::physics::{self, SystemId, SystemParams};
use alloc::vec;
use alloc::vec::Vec;

/// Which inductive bias the learned model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Baseline,
    Hnn,
    Chnn,
    Lnn,
}

/// Coordinate system of the model's state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coords {
    Generalized,
    Cartesian,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Baseline => "baseline",
            ModelFamily::Hnn => "hnn",
            ModelFamily::Chnn => "chnn",
            ModelFamily::Lnn => "lnn",
        }
    }

    pub fn parse(s: &str) -> Option<ModelFamily> {
        match s {
            "baseline" => Some(ModelFamily::Baseline),
            "hnn" => Some(ModelFamily::Hnn),
            "chnn" => Some(ModelFamily::Chnn),
            "lnn" => Some(ModelFamily::Lnn),
            _ => None,
        }
    }

    /// Coordinates the family is trained and rolled out in.
    pub fn coords(self) -> Coords {
        match self {
            ModelFamily::Chnn => Coords::Cartesian,
            _ => Coords::Generalized,
        }
    }

    /// Does the scalar network represent an energy?
    pub fn has_energy(self) -> bool {
        matches!(self, ModelFamily::Hnn | ModelFamily::Chnn)
    }
}

impl Coords {
    pub fn name(self) -> &'static str {
        match self {
            Coords::Generalized => "generalized",
            Coords::Cartesian => "cartesian",
        }
    }

    pub fn parse(s: &str) -> Option<Coords> {
        match s {
            "generalized" => Some(Coords::Generalized),
            "cartesian" => Some(Coords::Cartesian),
            _ => None,
        }
    }

    /// Flat state dimension for a system in these coordinates.
    pub fn state_dim(self, system: SystemId) -> usize {
        match self {
            Coords::Generalized => 2 * system.dof(),
            Coords::Cartesian => 2 * system.cart_dim(),
        }
    }
}

/// A trained (or initializing) model: family, system and network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub system: SystemId,
    pub params: MlpParams,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, system: SystemId, params: MlpParams) -> Result<Self> {
        let spec = ModelSpec {
            family,
            system,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn coords(&self) -> Coords {
        self.family.coords()
    }

    pub fn state_dim(&self) -> usize {
        self.coords().state_dim(self.system)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let want_in = self.state_dim();
        if self.params.input_dim() != want_in {
            return Err(CoreError::ShapeMismatch {
                context: "model input dimension",
                expected: want_in,
                got: self.params.input_dim(),
            });
        }
        let want_out = match self.family {
            ModelFamily::Baseline => want_in,
            _ => 1,
        };
        if self.params.output_dim() != want_out {
            return Err(CoreError::ShapeMismatch {
                context: "model output dimension",
                expected: want_out,
                got: self.params.output_dim(),
            });
        }
        Ok(())
    }

    /// The learned state derivative at `z` (flat, in the model's coords).
    pub fn vector_field(&self, z: &[f64], sys: &SystemParams) -> Result<Vec<f64>> {
        match self.family {
            ModelFamily::Baseline => mlp_eval::<f64>(&self.params, z),
            ModelFamily::Hnn => {
                let g = mlp_input_gradient(&self.params, z)?;
                let d = self.system.dof();
                let mut out = Vec::with_capacity(2 * d);
                out.extend_from_slice(&g[d..]);
                out.extend(g[..d].iter().map(|v| -v));
                Ok(out)
            }
            ModelFamily::Chnn => {
                let n = self.system.cart_dim();
                let g = mlp_input_gradient(&self.params, z)?;
                let a = chnn_flow_matrix(self.system, &z[..n], &z[n..], sys)?;
                Ok(linalg::matvec(&a, &g, 2 * n, 2 * n))
            }
            ModelFamily::Lnn => {
                let d = self.system.dof();
                let acc = lnn_acceleration(&self.params, &z[..d], &z[d..])?;
                let mut out = Vec::with_capacity(2 * d);
                out.extend_from_slice(&z[d..]);
                out.extend_from_slice(&acc);
                Ok(out)
            }
        }
    }

    /// The learned scalar energy at `z` (Hamiltonian families only).
    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        if !self.family.has_energy() {
            return Err(CoreError::UnsupportedFamily {
                op: "energy evaluation",
                family: self.family.name(),
            });
        }
        Ok(mlp_eval::<f64>(&self.params, z)?[0])
    }
}

/// The linear map `A(z)` of the constrained Hamiltonian flow
/// `zdot = A(z) grad H(z)` in stacked Cartesian coordinates.
///
/// The extended constraint set pairs each rod-length constraint `phi_k(x)`
/// with its velocity-tangency counterpart `dphi_k(x) . v`, where the
/// velocity `v = M^-1 p` uses the known coordinate masses. `A` projects the
/// symplectic gradient onto the tangent space of both, so the flow never
/// leaves the manifold. `A` depends only on `z`, not on the learned network,
/// which lets training precompute it per sample.
pub fn chnn_flow_matrix(
    system: SystemId,
    x: &[f64],
    p: &[f64],
    sys: &SystemParams,
) -> Result<Vec<f64>> {
    let n = system.cart_dim();
    let m = physics::constraint_count(system);
    let dim = 2 * n;
    let masses = physics::coordinate_masses(system, sys);
    let v: Vec<f64> = p.iter().zip(&masses).map(|(&pi, &mi)| pi / mi).collect();
    let dphi = physics::constraint_jacobian(system, x, sys);

    // DC (2m x dim): position rows (dphi_k, 0), velocity rows
    // (Hess(phi_k) v, dphi_k M^-1).
    let mut dc = vec![0.0; 2 * m * dim];
    for k in 0..m {
        dc[k * dim..k * dim + n].copy_from_slice(&dphi[k * n..(k + 1) * n]);
        let hv = physics::constraint_hessian_vec(system, k, &v);
        let row = &mut dc[(m + k) * dim..(m + k + 1) * dim];
        row[..n].copy_from_slice(&hv);
        for j in 0..n {
            row[n + j] = dphi[k * n + j] / masses[j];
        }
    }

    // DC J, with J the symplectic block matrix: (a, b) J = (-b, a).
    let mut dcj = vec![0.0; 2 * m * dim];
    for r in 0..2 * m {
        for j in 0..n {
            dcj[r * dim + j] = -dc[r * dim + n + j];
            dcj[r * dim + n + j] = dc[r * dim + j];
        }
    }

    let dct = linalg::transpose(&dc, 2 * m, dim);
    let s = linalg::matmul(&dcj, &dct, 2 * m, dim, 2 * m);
    // X = S^-1 (DC J).
    let x_sol = linalg::solve(&s, &dcj, 2 * m, dim, "constraint projection")?;
    // B = DC^T X; then A = J (I - B).
    let b = linalg::matmul(&dct, &x_sol, dim, 2 * m, dim);
    let mut ib = b;
    for (i, row) in ib.chunks_mut(dim).enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = if i == j { 1.0 - *e } else { -*e };
        }
    }
    // Left-multiply by J: row i <- row n+i, row n+i <- -row i.
    let mut a = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..dim {
            a[i * dim + j] = ib[(n + i) * dim + j];
            a[(n + i) * dim + j] = -ib[i * dim + j];
        }
    }
    Ok(a)
}

/// Accelerations from the Euler-Lagrange equations of a learned Lagrangian
/// `L(q, qdot)`: solves `M a = g_q - C qdot` with `M = d2L/dqdot2`,
/// `C = d2L/dqdot dq`, `g_q = dL/dq`.
///
/// Errors with [`CoreError::DegenerateLagrangian`] when the learned mass
/// matrix is numerically singular.
pub fn lnn_acceleration(params: &MlpParams, q: &[f64], qdot: &[f64]) -> Result<Vec<f64>> {
    let d = q.len();
    debug_assert_eq!(qdot.len(), d);
    let mut g_q = vec![0.0; d];
    let mut mass = vec![0.0; d * d];
    let mut c = vec![0.0; d * d];
    // One dual reverse pass per velocity coordinate: the tangent part of the
    // input gradient is the second-derivative row d/dqdot_i (dL/dq, dL/dqdot).
    for i in 0..d {
        let x: Vec<Dual> = (0..2 * d)
            .map(|j| Dual::new(if j < d { q[j] } else { qdot[j - d] }, if j == d + i { 1.0 } else { 0.0 }))
            .collect();
        let pb = mlp_input_pullback::<Dual>(params, &x, &[Dual::new(1.0, 0.0)])?;
        if i == 0 {
            for j in 0..d {
                g_q[j] = pb.input_grad[j].value();
            }
        }
        for j in 0..d {
            c[i * d + j] = pb.input_grad[j].t;
            mass[i * d + j] = pb.input_grad[d + j].t;
        }
    }
    let cond = linalg::cond_estimate(&mass, d);
    if !cond.is_finite() || cond > 1e12 {
        return Err(CoreError::DegenerateLagrangian { cond });
    }
    let mut rhs = g_q;
    for i in 0..d {
        for j in 0..d {
            rhs[i] -= c[i * d + j] * qdot[j];
        }
    }
    linalg::solve(&mass, &rhs, d, 1, "learned mass matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, mlp_forward};
    use crate::physics::{CartesianState, State};

    fn sysp() -> SystemParams {
        SystemParams::unit(9.81)
    }

    fn small_net(sizes: &[usize], seed: u64) -> MlpParams {
        init_params(sizes, seed).unwrap()
    }

    #[test]
    fn hnn_field_is_symplectic_gradient_of_energy() {
        let params = small_net(&[2, 16, 16, 1], 7);
        let spec = ModelSpec::new(ModelFamily::Hnn, SystemId::Single, params).unwrap();
        let z = [0.6, -0.9];
        let f = spec.vector_field(&z, &sysp()).unwrap();
        let eps = 1e-6;
        let h = |z: &[f64]| spec.energy(z).unwrap();
        let dhdq = (h(&[z[0] + eps, z[1]]) - h(&[z[0] - eps, z[1]])) / (2.0 * eps);
        let dhdp = (h(&[z[0], z[1] + eps]) - h(&[z[0], z[1] - eps])) / (2.0 * eps);
        assert!((f[0] - dhdp).abs() < 1e-8);
        assert!((f[1] + dhdq).abs() < 1e-8);
    }

    #[test]
    fn baseline_field_is_plain_forward() {
        let params = small_net(&[2, 8, 2], 3);
        let spec = ModelSpec::new(ModelFamily::Baseline, SystemId::Single, params.clone()).unwrap();
        let z = [0.1, 0.2];
        assert_eq!(
            spec.vector_field(&z, &sysp()).unwrap(),
            mlp_forward(&params, &z).unwrap()
        );
    }

    #[test]
    fn shape_validation() {
        let params = small_net(&[2, 8, 1], 0);
        assert!(ModelSpec::new(ModelFamily::Hnn, SystemId::Double, params.clone()).is_err());
        assert!(ModelSpec::new(ModelFamily::Baseline, SystemId::Single, params).is_err());
    }

    #[test]
    fn chnn_projection_annihilates_constraint_rows() {
        // DC . A = 0 by construction; check numerically on both systems.
        let sys = sysp();
        for (system, state) in [
            (SystemId::Single, State::new(vec![0.8], vec![1.1])),
            (
                SystemId::Double,
                State::new(vec![0.8, -1.4], vec![1.1, 0.3]),
            ),
        ] {
            let c = physics::to_cartesian(system, &state, &sys);
            let n = system.cart_dim();
            let a = chnn_flow_matrix(system, &c.x, &c.p, &sys).unwrap();
            // Rebuild DC the same way the flow matrix does and multiply.
            let m = physics::constraint_count(system);
            let masses = physics::coordinate_masses(system, &sys);
            let v: Vec<f64> = c.p.iter().zip(&masses).map(|(p, m)| p / m).collect();
            let dphi = physics::constraint_jacobian(system, &c.x, &sys);
            let dim = 2 * n;
            let mut dc = vec![0.0; 2 * m * dim];
            for k in 0..m {
                dc[k * dim..k * dim + n].copy_from_slice(&dphi[k * n..(k + 1) * n]);
                let hv = physics::constraint_hessian_vec(system, k, &v);
                dc[(m + k) * dim..(m + k) * dim + n].copy_from_slice(&hv);
                for j in 0..n {
                    dc[(m + k) * dim + n + j] = dphi[k * n + j] / masses[j];
                }
            }
            let prod = linalg::matmul(&dc, &a, 2 * m, dim, dim);
            for v in prod {
                assert!(v.abs() < 1e-10, "constraint row leak: {v}");
            }
        }
    }

    #[test]
    fn chnn_flow_with_true_hamiltonian_matches_exact_dynamics() {
        // Feeding the exact Cartesian energy gradient through A(z) must
        // reproduce the exact constrained dynamics.
        let sys = sysp();
        for (system, state) in [
            (SystemId::Single, State::new(vec![1.2], vec![0.7])),
            (
                SystemId::Double,
                State::new(vec![0.5, -0.9], vec![0.6, -0.2]),
            ),
        ] {
            let n = system.cart_dim();
            let cart = physics::to_cartesian(system, &state, &sys);
            let masses = physics::coordinate_masses(system, &sys);
            // grad H: dH/dx is the gravity gradient, dH/dp = p / m.
            let mut grad = vec![0.0; 2 * n];
            match system {
                SystemId::Single => grad[1] = sys.m1 * sys.g,
                SystemId::Double => {
                    grad[1] = sys.m1 * sys.g;
                    grad[3] = sys.m2 * sys.g;
                }
            }
            for j in 0..n {
                grad[n + j] = cart.p[j] / masses[j];
            }
            let a = chnn_flow_matrix(system, &cart.x, &cart.p, &sys).unwrap();
            let flow = linalg::matvec(&a, &grad, 2 * n, 2 * n);
            // Exact reference via generalized dynamics mapped to Cartesian.
            let qdot = physics::velocities_from_momenta(system, &state.q, &state.p, &sys);
            let qddot = physics::accel(system, &state.q, &qdot, &sys);
            let (xdot, pdot) = physics::cartesian_deriv(system, &state.q, &qdot, &qddot, &sys);
            for j in 0..n {
                assert!((flow[j] - xdot[j]).abs() < 1e-10, "xdot[{j}]");
                assert!((flow[n + j] - pdot[j]).abs() < 1e-10, "pdot[{j}]");
            }
        }
    }

    #[test]
    fn chnn_flow_conserves_the_learned_energy_direction() {
        // grad H^T A grad H = 0 (A is antisymmetric on the projected space).
        let sys = sysp();
        let state = State::new(vec![0.4, 1.9], vec![-0.8, 0.5]);
        let cart = physics::to_cartesian(SystemId::Double, &state, &sys);
        let a = chnn_flow_matrix(SystemId::Double, &cart.x, &cart.p, &sys).unwrap();
        let g = [0.3, -1.2, 0.9, 0.1, 0.5, -0.4, 1.7, 0.2];
        let ag = linalg::matvec(&a, &g, 8, 8);
        let dot: f64 = g.iter().zip(&ag).map(|(x, y)| x * y).sum();
        assert!(dot.abs() < 1e-10, "energy drift direction: {dot}");
    }

    #[test]
    fn chnn_vector_field_runs_on_manifold_states() {
        let sys = sysp();
        let params = small_net(&[8, 32, 1], 11);
        let spec = ModelSpec::new(ModelFamily::Chnn, SystemId::Double, params).unwrap();
        let cart = physics::to_cartesian(
            SystemId::Double,
            &State::new(vec![0.3, -0.6], vec![0.2, 0.9]),
            &sys,
        );
        let mut z = cart.x.clone();
        z.extend_from_slice(&cart.p);
        let f = spec.vector_field(&z, &sys).unwrap();
        assert_eq!(f.len(), 8);
        assert!(f.iter().all(|v| v.is_finite()));
        // The flow must stay tangent to the position constraints.
        let dphi = physics::constraint_jacobian(SystemId::Double, &cart.x, &sys);
        for k in 0..2 {
            let dot: f64 = (0..4).map(|j| dphi[k * 4 + j] * f[j]).sum();
            assert!(dot.abs() < 1e-10);
        }
    }

    #[test]
    fn lnn_acceleration_matches_finite_differences() {
        let params = small_net(&[4, 24, 24, 1], 19);
        let q = [0.7, -0.3];
        let qd = [0.4, 1.1];
        let acc = lnn_acceleration(&params, &q, &qd).unwrap();
        // Finite-difference M, C, g_q of the network and solve independently.
        let l = |q: &[f64], qd: &[f64]| {
            mlp_forward(&params, &[q[0], q[1], qd[0], qd[1]]).unwrap()[0]
        };
        let eps = 1e-4;
        let mut mass = [0.0; 4];
        let mut cmat = [0.0; 4];
        let mut gq = [0.0; 2];
        for i in 0..2 {
            let mut qh = q;
            let mut ql = q;
            qh[i] += eps;
            ql[i] -= eps;
            gq[i] = (l(&qh, &qd) - l(&ql, &qd)) / (2.0 * eps);
            for j in 0..2 {
                // d2L/dqdot_i dqdot_j and d2L/dqdot_i dq_j by nested central
                // differences of dL/dqdot_i.
                let dl_dqdi = |q: &[f64; 2], qd: &[f64; 2]| {
                    let mut h = *qd;
                    let mut lo = *qd;
                    h[i] += eps;
                    lo[i] -= eps;
                    (l(q, &h) - l(q, &lo)) / (2.0 * eps)
                };
                let mut vh = qd;
                let mut vl = qd;
                vh[j] += eps;
                vl[j] -= eps;
                mass[i * 2 + j] = (dl_dqdi(&q, &vh) - dl_dqdi(&q, &vl)) / (2.0 * eps);
                let mut ph = q;
                let mut pl = q;
                ph[j] += eps;
                pl[j] -= eps;
                cmat[i * 2 + j] = (dl_dqdi(&ph, &qd) - dl_dqdi(&pl, &qd)) / (2.0 * eps);
            }
        }
        let rhs = [
            gq[0] - cmat[0] * qd[0] - cmat[1] * qd[1],
            gq[1] - cmat[2] * qd[0] - cmat[3] * qd[1],
        ];
        let expect = linalg::solve(&mass, &rhs, 2, 1, "test").unwrap();
        for i in 0..2 {
            assert!(
                (acc[i] - expect[i]).abs() < 1e-3 * (1.0 + expect[i].abs()),
                "acc[{i}]: {} vs {}",
                acc[i],
                expect[i]
            );
        }
    }

    #[test]
    fn lnn_degenerate_network_is_detected() {
        // All-zero weights give a constant Lagrangian and a zero mass matrix.
        let mut params = small_net(&[2, 8, 1], 0);
        for l in &mut params.layers {
            l.w.iter_mut().for_each(|w| *w = 0.0);
        }
        let err = lnn_acceleration(&params, &[0.3], &[0.1]).unwrap_err();
        assert!(matches!(err, CoreError::DegenerateLagrangian { .. }));
    }

    #[test]
    fn energy_unsupported_for_baseline() {
        let params = small_net(&[2, 8, 2], 5);
        let spec = ModelSpec::new(ModelFamily::Baseline, SystemId::Single, params).unwrap();
        assert!(matches!(
            spec.energy(&[0.0, 0.0]),
            Err(CoreError::UnsupportedFamily { .. })
        ));
    }

    #[test]
    fn cartesian_state_flat_round_trip() {
        let c = CartesianState {
            x: vec![1.0, 2.0],
            p: vec![3.0, 4.0],
        };
        assert_eq!(CartesianState::from_flat(&c.to_flat()), c);
    }
}
