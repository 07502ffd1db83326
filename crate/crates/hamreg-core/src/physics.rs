//! Ground-truth mechanics: exact dynamics, Hamiltonians, coordinate
//! embeddings and holonomic constraints for the single and double pendulum.
//!
//! Conventions: y axis up, pivot at the origin, angles measured from the
//! downward vertical. Potential energy is zero at the hanging equilibrium,
//! so total energy is non-negative and directly comparable to
//! maximum-potential fractions.

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::math;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Which mechanical system a state or model refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemId {
    Single,
    Double,
}

impl SystemId {
    /// Degrees of freedom.
    pub fn dof(self) -> usize {
        match self {
            SystemId::Single => 1,
            SystemId::Double => 2,
        }
    }

    /// Number of Cartesian position coordinates.
    pub fn cart_dim(self) -> usize {
        2 * self.dof()
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemId::Single => "single",
            SystemId::Double => "double",
        }
    }

    pub fn parse(s: &str) -> Option<SystemId> {
        match s {
            "single" => Some(SystemId::Single),
            "double" => Some(SystemId::Double),
            _ => None,
        }
    }
}

/// Masses, rod lengths and gravity. The single pendulum uses `m1`/`l1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
}

impl SystemParams {
    /// Unit masses and lengths, g = 9.81.
    pub fn unit(g: f64) -> Self {
        SystemParams {
            m1: 1.0,
            m2: 1.0,
            l1: 1.0,
            l2: 1.0,
            g,
        }
    }

    pub fn default_for(_system: SystemId) -> Self {
        SystemParams::unit(9.81)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.m1, self.m2, self.l1, self.l2, self.g]
            .iter()
            .any(|&v| !(v > 0.0) || !v.is_finite())
        {
            return Err(CoreError::Config(format!(
                "system parameters must be strictly positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Phase-space point in generalized coordinates (angles and conjugate
/// momenta).
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl State {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        debug_assert_eq!(q.len(), p.len());
        State { q, p }
    }

    pub fn from_flat(z: &[f64]) -> Self {
        let d = z.len() / 2;
        State {
            q: z[..d].to_vec(),
            p: z[d..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = self.q.clone();
        z.extend_from_slice(&self.p);
        z
    }
}

/// Phase-space point in stacked Cartesian coordinates (positions, momenta).
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl CartesianState {
    pub fn from_flat(z: &[f64]) -> Self {
        let n = z.len() / 2;
        CartesianState {
            x: z[..n].to_vec(),
            p: z[n..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.p);
        z
    }
}

// ---------------------------------------------------------------------------
// Single pendulum
// ---------------------------------------------------------------------------

/// Hamiltonian flow of the single pendulum:
/// `qdot = p / (m l^2)`, `pdot = -m g l sin(q)`.
pub fn single_pendulum_deriv(q: f64, p: f64, sys: &SystemParams) -> (f64, f64) {
    let qdot = p / (sys.m1 * sys.l1 * sys.l1);
    let pdot = -sys.m1 * sys.g * sys.l1 * math::sin(q);
    (qdot, pdot)
}

/// Angular acceleration of the single pendulum.
pub fn single_pendulum_accel(q: f64, sys: &SystemParams) -> f64 {
    -(sys.g / sys.l1) * math::sin(q)
}

// ---------------------------------------------------------------------------
// Double pendulum
// ---------------------------------------------------------------------------

/// Angular accelerations from the coupled equations of motion, solved as a
/// 2x2 linear system in (thetaddot_1, thetaddot_2).
pub fn double_pendulum_accel(theta: [f64; 2], thetadot: [f64; 2], sys: &SystemParams) -> [f64; 2] {
    let delta = theta[0] - theta[1];
    let (sd, cd) = (math::sin(delta), math::cos(delta));
    let mu = sys.m2 / (sys.m1 + sys.m2);
    let a12 = (sys.l2 / sys.l1) * mu * cd;
    let a21 = (sys.l1 / sys.l2) * cd;
    let r1 = -(sys.l2 / sys.l1) * mu * thetadot[1] * thetadot[1] * sd
        - (sys.g / sys.l1) * math::sin(theta[0]);
    let r2 =
        (sys.l1 / sys.l2) * thetadot[0] * thetadot[0] * sd - (sys.g / sys.l2) * math::sin(theta[1]);
    // det = 1 - mu cos^2(delta) >= 1 - m2/(m1+m2) > 0 for positive masses.
    let det = 1.0 - a12 * a21;
    debug_assert!(det > 0.0);
    [(r1 - a12 * r2) / det, (r2 - a21 * r1) / det]
}

/// Generalized mass matrix of the double pendulum (row-major 2x2).
pub fn double_mass_matrix(theta: [f64; 2], sys: &SystemParams) -> [f64; 4] {
    let cd = math::cos(theta[0] - theta[1]);
    let off = sys.m2 * sys.l1 * sys.l2 * cd;
    [
        (sys.m1 + sys.m2) * sys.l1 * sys.l1,
        off,
        off,
        sys.m2 * sys.l2 * sys.l2,
    ]
}

/// Legendre transform: conjugate momenta from angular velocities.
pub fn double_momenta_from_velocities(
    theta: [f64; 2],
    thetadot: [f64; 2],
    sys: &SystemParams,
) -> [f64; 2] {
    let m = double_mass_matrix(theta, sys);
    [
        m[0] * thetadot[0] + m[1] * thetadot[1],
        m[2] * thetadot[0] + m[3] * thetadot[1],
    ]
}

/// Inverse Legendre transform: angular velocities from conjugate momenta
/// (solves the symmetric 2x2 mass-matrix system).
pub fn double_velocities_from_momenta(
    theta: [f64; 2],
    p: [f64; 2],
    sys: &SystemParams,
) -> [f64; 2] {
    let m = double_mass_matrix(theta, sys);
    let det = m[0] * m[3] - m[1] * m[2];
    debug_assert!(det > 0.0, "mass matrix must be positive definite");
    [
        (m[3] * p[0] - m[1] * p[1]) / det,
        (-m[2] * p[0] + m[0] * p[1]) / det,
    ]
}

/// Hamiltonian flow of the double pendulum in (q, p):
/// `qdot` from the inverse mass matrix, `pdot = Mdot qdot + M qddot`.
pub fn double_pendulum_qp_deriv(q: [f64; 2], p: [f64; 2], sys: &SystemParams) -> ([f64; 2], [f64; 2]) {
    let qdot = double_velocities_from_momenta(q, p, sys);
    let qddot = double_pendulum_accel(q, qdot, sys);
    let m = double_mass_matrix(q, sys);
    let moff_dot = -sys.m2 * sys.l1 * sys.l2 * math::sin(q[0] - q[1]) * (qdot[0] - qdot[1]);
    let pdot = [
        moff_dot * qdot[1] + m[0] * qddot[0] + m[1] * qddot[1],
        moff_dot * qdot[0] + m[2] * qddot[0] + m[3] * qddot[1],
    ];
    (qdot, pdot)
}

// ---------------------------------------------------------------------------
// Flat (q, p) vector fields and accelerations, dispatched by system
// ---------------------------------------------------------------------------

/// Exact (qdot, pdot) vector field on the flat state z = (q, p).
pub fn state_deriv(system: SystemId, z: &[f64], sys: &SystemParams) -> Vec<f64> {
    match system {
        SystemId::Single => {
            let (qd, pd) = single_pendulum_deriv(z[0], z[1], sys);
            vec![qd, pd]
        }
        SystemId::Double => {
            let (qd, pd) = double_pendulum_qp_deriv([z[0], z[1]], [z[2], z[3]], sys);
            vec![qd[0], qd[1], pd[0], pd[1]]
        }
    }
}

/// Angular accelerations at (q, qdot).
pub fn accel(system: SystemId, q: &[f64], qdot: &[f64], sys: &SystemParams) -> Vec<f64> {
    match system {
        SystemId::Single => vec![single_pendulum_accel(q[0], sys)],
        SystemId::Double => {
            let a = double_pendulum_accel([q[0], q[1]], [qdot[0], qdot[1]], sys);
            vec![a[0], a[1]]
        }
    }
}

/// Angular velocities from conjugate momenta.
pub fn velocities_from_momenta(
    system: SystemId,
    q: &[f64],
    p: &[f64],
    sys: &SystemParams,
) -> Vec<f64> {
    match system {
        SystemId::Single => vec![p[0] / (sys.m1 * sys.l1 * sys.l1)],
        SystemId::Double => {
            let v = double_velocities_from_momenta([q[0], q[1]], [p[0], p[1]], sys);
            vec![v[0], v[1]]
        }
    }
}

/// Conjugate momenta from angular velocities.
pub fn momenta_from_velocities(
    system: SystemId,
    q: &[f64],
    qdot: &[f64],
    sys: &SystemParams,
) -> Vec<f64> {
    match system {
        SystemId::Single => vec![sys.m1 * sys.l1 * sys.l1 * qdot[0]],
        SystemId::Double => {
            let p = double_momenta_from_velocities([q[0], q[1]], [qdot[0], qdot[1]], sys);
            vec![p[0], p[1]]
        }
    }
}

/// Angular accelerations recovered from momentum derivatives:
/// `qddot = M^-1 (pdot - Mdot qdot)`. Kinematic inverse of the Legendre
/// transform; used to turn (q, p, qdot, pdot) samples into acceleration
/// targets.
pub fn qddot_from_pdot(
    system: SystemId,
    q: &[f64],
    qdot: &[f64],
    pdot: &[f64],
    sys: &SystemParams,
) -> Vec<f64> {
    match system {
        SystemId::Single => vec![pdot[0] / (sys.m1 * sys.l1 * sys.l1)],
        SystemId::Double => {
            let moff_dot =
                -sys.m2 * sys.l1 * sys.l2 * math::sin(q[0] - q[1]) * (qdot[0] - qdot[1]);
            let rhs = [pdot[0] - moff_dot * qdot[1], pdot[1] - moff_dot * qdot[0]];
            let m = double_mass_matrix([q[0], q[1]], sys);
            let det = m[0] * m[3] - m[1] * m[2];
            vec![
                (m[3] * rhs[0] - m[1] * rhs[1]) / det,
                (-m[2] * rhs[0] + m[0] * rhs[1]) / det,
            ]
        }
    }
}

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

/// Total energy in generalized coordinates, zero at the hanging equilibrium.
pub fn true_energy(system: SystemId, state: &State, sys: &SystemParams) -> f64 {
    let qdot = velocities_from_momenta(system, &state.q, &state.p, sys);
    true_energy_from_velocities(system, &state.q, &qdot, sys)
}

/// Total energy from angles and angular velocities.
pub fn true_energy_from_velocities(
    system: SystemId,
    q: &[f64],
    qdot: &[f64],
    sys: &SystemParams,
) -> f64 {
    match system {
        SystemId::Single => {
            let ke = 0.5 * sys.m1 * sys.l1 * sys.l1 * qdot[0] * qdot[0];
            let pe = sys.m1 * sys.g * sys.l1 * (1.0 - math::cos(q[0]));
            ke + pe
        }
        SystemId::Double => {
            let m = double_mass_matrix([q[0], q[1]], sys);
            let ke = 0.5
                * (m[0] * qdot[0] * qdot[0]
                    + 2.0 * m[1] * qdot[0] * qdot[1]
                    + m[3] * qdot[1] * qdot[1]);
            let pe = sys.g
                * ((sys.m1 + sys.m2) * sys.l1 * (1.0 - math::cos(q[0]))
                    + sys.m2 * sys.l2 * (1.0 - math::cos(q[1])));
            ke + pe
        }
    }
}

/// Total energy of a Cartesian state (well-defined also slightly off the
/// constraint manifold).
pub fn true_energy_cartesian(system: SystemId, c: &CartesianState, sys: &SystemParams) -> f64 {
    let masses = coordinate_masses(system, sys);
    let ke: f64 = c
        .p
        .iter()
        .zip(&masses)
        .map(|(&p, &m)| p * p / (2.0 * m))
        .sum();
    let pe = match system {
        SystemId::Single => sys.m1 * sys.g * (c.x[1] + sys.l1),
        SystemId::Double => {
            sys.m1 * sys.g * (c.x[1] + sys.l1) + sys.m2 * sys.g * (c.x[3] + sys.l1 + sys.l2)
        }
    };
    ke + pe
}

/// Maximum potential energy (both rods inverted), the normalization
/// denominator of the reported energy-error percentages.
pub fn max_potential(system: SystemId, sys: &SystemParams) -> f64 {
    match system {
        SystemId::Single => 2.0 * sys.m1 * sys.g * sys.l1,
        SystemId::Double => 2.0 * sys.g * (sys.m1 * sys.l1 + sys.m2 * (sys.l1 + sys.l2)),
    }
}

// ---------------------------------------------------------------------------
// Cartesian embedding
// ---------------------------------------------------------------------------

/// Mass of each stacked Cartesian coordinate.
pub fn coordinate_masses(system: SystemId, sys: &SystemParams) -> Vec<f64> {
    match system {
        SystemId::Single => vec![sys.m1, sys.m1],
        SystemId::Double => vec![sys.m1, sys.m1, sys.m2, sys.m2],
    }
}

/// Map a generalized state onto the Cartesian constraint manifold.
pub fn to_cartesian(system: SystemId, state: &State, sys: &SystemParams) -> CartesianState {
    let qdot = velocities_from_momenta(system, &state.q, &state.p, sys);
    match system {
        SystemId::Single => {
            let (s, c) = (math::sin(state.q[0]), math::cos(state.q[0]));
            let x = vec![sys.l1 * s, -sys.l1 * c];
            let v = [sys.l1 * qdot[0] * c, sys.l1 * qdot[0] * s];
            CartesianState {
                x,
                p: vec![sys.m1 * v[0], sys.m1 * v[1]],
            }
        }
        SystemId::Double => {
            let (s1, c1) = (math::sin(state.q[0]), math::cos(state.q[0]));
            let (s2, c2) = (math::sin(state.q[1]), math::cos(state.q[1]));
            let x1 = [sys.l1 * s1, -sys.l1 * c1];
            let x2 = [x1[0] + sys.l2 * s2, x1[1] - sys.l2 * c2];
            let v1 = [sys.l1 * qdot[0] * c1, sys.l1 * qdot[0] * s1];
            let v2 = [v1[0] + sys.l2 * qdot[1] * c2, v1[1] + sys.l2 * qdot[1] * s2];
            CartesianState {
                x: vec![x1[0], x1[1], x2[0], x2[1]],
                p: vec![
                    sys.m1 * v1[0],
                    sys.m1 * v1[1],
                    sys.m2 * v2[0],
                    sys.m2 * v2[1],
                ],
            }
        }
    }
}

/// Map a Cartesian state back to generalized coordinates. Errors if the
/// position constraints are violated beyond `tol`.
pub fn from_cartesian(
    system: SystemId,
    c: &CartesianState,
    sys: &SystemParams,
    tol: f64,
) -> Result<State> {
    for r in constraint_phi(system, &c.x, sys) {
        if math::abs(r) > tol {
            return Err(CoreError::ManifoldViolation {
                residual: math::abs(r),
                tol,
            });
        }
    }
    match system {
        SystemId::Single => {
            let q = math::atan2(c.x[0], -c.x[1]);
            let tangent = [math::cos(q), math::sin(q)];
            let v = [c.p[0] / sys.m1, c.p[1] / sys.m1];
            let qdot = (tangent[0] * v[0] + tangent[1] * v[1]) / sys.l1;
            Ok(State::new(vec![q], vec![sys.m1 * sys.l1 * sys.l1 * qdot]))
        }
        SystemId::Double => {
            let q1 = math::atan2(c.x[0], -c.x[1]);
            let seg = [c.x[2] - c.x[0], c.x[3] - c.x[1]];
            let q2 = math::atan2(seg[0], -seg[1]);
            let t1 = [math::cos(q1), math::sin(q1)];
            let t2 = [math::cos(q2), math::sin(q2)];
            let v1 = [c.p[0] / sys.m1, c.p[1] / sys.m1];
            let v2 = [c.p[2] / sys.m2, c.p[3] / sys.m2];
            let qdot1 = (t1[0] * v1[0] + t1[1] * v1[1]) / sys.l1;
            let qdot2 = (t2[0] * (v2[0] - v1[0]) + t2[1] * (v2[1] - v1[1])) / sys.l2;
            let p = double_momenta_from_velocities([q1, q2], [qdot1, qdot2], sys);
            Ok(State::new(vec![q1, q2], vec![p[0], p[1]]))
        }
    }
}

/// Time derivative of the Cartesian state given angles, angular velocities
/// and angular accelerations: `(xdot, pdot)` with `p_i = m_i xdot_i`.
pub fn cartesian_deriv(
    system: SystemId,
    q: &[f64],
    qdot: &[f64],
    qddot: &[f64],
    sys: &SystemParams,
) -> (Vec<f64>, Vec<f64>) {
    match system {
        SystemId::Single => {
            let (s, c) = (math::sin(q[0]), math::cos(q[0]));
            let xdot = vec![sys.l1 * qdot[0] * c, sys.l1 * qdot[0] * s];
            let xddot = [
                sys.l1 * (qddot[0] * c - qdot[0] * qdot[0] * s),
                sys.l1 * (qddot[0] * s + qdot[0] * qdot[0] * c),
            ];
            (xdot, vec![sys.m1 * xddot[0], sys.m1 * xddot[1]])
        }
        SystemId::Double => {
            let (s1, c1) = (math::sin(q[0]), math::cos(q[0]));
            let (s2, c2) = (math::sin(q[1]), math::cos(q[1]));
            let v1 = [sys.l1 * qdot[0] * c1, sys.l1 * qdot[0] * s1];
            let v2 = [v1[0] + sys.l2 * qdot[1] * c2, v1[1] + sys.l2 * qdot[1] * s2];
            let a1 = [
                sys.l1 * (qddot[0] * c1 - qdot[0] * qdot[0] * s1),
                sys.l1 * (qddot[0] * s1 + qdot[0] * qdot[0] * c1),
            ];
            let a2 = [
                a1[0] + sys.l2 * (qddot[1] * c2 - qdot[1] * qdot[1] * s2),
                a1[1] + sys.l2 * (qddot[1] * s2 + qdot[1] * qdot[1] * c2),
            ];
            (
                vec![v1[0], v1[1], v2[0], v2[1]],
                vec![
                    sys.m1 * a1[0],
                    sys.m1 * a1[1],
                    sys.m2 * a2[0],
                    sys.m2 * a2[1],
                ],
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Holonomic constraints (Cartesian)
// ---------------------------------------------------------------------------

pub fn constraint_count(system: SystemId) -> usize {
    system.dof()
}

/// Constraint values `phi_k(x)`: `0.5 (|x|^2 - l^2)` per rod.
pub fn constraint_phi(system: SystemId, x: &[f64], sys: &SystemParams) -> Vec<f64> {
    match system {
        SystemId::Single => {
            vec![0.5 * (x[0] * x[0] + x[1] * x[1] - sys.l1 * sys.l1)]
        }
        SystemId::Double => {
            let d = [x[2] - x[0], x[3] - x[1]];
            vec![
                0.5 * (x[0] * x[0] + x[1] * x[1] - sys.l1 * sys.l1),
                0.5 * (d[0] * d[0] + d[1] * d[1] - sys.l2 * sys.l2),
            ]
        }
    }
}

/// Analytic constraint Jacobian `dphi/dx`, row-major (m x n).
pub fn constraint_jacobian(system: SystemId, x: &[f64], _sys: &SystemParams) -> Vec<f64> {
    match system {
        SystemId::Single => vec![x[0], x[1]],
        SystemId::Double => {
            let d = [x[2] - x[0], x[3] - x[1]];
            vec![
                x[0], x[1], 0.0, 0.0, //
                -d[0], -d[1], d[0], d[1],
            ]
        }
    }
}

/// Hessian of `phi_k` applied to a vector (the constraints are quadratic, so
/// the Hessians are constant).
pub fn constraint_hessian_vec(system: SystemId, k: usize, v: &[f64]) -> Vec<f64> {
    match (system, k) {
        (SystemId::Single, 0) => v.to_vec(),
        (SystemId::Double, 0) => vec![v[0], v[1], 0.0, 0.0],
        (SystemId::Double, 1) => vec![
            v[0] - v[2],
            v[1] - v[3],
            v[2] - v[0],
            v[3] - v[1],
        ],
        _ => unreachable!("constraint index out of range"),
    }
}

/// Numeric check that the constraint Jacobian rows are linearly independent
/// at `x` (used at data-generation time).
pub fn constraint_jacobian_full_rank(system: SystemId, x: &[f64], sys: &SystemParams) -> bool {
    let m = constraint_count(system);
    let n = system.cart_dim();
    let jac = constraint_jacobian(system, x, sys);
    let jt = linalg::transpose(&jac, m, n);
    let gram = linalg::matmul(&jac, &jt, m, n, m);
    linalg::cond_estimate(&gram, m).is_finite() && linalg::cond_estimate(&gram, m) < 1e12
}
