//! Classical fourth-order Runge-Kutta with a fixed step.
//!
//! All trajectories in this crate — data generation and model rollouts —
//! come through here, so a single deterministic integrator is the common
//! reference point when comparing learned and exact dynamics.

use crate::error::{CoreError, Result};
use alloc::vec::Vec;

/// A time-stamped sequence of flat states. `states[k]` is the state at
/// `t0 + k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn time_at(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// One classical RK4 step of `dy/dt = f(t, y)`.
pub fn rk4_step<F>(f: &F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y.len();
    let k1 = f(t, y)?;
    let mut tmp: Vec<f64> = (0..n).map(|i| y[i] + 0.5 * dt * k1[i]).collect();
    let k2 = f(t + 0.5 * dt, &tmp)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    let k3 = f(t + 0.5 * dt, &tmp)?;
    for i in 0..n {
        tmp[i] = y[i] + dt * k3[i];
    }
    let k4 = f(t + dt, &tmp)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::IntegrationFailure { t, stage: 4 });
    }
    Ok(out)
}

/// Integrate for `n_steps` fixed steps, recording every state including the
/// initial one (`n_steps + 1` entries).
pub fn integrate<F>(f: &F, t0: f64, y0: &[f64], dt: f64, n_steps: usize) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(y0.to_vec());
    let mut y = y0.to_vec();
    for k in 0..n_steps {
        y = rk4_step(f, t0 + k as f64 * dt, &y, dt)?;
        states.push(y.clone());
    }
    Ok(Trajectory { t0, dt, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{self, State, SystemId, SystemParams};
    use alloc::vec;

    #[test]
    fn exponential_truncation_error() {
        // dy/dt = y over one step dt = 0.1 from y = 1 gives the degree-4
        // Taylor polynomial of e^0.1.
        let f = |_t: f64, y: &[f64]| Ok(vec![y[0]]);
        let y = rk4_step(&f, 0.0, &[1.0], 0.1).unwrap();
        assert!((y[0] - 1.1051708333333332).abs() < 1e-15);
        let err = (y[0] - 0.1f64.exp()).abs();
        assert!(err < 1e-7 && err > 0.0);
    }

    #[test]
    fn fourth_order_convergence() {
        // Halving the step on a nonlinear problem shrinks the endpoint error
        // by ~2^4.
        let f = |_t: f64, y: &[f64]| {
            Ok(vec![physics::single_pendulum_deriv(y[0], y[1], &SystemParams::unit(9.81)).0, {
                physics::single_pendulum_deriv(y[0], y[1], &SystemParams::unit(9.81)).1
            }])
        };
        let exact = integrate(&f, 0.0, &[1.2, 0.0], 1e-4, 40000).unwrap();
        let reference = exact.states.last().unwrap().clone();
        let mut errs = Vec::new();
        for &(dt, n) in &[(0.04, 100usize), (0.02, 200), (0.01, 400)] {
            let tr = integrate(&f, 0.0, &[1.2, 0.0], dt, n).unwrap();
            let last = tr.states.last().unwrap();
            let e = ((last[0] - reference[0]).powi(2) + (last[1] - reference[1]).powi(2)).sqrt();
            errs.push(e);
        }
        let rate1 = (errs[0] / errs[1]).log2();
        let rate2 = (errs[1] / errs[2]).log2();
        assert!(rate1 > 3.7 && rate1 < 4.3, "rate {rate1}");
        assert!(rate2 > 3.7 && rate2 < 4.3, "rate {rate2}");
    }

    #[test]
    fn pendulum_energy_drift_is_tiny() {
        let sys = SystemParams::unit(9.81);
        let f = |_t: f64, z: &[f64]| Ok(physics::state_deriv(SystemId::Single, z, &sys));
        let z0 = [2.0, 0.0];
        let e0 = physics::true_energy(SystemId::Single, &State::from_flat(&z0), &sys);
        let tr = integrate(&f, 0.0, &z0, 0.01, 15000).unwrap();
        for s in &tr.states {
            let e = physics::true_energy(SystemId::Single, &State::from_flat(s), &sys);
            assert!((e - e0).abs() / e0 < 1e-5);
        }
    }

    #[test]
    fn trajectory_timestamps() {
        let f = |_t: f64, _y: &[f64]| Ok(vec![0.0]);
        let tr = integrate(&f, 2.0, &[1.0], 0.5, 4).unwrap();
        assert_eq!(tr.len(), 5);
        assert!((tr.time_at(4) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn nonfinite_state_is_an_error() {
        let f = |_t: f64, y: &[f64]| Ok(vec![y[0] * y[0]]);
        // Blow up: dy/dt = y^2 from y = 1 diverges at t = 1.
        let res = integrate(&f, 0.0, &[1e150], 1.0, 3);
        assert!(matches!(res, Err(CoreError::IntegrationFailure { .. })));
    }
}
