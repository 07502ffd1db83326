//! Property tests for the numerical core: integrator reversibility, metric
//! aggregation invariances, and loss symmetries.

use hamreg_core::evaluation::{pool_metrics, RolloutSeries};
use hamreg_core::integrator;
use hamreg_core::models::ModelFamily;
use hamreg_core::nn::init_params;
use hamreg_core::physics::{self, State, SystemId, SystemParams};
use hamreg_core::training::losses;
use hamreg_core::training::{Dataset, Provenance, Sample, Split};
use hamreg_core::models::{Coords, ModelSpec};
use proptest::prelude::*;

fn sysp() -> SystemParams {
    SystemParams::unit(9.81)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// RK4 is time-reversible to truncation-level accuracy: integrating
    /// 10 s forward and then 10 s with a negated step returns to the start.
    #[test]
    fn rk4_time_reversal(q in -2.5f64..2.5, p in -2.0f64..2.0) {
        let sys = sysp();
        let f = |_t: f64, z: &[f64]| Ok(physics::state_deriv(SystemId::Single, z, &sys));
        let z0 = [q, p];
        let dt = 0.005;
        let fwd = integrator::integrate(&f, 0.0, &z0, dt, 2000).unwrap();
        let back = integrator::integrate(&f, 10.0, fwd.states.last().unwrap(), -dt, 2000).unwrap();
        let z1 = back.states.last().unwrap();
        prop_assert!((z1[0] - z0[0]).abs() < 1e-7, "q drift {}", (z1[0] - z0[0]).abs());
        prop_assert!((z1[1] - z0[1]).abs() < 1e-7, "p drift {}", (z1[1] - z0[1]).abs());
    }

    /// Pooled metrics do not depend on the order of the rollouts.
    #[test]
    fn metrics_are_permutation_invariant(
        values in proptest::collection::vec(
            proptest::collection::vec(0.0f64..100.0, 1..20), 1..8),
        swap_a in 0usize..8, swap_b in 0usize..8,
    ) {
        let series: Vec<RolloutSeries> = values
            .iter()
            .map(|v| RolloutSeries {
                times: (0..v.len()).map(|k| k as f64 * 0.1).collect(),
                abs_de_pct: v.clone(),
                diverged: false,
            })
            .collect();
        let mut shuffled = series.clone();
        let (a, b) = (swap_a % series.len(), swap_b % series.len());
        shuffled.swap(a, b);
        let m1 = pool_metrics(&series, series.len(), 100.0);
        let m2 = pool_metrics(&shuffled, series.len(), 100.0);
        // Summation order may differ, so compare to roundoff, not bitwise.
        prop_assert!((m1.mean - m2.mean).abs() <= 1e-12 * (1.0 + m1.mean.abs()));
        prop_assert!((m1.std - m2.std).abs() <= 1e-12 * (1.0 + m1.std.abs()));
        prop_assert_eq!(m1.max, m2.max);
        let m = pool_metrics(&series, series.len(), 100.0);
        prop_assert!(m.max >= m.mean && m.mean >= 0.0 && m.std >= 0.0);
    }

    /// The flow-matching loss sees only energy *gradients*, so shifting the
    /// network's output bias leaves it bit-unchanged; the level-penalized
    /// loss does not have that symmetry.
    #[test]
    fn bias_shift_symmetry(shift in 0.5f64..10.0, seed in 0u64..50) {
        let sys = sysp();
        let dataset = tiny_dataset(&sys);
        let params = init_params(&[2, 8, 8, 1], seed).unwrap();
        let mut shifted = params.clone();
        *shifted.layers.last_mut().unwrap().b.last_mut().unwrap() += shift;
        let spec = ModelSpec::new(ModelFamily::Hnn, SystemId::Single, params).unwrap();
        let spec_shifted = ModelSpec::new(ModelFamily::Hnn, SystemId::Single, shifted).unwrap();

        let plain = losses::hnn_loss(&spec, &dataset, &sys).unwrap();
        let plain_shifted = losses::hnn_loss(&spec_shifted, &dataset, &sys).unwrap();
        prop_assert!((plain - plain_shifted).abs() < 1e-12 * (1.0 + plain.abs()));

        let reg = losses::regularized_loss(&spec, &dataset, 0.07, &sys).unwrap();
        let reg_shifted = losses::regularized_loss(&spec_shifted, &dataset, 0.07, &sys).unwrap();
        prop_assert!((reg - reg_shifted).abs() > 1e-6);
    }

    /// The reported percentage is definitionally 100 |dE| / max potential.
    #[test]
    fn percent_normalization_identity(de in 0.0f64..50.0) {
        let sys = sysp();
        for system in [SystemId::Single, SystemId::Double] {
            let denom = physics::max_potential(system, &sys);
            let pct = 100.0 * de / denom;
            prop_assert!((pct * denom / 100.0 - de).abs() < 1e-12);
        }
    }
}

fn tiny_dataset(sys: &SystemParams) -> Dataset {
    let ics: Vec<Vec<f64>> = vec![vec![0.6, 0.0], vec![1.9, 0.0]];
    let samples = ics
        .iter()
        .enumerate()
        .flat_map(|(id, ic)| {
            let h = physics::true_energy(SystemId::Single, &State::from_flat(ic), sys);
            [0.0, 0.3, 0.9].into_iter().map(move |t| {
                // Sample points along the energy level, not an integrated
                // trajectory: enough for loss-symmetry checks.
                let z = vec![ic[0] * (1.0 - t * 0.1), ic[1] + t];
                let zdot = physics::state_deriv(SystemId::Single, &z, sys);
                Sample {
                    traj_id: id,
                    t,
                    z,
                    zdot,
                    h_hat: h,
                }
            })
        })
        .collect();
    Dataset {
        system: SystemId::Single,
        coords: Coords::Generalized,
        split: Split::Sparse,
        samples,
        provenance: Provenance {
            dt: 0.1,
            stride: 1,
            ics,
            seed: 0,
        },
    }
}
