//! Training-set generation: exact trajectories sampled at the experiment
//! grids.
//!
//! Single pendulum: four release angles at 36/72/108/144 degrees, zero
//! momentum, 150 s. The full split keeps one point per second (600 total),
//! the sparse split one per ten seconds including both endpoints (64 total).
//! Double pendulum: four seeded random angle pairs at rest, 150 s; full
//! split at 10 Hz (6000), sparse at 1 Hz (600). Derivatives come from the
//! exact dynamics evaluated at the stored states, never from finite
//! differences, and each trajectory carries its conserved true energy as
//! the label for the level penalty.
//!
//! Trajectories are integrated internally at dt = 0.001 and sampled on the
//! 0.1 s grid: at dt = 0.1 a fixed-step RK4 drifts by whole percents of the
//! maximum potential energy over 150 s at the training amplitudes (tens of
//! percents for energetic double-pendulum releases), which would make the
//! conserved-energy labels inconsistent with the sampled states. The finer
//! internal step keeps that inconsistency around 1e-7.

use crate::error::{CoreError, Result};
use crate::integrator;
use crate::models::Coords;
use crate::physics::{self, State, SystemId, SystemParams};
use crate::training::{Dataset, Provenance, Sample, Split};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand_core::{RngCore, SeedableRng};

/// Spacing of the base sampling grid.
pub const GEN_DT: f64 = 0.1;
/// Internal integration substeps per grid interval.
pub const GEN_SUBSTEPS: usize = 100;
pub const GEN_HORIZON_S: f64 = 150.0;

/// Expected dataset size per system/split.
pub fn expected_count(system: SystemId, split: Split) -> usize {
    match (system, split) {
        (SystemId::Single, Split::Full) => 600,
        (SystemId::Single, Split::Sparse) => 64,
        (SystemId::Double, Split::Full) => 6000,
        (SystemId::Double, Split::Sparse) => 600,
    }
}

fn uniform01(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The training initial conditions (flat generalized states).
pub fn training_ics(system: SystemId, seed: u64) -> Vec<Vec<f64>> {
    match system {
        SystemId::Single => {
            // 36, 72, 108, 144 degrees: interior equal spacing of (0, 180).
            (1..=4)
                .map(|k| vec![k as f64 * core::f64::consts::PI / 5.0, 0.0])
                .collect()
        }
        SystemId::Double => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..4)
                .map(|_| {
                    let q1 = -core::f64::consts::PI
                        + 2.0 * core::f64::consts::PI * uniform01(&mut rng);
                    let q2 = -core::f64::consts::PI
                        + 2.0 * core::f64::consts::PI * uniform01(&mut rng);
                    vec![q1, q2, 0.0, 0.0]
                })
                .collect()
        }
    }
}

/// Sampled step indices into the dt=0.1, 150 s trajectories.
fn sample_indices(system: SystemId, split: Split) -> Vec<usize> {
    let steps = (GEN_HORIZON_S / GEN_DT + 0.5) as usize; // 1500
    match (system, split) {
        // One point per second, t = 0..149.
        (SystemId::Single, Split::Full) => (0..steps).step_by(10).collect(),
        // One point per ten seconds, both endpoints: t = 0, 10, ..., 150.
        (SystemId::Single, Split::Sparse) => (0..=steps).step_by(100).collect(),
        // 10 Hz, t = 0..149.9.
        (SystemId::Double, Split::Full) => (0..steps).collect(),
        // 1 Hz, t = 0..149.
        (SystemId::Double, Split::Sparse) => (0..steps).step_by(10).collect(),
    }
}

/// Generate a dataset in generalized coordinates.
pub fn generate_dataset(
    system: SystemId,
    split: Split,
    seed: u64,
    sys: &SystemParams,
) -> Result<Dataset> {
    sys.validate()?;
    let ics = training_ics(system, seed);
    let indices = sample_indices(system, split);
    let steps = (GEN_HORIZON_S / GEN_DT + 0.5) as usize;
    let f = |_t: f64, z: &[f64]| Ok(physics::state_deriv(system, z, sys));
    let mut samples = Vec::with_capacity(ics.len() * indices.len());
    for (traj_id, ic) in ics.iter().enumerate() {
        let h_hat = physics::true_energy(system, &State::from_flat(ic), sys);
        let traj = integrator::integrate(
            &f,
            0.0,
            ic,
            GEN_DT / GEN_SUBSTEPS as f64,
            steps * GEN_SUBSTEPS,
        )?;
        for &k in &indices {
            let z = traj.states[k * GEN_SUBSTEPS].clone();
            let zdot = physics::state_deriv(system, &z, sys);
            samples.push(Sample {
                traj_id,
                t: k as f64 * GEN_DT,
                z,
                zdot,
                h_hat,
            });
        }
    }
    let want = expected_count(system, split);
    if samples.len() != want {
        return Err(CoreError::Generation(format!(
            "sampling produced {} points, expected {}",
            samples.len(),
            want
        )));
    }
    let dataset = Dataset {
        system,
        coords: Coords::Generalized,
        split,
        samples,
        provenance: Provenance {
            dt: GEN_DT,
            stride: indices.get(1).copied().unwrap_or(1),
            ics,
            seed,
        },
    };
    dataset.validate()?;
    Ok(dataset)
}
