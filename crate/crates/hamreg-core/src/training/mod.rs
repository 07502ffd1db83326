//! Loss functions, the full-batch training loop and cross-validation of the
//! energy-level weight.
//!
//! Two gradient paths exist on purpose. [`losses`] holds straightforward
//! per-sample reference implementations used by tests; [`batch`] computes
//! the same quantities with batched matrix products and is what [`train`]
//! actually runs. The batch kernel is validated against the reference to
//! near machine precision.

mod batch;
pub mod losses;

pub use batch::BatchKernel;

use crate::autodiff::backprop::GradBuf;
use crate::error::{CoreError, Result};
use crate::evaluation;
use crate::models::{Coords, ModelFamily, ModelSpec};
use crate::nn::{adam_step, init_params, AdamState, LrSchedule};
use crate::physics::{self, State, SystemId, SystemParams};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Loss values above this for 100 consecutive epochs count as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e8;
pub const DIVERGENCE_PATIENCE: usize = 100;

/// One observation: a state, its exact time derivative and the true total
/// energy of the trajectory it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub traj_id: usize,
    pub t: f64,
    pub z: Vec<f64>,
    pub zdot: Vec<f64>,
    pub h_hat: f64,
}

/// Dataset density: the paper's full (f) and sparse (s) splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Full,
    Sparse,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Full => "f",
            Split::Sparse => "s",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "f" | "full" => Some(Split::Full),
            "s" | "sparse" => Some(Split::Sparse),
            _ => None,
        }
    }
}

/// How a dataset was produced: integrator step, sampling stride (in steps),
/// the initial conditions (flat generalized states) and the IC seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub dt: f64,
    pub stride: usize,
    pub ics: Vec<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: SystemId,
    pub coords: Coords,
    pub split: Split,
    pub samples: Vec<Sample>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn state_dim(&self) -> usize {
        self.coords.state_dim(self.system)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(CoreError::Config(String::from("empty dataset")));
        }
        let dim = self.state_dim();
        for s in &self.samples {
            if s.z.len() != dim || s.zdot.len() != dim {
                return Err(CoreError::ShapeMismatch {
                    context: "dataset sample",
                    expected: dim,
                    got: s.z.len(),
                });
            }
            if s.z.iter().chain(&s.zdot).any(|v| !v.is_finite()) || !s.h_hat.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "dataset sample",
                });
            }
        }
        // The true energy is conserved, so it must be constant per
        // trajectory.
        for s in &self.samples {
            let first = self
                .samples
                .iter()
                .find(|o| o.traj_id == s.traj_id)
                .unwrap();
            if (s.h_hat - first.h_hat).abs() > 1e-9 {
                return Err(CoreError::Config(format!(
                    "energy label varies within trajectory {}: {} vs {}",
                    s.traj_id, first.h_hat, s.h_hat
                )));
            }
        }
        Ok(())
    }

    /// Re-express a generalized-coordinate dataset in stacked Cartesian
    /// coordinates (positions/momenta and their exact time derivatives).
    /// Energy labels are unchanged.
    pub fn to_cartesian(&self, sys: &SystemParams) -> Result<Dataset> {
        if self.coords == Coords::Cartesian {
            return Ok(self.clone());
        }
        let d = self.system.dof();
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let state = State::new(s.z[..d].to_vec(), s.z[d..].to_vec());
                let cart = physics::to_cartesian(self.system, &state, sys);
                let qdot = &s.zdot[..d];
                let qddot =
                    physics::qddot_from_pdot(self.system, &state.q, qdot, &s.zdot[d..], sys);
                let (xdot, pdot) =
                    physics::cartesian_deriv(self.system, &state.q, qdot, &qddot, sys);
                let mut z = cart.x;
                z.extend_from_slice(&cart.p);
                let mut zdot = xdot;
                zdot.extend_from_slice(&pdot);
                Sample {
                    traj_id: s.traj_id,
                    t: s.t,
                    z,
                    zdot,
                    h_hat: s.h_hat,
                }
            })
            .collect();
        Ok(Dataset {
            system: self.system,
            coords: Coords::Cartesian,
            split: self.split,
            samples,
            provenance: self.provenance.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub family: ModelFamily,
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub lambda_h: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// The paper's architectures: two softplus hidden layers, 32 units for
    /// the single pendulum and 128 for the double pendulum.
    pub fn default_layer_sizes(family: ModelFamily, system: SystemId) -> Vec<usize> {
        let dim = family.coords().state_dim(system);
        let hidden = match system {
            SystemId::Single => 32,
            SystemId::Double => 128,
        };
        let out = match family {
            ModelFamily::Baseline => dim,
            _ => 1,
        };
        alloc::vec![dim, hidden, hidden, out]
    }

    pub fn new(family: ModelFamily, system: SystemId, lambda_h: f64, seed: u64) -> Self {
        TrainConfig {
            family,
            layer_sizes: Self::default_layer_sizes(family, system),
            epochs: 150_000,
            schedule: LrSchedule::full_scale(),
            lambda_h,
            seed,
        }
    }

    pub fn validate(&self, system: SystemId) -> Result<()> {
        self.schedule.validate()?;
        if !self.lambda_h.is_finite() || self.lambda_h < 0.0 {
            return Err(CoreError::Config(format!(
                "lambda_h must be finite and non-negative, got {}",
                self.lambda_h
            )));
        }
        let dim = self.family.coords().state_dim(system);
        if self.layer_sizes.first() != Some(&dim) {
            return Err(CoreError::Config(format!(
                "first layer size must equal the state dimension {dim}"
            )));
        }
        let out = match self.family {
            ModelFamily::Baseline => dim,
            _ => 1,
        };
        if self.layer_sizes.last() != Some(&out) {
            return Err(CoreError::Config(format!(
                "last layer size must be {out} for family {}",
                self.family.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelSpec,
    pub history: Vec<HistoryRow>,
    pub diverged: bool,
    pub diverged_epoch: Option<usize>,
}

fn is_divergence_error(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NonFinite { .. }
            | CoreError::NonFiniteGrad { .. }
            | CoreError::DegenerateLagrangian { .. }
            | CoreError::SingularSystem { .. }
    )
}

/// Full-batch gradient training, deterministic in the seed. Divergence
/// (non-finite loss/gradient, or a loss stuck above [`DIVERGENCE_LOSS`])
/// ends the run early with the partial history and a marker instead of an
/// error.
pub fn train(config: &TrainConfig, dataset: &Dataset, sys: &SystemParams) -> Result<TrainOutcome> {
    config.validate(dataset.system)?;
    dataset.validate()?;
    let data = if config.family.coords() == Coords::Cartesian {
        dataset.to_cartesian(sys)?
    } else if dataset.coords != Coords::Generalized {
        return Err(CoreError::Config(format!(
            "family {} trains on generalized coordinates",
            config.family.name()
        )));
    } else {
        dataset.clone()
    };

    let mut params = init_params(&config.layer_sizes, config.seed)?;
    let mut adam = AdamState::new(&params);
    let mut grads = GradBuf::<f64>::zeros_like(&params);
    let mut history = Vec::with_capacity(config.epochs.min(200_000));
    let mut kernel = match config.family {
        ModelFamily::Lnn => None,
        _ => Some(BatchKernel::new(config.family, &data, &config.layer_sizes, sys)?),
    };

    let mut high = 0usize;
    let mut diverged_epoch = None;
    for epoch in 0..config.epochs {
        let lr = config.schedule.rate_at(epoch);
        grads.fill_zero();
        let loss = match &mut kernel {
            Some(k) => k.loss_and_grad(&params, config.lambda_h, &mut grads),
            None => losses::lnn_loss_and_grad(&params, &data, sys, &mut grads),
        };
        let loss = match loss {
            Ok(l) => l,
            Err(e) if is_divergence_error(&e) => {
                diverged_epoch = Some(epoch);
                break;
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            diverged_epoch = Some(epoch);
            break;
        }
        history.push(HistoryRow { epoch, loss, lr });
        if loss > DIVERGENCE_LOSS {
            high += 1;
            if high >= DIVERGENCE_PATIENCE {
                diverged_epoch = Some(epoch);
                break;
            }
        } else {
            high = 0;
        }
        match adam_step(&mut params, &grads, &mut adam, &config.schedule, epoch) {
            Ok(()) => {}
            Err(e) if is_divergence_error(&e) => {
                diverged_epoch = Some(epoch);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let model = ModelSpec::new(config.family, dataset.system, params)?;
    Ok(TrainOutcome {
        model,
        history,
        diverged: diverged_epoch.is_some(),
        diverged_epoch,
    })
}

/// Score of one grid point in the lambda cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaScore {
    pub lambda: f64,
    pub mean_abs_de_pct: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValResult {
    pub best_lambda: f64,
    pub scores: Vec<LambdaScore>,
}

/// The default search grids; both contain the paper's operating points
/// (0.07 and 0.2 for plain Hamiltonian models, 0.01 and 0.005 for the
/// constrained variant) as well as 0.
pub fn default_lambda_grid() -> Vec<f64> {
    alloc::vec![0.0, 0.005, 0.01, 0.07, 0.2]
}

/// Train one model per lambda and pick the one with the smallest mean |dE|
/// over validation rollouts. Ties break toward smaller lambda; a grid where
/// every point diverges is an error.
pub fn cross_validate_lambda(
    config: &TrainConfig,
    dataset: &Dataset,
    grid: &[f64],
    validation_ics: &[State],
    horizon_s: f64,
    sys: &SystemParams,
) -> Result<CrossValResult> {
    if grid.is_empty() {
        return Err(CoreError::Config(String::from("empty lambda grid")));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = TrainConfig {
            lambda_h: lambda,
            ..config.clone()
        };
        let outcome = train(&cfg, dataset, sys)?;
        if outcome.diverged {
            scores.push(LambdaScore {
                lambda,
                mean_abs_de_pct: f64::INFINITY,
                diverged: true,
            });
            continue;
        }
        let m = evaluation::metrics(
            &outcome.model,
            validation_ics,
            horizon_s,
            evaluation::EVAL_DT,
            sys,
        );
        scores.push(LambdaScore {
            lambda,
            mean_abs_de_pct: m.mean,
            diverged: m.diverged,
        });
    }
    // Argmin in increasing-lambda order so ties resolve toward smaller
    // lambda; diverged entries never win.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].lambda.partial_cmp(&scores[b].lambda).unwrap());
    let mut best: Option<usize> = None;
    for &i in &order {
        if scores[i].diverged {
            continue;
        }
        match best {
            Some(b) if scores[i].mean_abs_de_pct >= scores[b].mean_abs_de_pct => {}
            _ => best = Some(i),
        }
    }
    match best {
        Some(i) => Ok(CrossValResult {
            best_lambda: scores[i].lambda,
            scores,
        }),
        None => Err(CoreError::AllDiverged),
    }
}
