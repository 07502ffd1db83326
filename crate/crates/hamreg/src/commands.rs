//! Subcommand implementations: dataset generation, training, evaluation,
//! penalty-weight cross-validation, and end-to-end result-table
//! reproduction.

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::dataset_io;
use crate::error::{io_err, CliError, Result};
use crate::jobs;
use crate::table::{self, TableRow};
use hamreg_core::datagen;
use hamreg_core::evaluation::{self, EnergyMetrics, RolloutSeries};
use hamreg_core::models::ModelFamily;
use hamreg_core::nn::LrSchedule;
use hamreg_core::physics::{State, SystemId, SystemParams};
use hamreg_core::training::{self, Dataset, Split, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Default evaluation protocol: ten unseen initial conditions, 100 s.
pub const DEFAULT_N_ICS: usize = 10;
/// Seed offset separating test-IC draws from training-IC draws.
const TEST_IC_SEED_OFFSET: u64 = 10_000;

/// Metrics file payload (values are % of the maximum potential energy).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsJson {
    pub scheme: String,
    pub dataset_split: String,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub n_ics: usize,
    pub horizon_s: f64,
    pub diverged: bool,
}

impl MetricsJson {
    pub fn new(scheme: &str, split: Split, m: &EnergyMetrics) -> Self {
        MetricsJson {
            scheme: scheme.into(),
            dataset_split: split.name().into(),
            mean: m.mean,
            std: m.std,
            max: m.max,
            n_ics: m.n_ics,
            horizon_s: m.horizon_s,
            diverged: m.diverged,
        }
    }
}

/// Display name of a training scheme: the family, with the level-penalty
/// suffix when the penalty is active.
pub fn scheme_name(family: ModelFamily, lambda_h: f64) -> String {
    let base = match family {
        ModelFamily::Baseline => "Baseline",
        ModelFamily::Hnn => "HNN",
        ModelFamily::Chnn => "CHNN",
        ModelFamily::Lnn => "LNN",
    };
    if lambda_h > 0.0 && family.has_energy() {
        format!("{base} + H-Reg.")
    } else {
        base.into()
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization: {e}")))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Generate a training dataset and write it as CSV.
pub fn cmd_generate(system: SystemId, split: Split, seed: u64, out: &Path) -> Result<usize> {
    let sys = SystemParams::default_for(system);
    let ds = datagen::generate_dataset(system, split, seed, &sys)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    dataset_io::write_dataset(out, &ds)?;
    Ok(ds.samples.len())
}

fn load_or_generate_dataset(config: &RunConfig) -> Result<Dataset> {
    match &config.dataset {
        Some(path) => {
            let ds = dataset_io::read_dataset(path)?;
            if ds.system != config.system || ds.split != config.split {
                return Err(CliError::Config(format!(
                    "dataset {} is {}/{}, config wants {}/{}",
                    path.display(),
                    ds.system.name(),
                    ds.split.name(),
                    config.system.name(),
                    config.split.name()
                )));
            }
            Ok(ds)
        }
        None => {
            let sys = SystemParams::default_for(config.system);
            datagen::generate_dataset(config.system, config.split, config.seed, &sys)
                .map_err(CliError::from)
        }
    }
}

/// Outcome of a training command: where the artifacts went and whether the
/// run diverged.
#[derive(Debug)]
pub struct TrainSummary {
    pub checkpoint_path: PathBuf,
    pub history_path: PathBuf,
    pub final_loss: Option<f64>,
    pub diverged: bool,
}

/// Train per the run config; write `checkpoint.json` and `history.csv` into
/// the output directory.
pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    let dataset = load_or_generate_dataset(config)?;
    let sys = SystemParams::default_for(config.system);
    let outcome = training::train(&config.train_config(), &dataset, &sys)?;
    ensure_dir(&config.out_dir)?;
    let checkpoint_path = config.out_dir.join("checkpoint.json");
    let history_path = config.out_dir.join("history.csv");
    checkpoint::save(
        &checkpoint_path,
        &Checkpoint {
            model: outcome.model,
            split: config.split,
            lambda_h: config.lambda_h,
            seed: config.seed,
            data_seed: dataset.provenance.seed,
            diverged: outcome.diverged,
        },
    )?;
    dataset_io::write_history(&history_path, &outcome.history)?;
    Ok(TrainSummary {
        checkpoint_path,
        history_path,
        final_loss: outcome.history.last().map(|r| r.loss),
        diverged: outcome.diverged,
    })
}

fn test_ics(system: SystemId, n_ics: usize, seed: u64, data_seed: u64) -> Vec<State> {
    let training = datagen::training_ics(system, data_seed);
    evaluation::sample_test_ics(system, n_ics, seed.wrapping_add(TEST_IC_SEED_OFFSET), &training)
}

fn evaluate_checkpoint(
    ck: &Checkpoint,
    n_ics: usize,
    horizon_s: f64,
    seed: u64,
) -> (EnergyMetrics, Vec<RolloutSeries>) {
    if ck.diverged {
        // A diverged training run gets no rollouts; the row is just flagged.
        let m = EnergyMetrics {
            mean: f64::NAN,
            std: f64::NAN,
            max: f64::NAN,
            n_ics,
            horizon_s,
            diverged: true,
        };
        return (m, Vec::new());
    }
    let sys = SystemParams::default_for(ck.model.system);
    let ics = test_ics(ck.model.system, n_ics, seed, ck.data_seed);
    let series: Vec<RolloutSeries> = ics
        .iter()
        .map(|ic| {
            evaluation::energy_error_rollout(&ck.model, ic, horizon_s, evaluation::EVAL_DT, &sys)
        })
        .collect();
    let m = evaluation::pool_metrics(&series, ics.len(), horizon_s);
    (m, series)
}

/// Evaluate a checkpoint from unseen initial conditions; write
/// `metrics.json` and `series.csv` into the output directory.
pub fn cmd_evaluate(
    checkpoint_path: &Path,
    n_ics: usize,
    horizon_s: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<MetricsJson> {
    let ck = checkpoint::load(checkpoint_path)?;
    let (metrics, series) = evaluate_checkpoint(&ck, n_ics, horizon_s, seed);
    ensure_dir(out_dir)?;
    let json = MetricsJson::new(&scheme_name(ck.model.family, ck.lambda_h), ck.split, &metrics);
    write_json(&out_dir.join("metrics.json"), &json)?;
    dataset_io::write_series(&out_dir.join("series.csv"), &series)?;
    Ok(json)
}

/// Cross-validation report written by `cmd_crossval`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CrossValJson {
    pub best_lambda: f64,
    pub scores: Vec<CrossValScoreJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CrossValScoreJson {
    pub lambda: f64,
    pub mean_abs_de_pct: f64,
    pub diverged: bool,
}

/// Pick the level-penalty weight over the config's grid; write
/// `crossval.json` into the output directory.
pub fn cmd_crossval(config: &RunConfig) -> Result<CrossValJson> {
    let dataset = load_or_generate_dataset(config)?;
    let sys = SystemParams::default_for(config.system);
    let ics = test_ics(config.system, DEFAULT_N_ICS, config.seed, dataset.provenance.seed);
    let result = training::cross_validate_lambda(
        &config.train_config(),
        &dataset,
        &config.lambda_grid,
        &ics,
        evaluation::EVAL_HORIZON_S,
        &sys,
    )?;
    let json = CrossValJson {
        best_lambda: result.best_lambda,
        scores: result
            .scores
            .iter()
            .map(|s| CrossValScoreJson {
                lambda: s.lambda,
                mean_abs_de_pct: s.mean_abs_de_pct,
                diverged: s.diverged,
            })
            .collect(),
    };
    ensure_dir(&config.out_dir)?;
    write_json(&config.out_dir.join("crossval.json"), &json)?;
    Ok(json)
}

/// Reproduction scale: the experiment protocol (`Full`) or a shortened run
/// with the same shape (`Desk`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Scale> {
        match s {
            "full" => Some(Scale::Full),
            "desk" => Some(Scale::Desk),
            _ => None,
        }
    }

    pub fn epochs(self) -> usize {
        match self {
            Scale::Full => 150_000,
            Scale::Desk => 30_000,
        }
    }

    pub fn schedule(self) -> LrSchedule {
        match self {
            Scale::Full => LrSchedule::full_scale(),
            Scale::Desk => LrSchedule::desk_scale(),
        }
    }
}

/// The six training schemes of a result table, with the cross-validated
/// penalty weights per system.
pub fn table_schemes(system: SystemId) -> Vec<(ModelFamily, f64)> {
    let (hnn_reg, chnn_reg) = match system {
        SystemId::Single => (0.07, 0.01),
        SystemId::Double => (0.2, 0.005),
    };
    vec![
        (ModelFamily::Baseline, 0.0),
        (ModelFamily::Hnn, 0.0),
        (ModelFamily::Hnn, hnn_reg),
        (ModelFamily::Chnn, 0.0),
        (ModelFamily::Chnn, chnn_reg),
        (ModelFamily::Lnn, 0.0),
    ]
}

fn run_dir_name(family: ModelFamily, lambda_h: f64, split: Split) -> String {
    let reg = if lambda_h > 0.0 { "-reg" } else { "" };
    format!("{}{}_{}", family.name(), reg, split.name())
}

/// Reproduce a result table end to end: generate both splits, train all six
/// schemes on each, evaluate from unseen initial conditions, and render the
/// table. Per-run artifacts land in subdirectories of `out_dir`; divergence
/// of individual runs is tolerated and rendered as "-".
pub fn cmd_reproduce(system: SystemId, scale: Scale, seed: u64, out_dir: &Path) -> Result<String> {
    let sys = SystemParams::default_for(system);
    ensure_dir(out_dir)?;
    let mut datasets = Vec::new();
    for split in [Split::Full, Split::Sparse] {
        let ds = datagen::generate_dataset(system, split, seed, &sys)?;
        dataset_io::write_dataset(&out_dir.join(format!("dataset_{}.csv", split.name())), &ds)?;
        datasets.push(ds);
    }

    struct RunResult {
        metrics: Result<EnergyMetrics>,
    }
    let mut job_list: Vec<Box<dyn FnOnce() -> RunResult + Send>> = Vec::new();
    let mut labels = Vec::new();
    for (family, lambda_h) in table_schemes(system) {
        for ds in &datasets {
            let config = TrainConfig {
                family,
                layer_sizes: TrainConfig::default_layer_sizes(family, system),
                epochs: scale.epochs(),
                schedule: scale.schedule(),
                lambda_h,
                seed,
            };
            let dir = out_dir.join(run_dir_name(family, lambda_h, ds.split));
            labels.push((family, lambda_h, ds.split));
            let ds = ds.clone();
            let sys = sys;
            job_list.push(Box::new(move || {
                let metrics = (|| -> Result<EnergyMetrics> {
                    ensure_dir(&dir)?;
                    let outcome = training::train(&config, &ds, &sys)?;
                    let ck = Checkpoint {
                        model: outcome.model,
                        split: ds.split,
                        lambda_h: config.lambda_h,
                        seed: config.seed,
                        data_seed: ds.provenance.seed,
                        diverged: outcome.diverged,
                    };
                    checkpoint::save(&dir.join("checkpoint.json"), &ck)?;
                    dataset_io::write_history(&dir.join("history.csv"), &outcome.history)?;
                    let (metrics, series) =
                        evaluate_checkpoint(&ck, DEFAULT_N_ICS, evaluation::EVAL_HORIZON_S, seed);
                    let json = MetricsJson::new(
                        &scheme_name(config.family, config.lambda_h),
                        ds.split,
                        &metrics,
                    );
                    write_json(&dir.join("metrics.json"), &json)?;
                    dataset_io::write_series(&dir.join("series.csv"), &series)?;
                    Ok(metrics)
                })();
                RunResult { metrics }
            }));
        }
    }
    let results = jobs::run_all(job_list, jobs::thread_limit());

    let mut rows = Vec::new();
    for (i, (family, lambda_h, _)) in labels.iter().enumerate().step_by(2) {
        let take = |r: &RunResult| -> Result<EnergyMetrics> {
            r.metrics.as_ref().map(|m| m.clone()).map_err(|e| match e {
                CliError::Core(c) => CliError::Config(format!("{c}")),
                other => CliError::Config(format!("{other}")),
            })
        };
        rows.push(TableRow {
            scheme: scheme_name(*family, *lambda_h),
            full: Some(take(&results[i])?),
            sparse: Some(take(&results[i + 1])?),
        });
    }
    debug_assert_eq!(
        rows.iter().map(|r| r.scheme.clone()).collect::<Vec<_>>(),
        table::SCHEME_ORDER.to_vec()
    );
    let title = format!(
        "{} pendulum energy error over {:.0} s, % of max potential ({} scale, seed {seed})",
        system.name(),
        evaluation::EVAL_HORIZON_S,
        match scale {
            Scale::Full => "full",
            Scale::Desk => "desk",
        }
    );
    let text = table::render(&title, &rows);
    std::fs::write(out_dir.join("table.txt"), &text)
        .map_err(|e| io_err(&out_dir.join("table.txt"), e))?;
    Ok(text)
}
