//! Run configuration files: flat `key = value` text, one setting per line.
//!
//! Recognized keys:
//!
//! * `system`       — `single` | `double` (required)
//! * `split`        — `f` | `s` (required)
//! * `family`       — `baseline` | `hnn` | `chnn` | `lnn` (required)
//! * `coords`       — `generalized` | `cartesian`; optional, must match the
//!   family's coordinate system (CHNN is Cartesian, the rest generalized)
//! * `layer_sizes`  — comma-separated, e.g. `2,32,32,1`; optional, defaults
//!   to the experiment architecture for the family/system
//! * `epochs`       — optional, default 150000
//! * `lr_schedule`  — `full`, `desk`, `constant:<rate>`, or an explicit
//!   piecewise list `<rate>@<epoch>,...` starting at epoch 0
//! * `lambda_h`     — energy-level penalty weight, optional, default 0
//! * `seed`         — optional, default 0
//! * `out_dir`      — output directory, optional, default `runs`
//! * `dataset`      — path to a dataset CSV; optional (generated from the
//!   system/split/seed when absent)
//! * `lambda_grid`  — comma-separated cross-validation grid; optional
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected.

use crate::error::{parse_err, CliError, Result};
use hamreg_core::models::{Coords, ModelFamily};
use hamreg_core::nn::LrSchedule;
use hamreg_core::physics::SystemId;
use hamreg_core::training::{Split, TrainConfig};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemId,
    pub split: Split,
    pub family: ModelFamily,
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub lambda_h: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: Option<PathBuf>,
    pub lambda_grid: Vec<f64>,
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            family: self.family,
            layer_sizes: self.layer_sizes.clone(),
            epochs: self.epochs,
            schedule: self.schedule.clone(),
            lambda_h: self.lambda_h,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config()
            .validate(self.system)
            .map_err(CliError::from)
    }
}

fn parse_schedule(v: &str) -> Option<LrSchedule> {
    match v {
        "full" => return Some(LrSchedule::full_scale()),
        "desk" => return Some(LrSchedule::desk_scale()),
        _ => {}
    }
    if let Some(rate) = v.strip_prefix("constant:") {
        return rate.parse().ok().map(LrSchedule::constant);
    }
    let mut rates = Vec::new();
    let mut starts: Vec<usize> = Vec::new();
    for piece in v.split(',') {
        let (rate, epoch) = piece.split_once('@')?;
        rates.push(rate.trim().parse().ok()?);
        starts.push(epoch.trim().parse().ok()?);
    }
    if starts.first() != Some(&0) {
        return None;
    }
    // Each rate starts at its epoch; the boundaries are the later starts.
    let schedule = LrSchedule {
        rates,
        boundaries: starts[1..].to_vec(),
    };
    schedule.validate().ok()?;
    Some(schedule)
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Option<Vec<T>> {
    v.split(',').map(|s| s.trim().parse().ok()).collect()
}

/// Parse a config file's contents. `path` is used for diagnostics only.
pub fn parse_config(path: &Path, text: &str) -> Result<RunConfig> {
    let mut system = None;
    let mut split = None;
    let mut family = None;
    let mut coords: Option<Coords> = None;
    let mut layer_sizes: Option<Vec<usize>> = None;
    let mut epochs = 150_000usize;
    let mut schedule = LrSchedule::full_scale();
    let mut lambda_h = 0.0f64;
    let mut seed = 0u64;
    let mut out_dir = PathBuf::from("runs");
    let mut dataset = None;
    let mut lambda_grid = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            parse_err(path, lineno, format!("expected key = value, got {line:?}"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| parse_err(path, lineno, format!("invalid {what}: {value:?}"));
        match key {
            "system" => system = Some(SystemId::parse(value).ok_or_else(|| bad("system"))?),
            "split" => split = Some(Split::parse(value).ok_or_else(|| bad("split"))?),
            "family" => family = Some(ModelFamily::parse(value).ok_or_else(|| bad("family"))?),
            "coords" => coords = Some(Coords::parse(value).ok_or_else(|| bad("coords"))?),
            "layer_sizes" => {
                layer_sizes = Some(parse_list(value).ok_or_else(|| bad("layer_sizes"))?)
            }
            "epochs" => epochs = value.parse().map_err(|_| bad("epochs"))?,
            "lr_schedule" => schedule = parse_schedule(value).ok_or_else(|| bad("lr_schedule"))?,
            "lambda_h" => lambda_h = value.parse().map_err(|_| bad("lambda_h"))?,
            "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
            "out_dir" => out_dir = PathBuf::from(value),
            "dataset" => dataset = Some(PathBuf::from(value)),
            "lambda_grid" => {
                lambda_grid = Some(parse_list(value).ok_or_else(|| bad("lambda_grid"))?)
            }
            _ => return Err(parse_err(path, lineno, format!("unknown key {key:?}"))),
        }
    }

    let system = system.ok_or_else(|| CliError::Config("missing key: system".into()))?;
    let split = split.ok_or_else(|| CliError::Config("missing key: split".into()))?;
    let family = family.ok_or_else(|| CliError::Config("missing key: family".into()))?;
    if let Some(c) = coords {
        if c != family.coords() {
            return Err(CliError::Config(format!(
                "family {} uses {} coordinates, config says {}",
                family.name(),
                family.coords().name(),
                c.name()
            )));
        }
    }
    let config = RunConfig {
        system,
        split,
        family,
        layer_sizes: layer_sizes
            .unwrap_or_else(|| TrainConfig::default_layer_sizes(family, system)),
        epochs,
        schedule,
        lambda_h,
        seed,
        out_dir,
        dataset,
        lambda_grid: lambda_grid.unwrap_or_else(hamreg_core::training::default_lambda_grid),
    };
    config.validate()?;
    Ok(config)
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::error::io_err(path, e))?;
    parse_config(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(Path::new("test.cfg"), text)
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("system = single\nsplit = s\nfamily = hnn\n").unwrap();
        assert_eq!(c.layer_sizes, vec![2, 32, 32, 1]);
        assert_eq!(c.epochs, 150_000);
        assert_eq!(c.lambda_h, 0.0);
        assert_eq!(c.seed, 0);
        assert_eq!(c.out_dir, PathBuf::from("runs"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse("system = single\nsplit = s\nfamily = hnn\nlearning_rate = 3\n");
        assert!(matches!(e, Err(CliError::Parse { line: 4, .. })));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let c = parse("# a comment\n\nsystem = double\nsplit = f\nfamily = chnn\n").unwrap();
        assert_eq!(c.system, SystemId::Double);
        assert_eq!(c.layer_sizes, vec![8, 128, 128, 1]);
    }

    #[test]
    fn coords_must_match_family() {
        let e = parse("system = single\nsplit = s\nfamily = hnn\ncoords = cartesian\n");
        assert!(matches!(e, Err(CliError::Config(_))));
        let ok = parse("system = single\nsplit = s\nfamily = chnn\ncoords = cartesian\n");
        assert!(ok.is_ok());
    }

    #[test]
    fn explicit_schedule_and_grid() {
        let c = parse(
            "system = single\nsplit = s\nfamily = hnn\n\
             lr_schedule = 1e-2@0, 1e-3@100, 1e-4@200\n\
             lambda_grid = 0, 0.07\nepochs = 300\n",
        )
        .unwrap();
        assert_eq!(c.schedule.rates, vec![1e-2, 1e-3, 1e-4]);
        assert_eq!(c.schedule.boundaries, vec![100, 200]);
        assert_eq!(c.lambda_grid, vec![0.0, 0.07]);
    }

    #[test]
    fn named_schedules() {
        let c = parse("system = single\nsplit = s\nfamily = hnn\nlr_schedule = desk\n").unwrap();
        assert_eq!(c.schedule, LrSchedule::desk_scale());
        let c = parse(
            "system = single\nsplit = s\nfamily = hnn\nlr_schedule = constant:0.003\n",
        )
        .unwrap();
        assert_eq!(c.schedule, LrSchedule::constant(0.003));
    }

    #[test]
    fn bad_values_are_parse_errors() {
        for bad in [
            "system = triple\nsplit = s\nfamily = hnn\n",
            "system = single\nsplit = q\nfamily = hnn\n",
            "system = single\nsplit = s\nfamily = hnn\nepochs = many\n",
            "system = single\nsplit = s\nfamily = hnn\nlr_schedule = 1e-3@5\n",
        ] {
            assert!(matches!(parse(bad), Err(CliError::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn missing_required_key_is_config_error() {
        assert!(matches!(
            parse("split = s\nfamily = hnn\n"),
            Err(CliError::Config(_))
        ));
    }
}
