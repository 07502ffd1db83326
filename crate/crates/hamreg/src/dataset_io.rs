//! Dataset, loss-history and rollout-series files (CSV).
//!
//! Dataset layout: `#`-prefixed metadata lines (system, coordinates, split,
//! generation seed, grid spacing, sampling stride, one `ic=` line per
//! trajectory), then a header row, then one row per sample:
//! `traj_id,t,q...,p...,qdot...,pdot...,H_hat` in generalized coordinates or
//! `traj_id,t,x...,px...,xdot...,pxdot...,H_hat` in Cartesian ones. Floats
//! are written with 17 significant digits so parsing back is lossless.

use crate::error::{io_err, parse_err, CliError, Result};
use hamreg_core::models::Coords;
use hamreg_core::physics::SystemId;
use hamreg_core::training::{Dataset, HistoryRow, Provenance, Sample, Split};
use std::fmt::Write as _;
use std::path::Path;

/// Lossless float formatting (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(system: SystemId, coords: Coords) -> String {
    let (names, arity): (&[&str], usize) = match coords {
        Coords::Generalized => (&["q", "p", "qdot", "pdot"], system.dof()),
        Coords::Cartesian => (&["x", "px", "xdot", "pxdot"], system.cart_dim()),
    };
    let mut h = String::from("traj_id,t");
    for name in names {
        for i in 1..=arity {
            write!(h, ",{name}{i}").unwrap();
        }
    }
    h.push_str(",H_hat");
    h
}

/// Serialize a dataset to CSV text.
pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    writeln!(out, "# system={}", ds.system.name()).unwrap();
    writeln!(out, "# coords={}", ds.coords.name()).unwrap();
    writeln!(out, "# split={}", ds.split.name()).unwrap();
    writeln!(out, "# seed={}", ds.provenance.seed).unwrap();
    writeln!(out, "# dt={}", fmt_f64(ds.provenance.dt)).unwrap();
    writeln!(out, "# stride={}", ds.provenance.stride).unwrap();
    for ic in &ds.provenance.ics {
        let cells: Vec<String> = ic.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "# ic={}", cells.join(",")).unwrap();
    }
    writeln!(out, "{}", header(ds.system, ds.coords)).unwrap();
    for s in &ds.samples {
        let mut row = format!("{},{}", s.traj_id, fmt_f64(s.t));
        for &v in s.z.iter().chain(&s.zdot) {
            write!(row, ",{}", fmt_f64(v)).unwrap();
        }
        write!(row, ",{}", fmt_f64(s.h_hat)).unwrap();
        writeln!(out, "{row}").unwrap();
    }
    out
}

/// Parse a dataset from CSV text. `path` is used for diagnostics only.
pub fn dataset_from_csv(path: &Path, text: &str) -> Result<Dataset> {
    let mut system = None;
    let mut coords = None;
    let mut split = None;
    let mut seed = 0u64;
    let mut dt = 0.0f64;
    let mut stride = 1usize;
    let mut ics: Vec<Vec<f64>> = Vec::new();
    let mut samples = Vec::new();
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| parse_err(path, lineno, message);
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            let (key, value) = meta
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed metadata line {meta:?}")))?;
            match key.trim() {
                "system" => {
                    system = Some(
                        SystemId::parse(value).ok_or_else(|| bad(format!("bad system {value:?}")))?,
                    )
                }
                "coords" => {
                    coords = Some(
                        Coords::parse(value).ok_or_else(|| bad(format!("bad coords {value:?}")))?,
                    )
                }
                "split" => {
                    split = Some(
                        Split::parse(value).ok_or_else(|| bad(format!("bad split {value:?}")))?,
                    )
                }
                "seed" => seed = value.parse().map_err(|_| bad(format!("bad seed {value:?}")))?,
                "dt" => dt = value.parse().map_err(|_| bad(format!("bad dt {value:?}")))?,
                "stride" => {
                    stride = value.parse().map_err(|_| bad(format!("bad stride {value:?}")))?
                }
                "ic" => {
                    let ic: Option<Vec<f64>> =
                        value.split(',').map(|c| c.trim().parse().ok()).collect();
                    ics.push(ic.ok_or_else(|| bad(format!("bad ic {value:?}")))?);
                }
                other => return Err(bad(format!("unknown metadata key {other:?}"))),
            }
            continue;
        }
        let system = system.ok_or_else(|| bad("data before # system= line".into()))?;
        let coords = coords.ok_or_else(|| bad("data before # coords= line".into()))?;
        if !saw_header {
            let want = header(system, coords);
            if line != want {
                return Err(bad(format!("expected header {want:?}, got {line:?}")));
            }
            saw_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let dim = coords.state_dim(system);
        if cells.len() != 2 * dim + 3 {
            return Err(bad(format!(
                "expected {} cells, got {}",
                2 * dim + 3,
                cells.len()
            )));
        }
        let mut nums = Vec::with_capacity(cells.len() - 1);
        for c in &cells[1..] {
            nums.push(
                c.parse::<f64>()
                    .map_err(|_| bad(format!("bad float {c:?}")))?,
            );
        }
        samples.push(Sample {
            traj_id: cells[0]
                .parse()
                .map_err(|_| bad(format!("bad traj_id {:?}", cells[0])))?,
            t: nums[0],
            z: nums[1..1 + dim].to_vec(),
            zdot: nums[1 + dim..1 + 2 * dim].to_vec(),
            h_hat: nums[1 + 2 * dim],
        });
    }

    let system = system.ok_or_else(|| {
        CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "missing # system= metadata".into(),
        }
    })?;
    let dataset = Dataset {
        system,
        coords: coords.ok_or_else(|| CliError::Config("dataset missing coords metadata".into()))?,
        split: split.ok_or_else(|| CliError::Config("dataset missing split metadata".into()))?,
        samples,
        provenance: Provenance {
            dt,
            stride,
            ics,
            seed,
        },
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    std::fs::write(path, dataset_to_csv(ds)).map_err(|e| io_err(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    dataset_from_csv(path, &text)
}

/// Loss history: `epoch,loss,lr` per training epoch.
pub fn write_history(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut out = String::from("epoch,loss,lr\n");
    for row in history {
        writeln!(out, "{},{},{}", row.epoch, fmt_f64(row.loss), fmt_f64(row.lr)).unwrap();
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Rollout energy-error series: one `ic_id,t,abs_de_pct` row per reported
/// time sample, all initial conditions concatenated.
pub fn write_series(path: &Path, series: &[hamreg_core::evaluation::RolloutSeries]) -> Result<()> {
    let mut out = String::from("ic_id,t,abs_de_pct\n");
    for (id, s) in series.iter().enumerate() {
        for (t, v) in s.times.iter().zip(&s.abs_de_pct) {
            writeln!(out, "{id},{},{}", fmt_f64(*t), fmt_f64(*v)).unwrap();
        }
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hamreg_core::datagen;
    use hamreg_core::physics::SystemParams;

    #[test]
    fn round_trip_is_identity() {
        let sys = SystemParams::unit(9.81);
        for (system, split) in [
            (SystemId::Single, Split::Sparse),
            (SystemId::Double, Split::Sparse),
        ] {
            let ds = datagen::generate_dataset(system, split, 3, &sys).unwrap();
            let text = dataset_to_csv(&ds);
            let back = dataset_from_csv(Path::new("x.csv"), &text).unwrap();
            assert_eq!(ds, back);
        }
    }

    #[test]
    fn cartesian_round_trip_and_header() {
        let sys = SystemParams::unit(9.81);
        let ds = datagen::generate_dataset(SystemId::Single, Split::Sparse, 3, &sys)
            .unwrap()
            .to_cartesian(&sys)
            .unwrap();
        let text = dataset_to_csv(&ds);
        assert!(text.contains("traj_id,t,x1,x2,px1,px2,xdot1,xdot2,pxdot1,pxdot2,H_hat"));
        let back = dataset_from_csv(Path::new("x.csv"), &text).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn corrupt_rows_are_rejected() {
        let sys = SystemParams::unit(9.81);
        let ds = datagen::generate_dataset(SystemId::Single, Split::Sparse, 3, &sys).unwrap();
        let text = dataset_to_csv(&ds);
        let truncated = text.replace("traj_id,t,q1,p1,qdot1,pdot1,H_hat", "traj_id,t,q1");
        assert!(dataset_from_csv(Path::new("x.csv"), &truncated).is_err());
        let garbled = text.replacen("0.0000000000000000e0", "zero", 1);
        assert!(dataset_from_csv(Path::new("x.csv"), &garbled).is_err());
    }

    #[test]
    fn seventeen_digit_floats_survive() {
        let v = core::f64::consts::PI / 3.0;
        let s = fmt_f64(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
    }
}
