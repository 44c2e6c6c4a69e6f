//! Single runs and one-axis parameter sweeps with CSV summaries.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Policy, Precision, TopologyConfig};
use crate::error::{Error, Result};
use crate::fl::run_hierarchical;
use crate::scalar::Scalar;
use crate::timecost::SyncAlgo;
use crate::trace::write_trace;

/// Environment variable naming the directory all outputs go under.
pub const OUTPUT_ROOT_VAR: &str = "SAGIN_OUTPUT_ROOT";

pub const TRACE_FILE: &str = "trace.txt";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_RUNS_FILE: &str = "sweep_runs.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

/// `$SAGIN_OUTPUT_ROOT`, or the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// Run directory under `root`: the config's `output_dir`, else `fallback`.
pub fn run_dir(root: &Path, cfg: &ExperimentConfig, fallback: &str) -> PathBuf {
    root.join(cfg.output_dir.as_deref().unwrap_or(fallback))
}

/// One row of `summary.csv`. Divergence columns are NaN unless diagnostics
/// were enabled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub seed: u64,
    pub final_accuracy: f64,
    pub final_loss: f64,
    pub total_time: f64,
    pub round_time: f64,
    pub delta: f64,
    pub big_delta: f64,
    pub bound_margin: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: String,
}

fn run_typed<T: Scalar>(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (fed, trace) = run_hierarchical::<T>(cfg)?;
    let mut buf = Vec::new();
    write_trace(&fed, &trace, &mut buf)?;
    let (delta, big_delta) = trace.max_delta();
    let summary = RunSummary {
        policy: cfg.policy.to_string(),
        seed: cfg.seed,
        final_accuracy: trace.final_accuracy(),
        final_loss: trace.final_loss(),
        total_time: trace.total_time(),
        round_time: trace.global_records.first().map_or(0.0, |r| r.time.t_total),
        delta,
        big_delta,
        bound_margin: trace.bound_margin(),
    };
    Ok(RunOutput {
        summary,
        trace: String::from_utf8(buf).expect("trace is ASCII"),
    })
}

/// Trains `cfg` at its configured precision.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.training.precision {
        Precision::F32 => run_typed::<f32>(cfg),
        Precision::F64 => run_typed::<f64>(cfg),
    }
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Input(format!("csv: {other:?}")),
    }
}

/// Runs `cfg` and writes `trace.txt` and `summary.csv` into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    let out = run(cfg)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(TRACE_FILE), &out.trace)?;
    write_csv(&dir.join(SUMMARY_FILE), std::slice::from_ref(&out.summary))?;
    Ok(out.summary)
}

/// Sweepable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// CNASA communication bound; switches the policy to CNASA.
    NGeo,
    Tau2,
    /// Classes per device.
    NonIid,
    /// Total devices; must divide evenly over the air nodes.
    NDevices,
    NAir,
    NSats,
    /// Orbital planes at a fixed satellite count; 1 keeps a single-orbit layout.
    Orbits,
    SyncAlgo,
    Policy,
}

const AXES: [(Axis, &str); 9] = [
    (Axis::NGeo, "n_geo"),
    (Axis::Tau2, "tau2"),
    (Axis::NonIid, "non_iid"),
    (Axis::NDevices, "n_devices"),
    (Axis::NAir, "n_air"),
    (Axis::NSats, "n_sats"),
    (Axis::Orbits, "orbits"),
    (Axis::SyncAlgo, "sync_algo"),
    (Axis::Policy, "policy"),
];

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = AXES.iter().find(|(a, _)| a == self).map(|(_, n)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AXES.iter().find(|(_, n)| *n == s).map(|(a, _)| *a).ok_or_else(|| {
            let names: Vec<&str> = AXES.iter().map(|(_, n)| *n).collect();
            Error::config("axis", format!("unknown axis `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

fn count(axis: Axis, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::config(axis.to_string(), format!("`{value}` is not a non-negative integer")))
}

fn per(axis: Axis, total: usize, parts: usize) -> Result<usize> {
    if parts == 0 || !total.is_multiple_of(parts) {
        return Err(Error::config(
            axis.to_string(),
            format!("{total} does not divide evenly over {parts}"),
        ));
    }
    Ok(total / parts)
}

impl Axis {
    /// `base` with this axis set to `value`, validated.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let topo = &mut cfg.topology;
        match self {
            Axis::NGeo => cfg.policy = Policy::Cnasa { n_geo: count(self, value)? },
            Axis::Tau2 => cfg.training.tau2 = count(self, value)?,
            Axis::NonIid => cfg.data.classes_per_device = count(self, value)?,
            Axis::NDevices => {
                let d = per(self, count(self, value)?, topo.n_air())?;
                match topo {
                    TopologyConfig::SingleOrbit { devices_per_air, .. }
                    | TopologyConfig::Walker { devices_per_air, .. } => *devices_per_air = d,
                }
            }
            Axis::NAir => {
                let n = count(self, value)?;
                let sats = topo.n_sats();
                match topo {
                    TopologyConfig::SingleOrbit { n_air, .. } => *n_air = n,
                    TopologyConfig::Walker { air_per_cell, .. } => *air_per_cell = per(self, n, sats)?,
                }
            }
            Axis::NSats => {
                let n = count(self, value)?;
                match topo {
                    TopologyConfig::SingleOrbit { n_sats, .. } => *n_sats = n,
                    TopologyConfig::Walker {
                        n_planes,
                        sats_per_plane,
                        ..
                    } => *sats_per_plane = per(self, n, *n_planes)?,
                }
            }
            Axis::Orbits => {
                let planes = count(self, value)?;
                let (sats, air) = (topo.n_sats(), topo.n_air());
                *topo = match *topo {
                    TopologyConfig::SingleOrbit { .. } if planes == 1 => *topo,
                    TopologyConfig::Walker {
                        altitude_km,
                        devices_per_air,
                        ..
                    } if planes == 1 => TopologyConfig::SingleOrbit {
                        n_sats: sats,
                        altitude_km,
                        n_air: air,
                        devices_per_air,
                    },
                    TopologyConfig::SingleOrbit {
                        altitude_km,
                        devices_per_air,
                        ..
                    } => TopologyConfig::Walker {
                        n_planes: planes,
                        sats_per_plane: per(self, sats, planes)?,
                        inclination_deg: 85.0,
                        altitude_km,
                        air_per_cell: per(self, air, sats)?,
                        devices_per_air,
                    },
                    TopologyConfig::Walker {
                        inclination_deg,
                        altitude_km,
                        air_per_cell,
                        devices_per_air,
                        ..
                    } => TopologyConfig::Walker {
                        n_planes: planes,
                        sats_per_plane: per(self, sats, planes)?,
                        inclination_deg,
                        altitude_km,
                        air_per_cell,
                        devices_per_air,
                    },
                };
            }
            Axis::SyncAlgo => {
                cfg.training.sync_algo = match value {
                    "ring" => SyncAlgo::Ring,
                    "gossip" => SyncAlgo::Gossip,
                    _ => return Err(Error::config("sync_algo", format!("unknown algorithm `{value}`"))),
                }
            }
            Axis::Policy => cfg.policy = value.parse()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One cell of `sweep_runs.csv`. Failed cells keep their error in `status`
/// and NaN metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub value: String,
    pub seed: u64,
    pub status: String,
    pub final_accuracy: f64,
    pub final_loss: f64,
    pub total_time: f64,
    pub round_time: f64,
    pub delta: f64,
    pub big_delta: f64,
    pub bound_margin: f64,
}

impl SweepRun {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One row of `sweep_summary.csv`: mean and sample standard deviation over
/// the successful seeds of one axis value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub runs: usize,
    pub failed: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub loss_mean: f64,
    pub loss_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
    pub round_time_mean: f64,
    pub big_delta_mean: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: Axis,
    pub runs: Vec<SweepRun>,
    pub summary: Vec<SweepRow>,
}

/// Numeric values sort numerically, everything else lexically after them.
fn value_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize(value: &str, runs: &[SweepRun]) -> SweepRow {
    let ok: Vec<&SweepRun> = runs.iter().filter(|r| r.value == value && r.ok()).collect();
    let total = runs.iter().filter(|r| r.value == value).count();
    let col = |f: fn(&SweepRun) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    let (accuracy_mean, accuracy_std) = col(|r| r.final_accuracy);
    let (loss_mean, loss_std) = col(|r| r.final_loss);
    let (time_mean, time_std) = col(|r| r.total_time);
    SweepRow {
        value: value.to_owned(),
        runs: ok.len(),
        failed: total - ok.len(),
        accuracy_mean,
        accuracy_std,
        loss_mean,
        loss_std,
        time_mean,
        time_std,
        round_time_mean: col(|r| r.round_time).0,
        big_delta_mean: col(|r| r.big_delta).0,
    }
}

/// Runs every (value, seed) cell of `axis`. Invalid values fail the whole
/// sweep up front; errors inside a cell are recorded in its row. With `dir`
/// set, each cell writes its trace to `<dir>/<axis>=<value>/seed=<seed>/` and
/// both CSVs land in `dir`.
pub fn sweep(
    base: &ExperimentConfig,
    axis: Axis,
    values: &[String],
    seeds: &[u64],
    dir: Option<&Path>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::config("values", "need at least one value"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    let mut values = values.to_vec();
    values.sort_by(|a, b| value_order(a, b));
    values.dedup();
    let mut seeds = seeds.to_vec();
    seeds.sort_unstable();
    seeds.dedup();

    let mut cells = Vec::new();
    for v in &values {
        let cfg = axis.apply(base, v)?;
        for &seed in &seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            cells.push((v.clone(), c));
        }
    }

    let runs: Vec<SweepRun> = cells
        .par_iter()
        .map(|(value, cfg)| {
            let result = match dir {
                Some(d) => run_to_dir(cfg, &d.join(format!("{axis}={value}")).join(format!("seed={}", cfg.seed))),
                None => run(cfg).map(|o| o.summary),
            };
            match result {
                Ok(s) => SweepRun {
                    value: value.clone(),
                    seed: cfg.seed,
                    status: "ok".into(),
                    final_accuracy: s.final_accuracy,
                    final_loss: s.final_loss,
                    total_time: s.total_time,
                    round_time: s.round_time,
                    delta: s.delta,
                    big_delta: s.big_delta,
                    bound_margin: s.bound_margin,
                },
                Err(e) => SweepRun {
                    value: value.clone(),
                    seed: cfg.seed,
                    status: e.to_string(),
                    final_accuracy: f64::NAN,
                    final_loss: f64::NAN,
                    total_time: f64::NAN,
                    round_time: f64::NAN,
                    delta: f64::NAN,
                    big_delta: f64::NAN,
                    bound_margin: f64::NAN,
                },
            }
        })
        .collect();

    let summary: Vec<SweepRow> = values.iter().map(|v| summarize(v, &runs)).collect();
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
        write_csv(&d.join(SWEEP_RUNS_FILE), &runs)?;
        write_csv(&d.join(SWEEP_SUMMARY_FILE), &summary)?;
    }
    Ok(SweepResult { axis, runs, summary })
}
