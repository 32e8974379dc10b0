//! CSV and JSON outputs. Floating-point values are written with 17
//! significant digits so files re-read to identical values.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde_json::{json, Value};
use strom_core::fom::StateTrajectory;
use strom_core::mc::MomentEstimate;
use strom_core::pod::Basis;
use strom_core::sg::PceCoefficients;

use crate::config::RunConfig;
use crate::convergence::ErrorReport;
use crate::timing::{SpeedupReport, TimingReport};
use crate::BenchError;

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        context: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> BenchError + '_ {
    move |e| BenchError::Data(format!("{}: {e}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), BenchError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_timing_csv(path: &Path, reports: &[TimingReport]) -> Result<(), BenchError> {
    write_csv(
        path,
        &[
            "grid_point",
            "method",
            "n_samples",
            "offline_fom_s",
            "find_trial_subspace_s",
            "build_rom_s",
            "solve_rom_s",
            "total_s",
            "empty",
        ],
        reports.iter().map(|r| {
            vec![
                r.grid_point.to_string(),
                r.method.to_string(),
                r.n_samples.to_string(),
                fmt_f64(r.offline_fom_s),
                fmt_f64(r.find_trial_subspace_s),
                fmt_f64(r.build_rom_s),
                fmt_f64(r.solve_rom_s),
                fmt_f64(r.total_s()),
                r.empty.to_string(),
            ]
        }),
    )
}

pub fn write_speedup_csv(path: &Path, report: &SpeedupReport) -> Result<(), BenchError> {
    write_csv(
        path,
        &["grid_point", "fom_s", "rom_s", "speedup", "flagged"],
        report.points.iter().map(|p| {
            vec![
                p.n_samples.to_string(),
                fmt_f64(p.fom_s),
                fmt_f64(p.rom_s),
                fmt_f64(p.speedup),
                p.flagged.to_string(),
            ]
        }),
    )
}

pub fn write_errors_csv(path: &Path, report: &ErrorReport) -> Result<(), BenchError> {
    write_csv(
        path,
        &["grid_point", "rel_mean_error", "rel_var_error", "repetitions"],
        report.points.iter().map(|p| {
            vec![
                p.grid_point.to_string(),
                fmt_f64(p.rel_mean_error),
                fmt_f64(p.rel_var_error),
                p.repetitions.to_string(),
            ]
        }),
    )
}

pub fn write_moments_csv(path: &Path, m: &MomentEstimate) -> Result<(), BenchError> {
    write_csv(
        path,
        &["dof_index", "mean", "variance"],
        m.mean
            .iter()
            .zip(m.variance.iter())
            .enumerate()
            .map(|(i, (a, v))| vec![i.to_string(), fmt_f64(*a), fmt_f64(*v)]),
    )
}

pub fn read_moments_csv(path: &Path, n_samples: usize) -> Result<MomentEstimate, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().collect::<Vec<_>>() != ["dof_index", "mean", "variance"] {
        return Err(BenchError::Data(format!("{}: unexpected header", path.display())));
    }
    let mut mean = Vec::new();
    let mut variance = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let parse = |k: usize| -> Result<f64, BenchError> {
            rec.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| BenchError::Data(format!("{}: bad value on data row {}", path.display(), line + 1)))
        };
        if rec.get(0).and_then(|s| s.parse::<usize>().ok()) != Some(line) {
            return Err(BenchError::Data(format!("{}: dof indices out of order", path.display())));
        }
        mean.push(parse(1)?);
        variance.push(parse(2)?);
    }
    Ok(MomentEstimate {
        mean: DVector::from_vec(mean),
        variance: DVector::from_vec(variance),
        n_samples,
    })
}

pub fn write_pce_csv(path: &Path, pce: &PceCoefficients) -> Result<(), BenchError> {
    write_csv(
        path,
        &["block", "dof_index", "value"],
        (0..pce.n_psi).flat_map(|j| {
            pce.block(j)
                .iter()
                .enumerate()
                .map(|(i, v)| vec![j.to_string(), i.to_string(), fmt_f64(*v)])
                .collect::<Vec<_>>()
        }),
    )
}

/// One row per entry, steps outer and dofs inner.
pub fn write_trajectory_csv(path: &Path, traj: &StateTrajectory) -> Result<(), BenchError> {
    write_csv(
        path,
        &["step", "dof_index", "value"],
        (0..traj.n_t()).flat_map(|n| {
            traj.states
                .column(n)
                .iter()
                .enumerate()
                .map(|(i, v)| vec![(n + 1).to_string(), i.to_string(), fmt_f64(*v)])
                .collect::<Vec<_>>()
        }),
    )
}

/// Column-major listing of the basis.
pub fn write_basis_csv(path: &Path, basis: &Basis) -> Result<(), BenchError> {
    let rows = basis.columns.nrows();
    write_csv(
        path,
        &["row", "column", "value"],
        basis
            .columns
            .iter()
            .enumerate()
            .map(|(k, v)| vec![(k % rows).to_string(), (k / rows).to_string(), fmt_f64(*v)]),
    )?;
    let sv = path.with_file_name("singular_values.csv");
    write_csv(
        &sv,
        &["index", "singular_value"],
        basis
            .singular_values
            .iter()
            .enumerate()
            .map(|(i, s)| vec![i.to_string(), fmt_f64(*s)]),
    )
}

fn hostname() -> String {
    fs::read_to_string("/proc/sys/kernel/hostname")
        .map(|s| s.trim().to_string())
        .ok()
        .or_else(|| std::env::var("HOSTNAME").ok())
        .unwrap_or_else(|| "unknown".into())
}

pub fn manifest(cfg: &RunConfig, command: &str, extra: Value) -> Value {
    let (prop_seed, reps) = match &cfg.propagation {
        crate::config::Propagation::Mc { seed, repetitions, .. } => (json!(seed), json!(repetitions)),
        crate::config::Propagation::Sg { .. } => (Value::Null, Value::Null),
    };
    json!({
        "command": command,
        "config": cfg.to_value(),
        "seeds": {
            "training": cfg.train_seed,
            "rrf": cfg.rrf_seed,
            "propagation": prop_seed,
            "reference": cfg.reference.seed,
        },
        "repetitions": reps,
        "error_field": cfg.error_field.as_str(),
        "software": {"name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")},
        "hostname": hostname(),
        "details": extra,
    })
}

pub fn write_manifest(dir: &Path, cfg: &RunConfig, command: &str, extra: Value) -> Result<PathBuf, BenchError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest(cfg, command, extra)).expect("json values serialize");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

/// A report destined for a results directory.
pub enum Report<'a> {
    Timing(&'a [TimingReport]),
    Speedup(&'a SpeedupReport),
    Errors(&'a ErrorReport),
}

/// Writes the report CSV and `manifest.json` into `dir`; returns the paths written.
pub fn emit_results(report: Report<'_>, cfg: &RunConfig, command: &str, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let (csv_path, extra) = match report {
        Report::Timing(r) => {
            let p = dir.join("timing.csv");
            write_timing_csv(&p, r)?;
            (p, json!({"grid": if matches!(cfg.propagation, crate::config::Propagation::Sg { .. }) { "degree" } else { "n_samples" }}))
        }
        Report::Speedup(r) => {
            let p = dir.join("speedup.csv");
            write_speedup_csv(&p, r)?;
            (p, json!({"fom_method": r.fom_method.as_str(), "rom_method": r.rom_method.as_str()}))
        }
        Report::Errors(r) => {
            let p = dir.join("errors.csv");
            write_errors_csv(&p, r)?;
            (
                p,
                json!({
                    "grid": r.grid_label,
                    "reference": r.reference_path.as_ref().map(|p| p.to_string_lossy().into_owned()),
                    "reference_samples": r.reference_samples,
                }),
            )
        }
    };
    let manifest = write_manifest(dir, cfg, command, extra)?;
    Ok(vec![csv_path, manifest])
}
