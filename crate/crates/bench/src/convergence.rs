//! Moment errors against a cached high-sample FOM reference.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use strom_core::fom::{FomSolver, ParametrizedIVP};
use strom_core::mc::{mc_propagate, MomentEstimate};

use crate::config::{Propagation, RunConfig};
use crate::pipeline::{build_problem, build_solver};
use crate::propagate::{field_kind, run_mc, run_sg};
use crate::report::{read_moments_csv, write_moments_csv};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPoint {
    pub grid_point: usize,
    pub rel_mean_error: f64,
    pub rel_var_error: f64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `"n_samples"` or `"degree"`.
    pub grid_label: &'static str,
    pub points: Vec<ErrorPoint>,
    pub reference_path: Option<PathBuf>,
    pub reference_samples: usize,
}

/// `‖E_ref − E‖₂ / ‖E_ref‖₂` and the same for the variance.
pub fn relative_errors(reference: &MomentEstimate, approx: &MomentEstimate) -> Result<(f64, f64), BenchError> {
    if reference.mean.len() != approx.mean.len() || reference.variance.len() != approx.variance.len() {
        return Err(BenchError::Data(format!(
            "moment field shapes differ: reference {} vs approximation {}",
            reference.mean.len(),
            approx.mean.len()
        )));
    }
    let (nm, nv) = (reference.mean.norm(), reference.variance.norm());
    if nm == 0.0 || nv == 0.0 {
        return Err(BenchError::Data("reference moments have zero norm".into()));
    }
    Ok((
        (&reference.mean - &approx.mean).norm() / nm,
        (&reference.variance - &approx.variance).norm() / nv,
    ))
}

pub fn reference_path(cfg: &RunConfig) -> PathBuf {
    cfg.reference
        .path
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("reference_moments.csv"))
}

fn metadata_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Everything that determines the reference moments.
fn reference_signature(cfg: &RunConfig) -> Value {
    let tree = cfg.to_value();
    let mut problem = tree["problem"].clone();
    if let Some(p) = problem.as_object_mut() {
        p.remove("preset");
    }
    json!({
        "problem": problem,
        "distribution": tree["distribution"],
        "n_samples": cfg.reference.n_samples,
        "seed": cfg.reference.seed,
        "field": cfg.error_field.as_str(),
    })
}

/// Loads the cached reference when its metadata matches, otherwise samples
/// the FOM and writes the cache.
pub fn reference_moments(cfg: &RunConfig, ivp: &ParametrizedIVP) -> Result<(MomentEstimate, PathBuf), BenchError> {
    let path = reference_path(cfg);
    let meta_path = metadata_path(&path);
    let signature = reference_signature(cfg);
    let cached = fs::read_to_string(&meta_path)
        .ok()
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .is_some_and(|m| m == signature);
    if cached && path.exists() {
        log::info!("using cached reference moments {}", path.display());
        return Ok((read_moments_csv(&path, cfg.reference.n_samples)?, path));
    }
    log::info!(
        "computing reference moments with {} FOM samples, seed {}",
        cfg.reference.n_samples,
        cfg.reference.seed
    );
    let solver = FomSolver::new(ivp)?;
    let moments = mc_propagate(
        &solver,
        &cfg.distribution,
        cfg.reference.n_samples,
        cfg.reference.seed,
        field_kind(cfg.error_field),
    )?
    .moments;
    write_moments_csv(&path, &moments)?;
    let text = serde_json::to_string_pretty(&signature).expect("json values serialize");
    fs::write(&meta_path, text + "\n").map_err(|source| BenchError::Io {
        context: meta_path.display().to_string(),
        source,
    })?;
    Ok((moments, path))
}

pub fn run_convergence(cfg: &RunConfig) -> Result<ErrorReport, BenchError> {
    let ivp = build_problem(cfg)?;
    let (reference, path) = reference_moments(cfg, &ivp)?;
    run_convergence_against(cfg, &ivp, &reference, Some(path))
}

/// Errors of the configured method against given reference moments.
pub fn run_convergence_against(
    cfg: &RunConfig,
    ivp: &ParametrizedIVP,
    reference: &MomentEstimate,
    reference_path: Option<PathBuf>,
) -> Result<ErrorReport, BenchError> {
    let (solver, _) = build_solver(cfg, ivp)?;
    let mut points = Vec::new();
    let grid_label = match &cfg.propagation {
        Propagation::Mc {
            n_samples,
            seed,
            repetitions,
        } => {
            for &n in n_samples {
                if n < 2 {
                    return Err(BenchError::Usage(format!(
                        "convergence needs at least two samples per grid point, got {n}"
                    )));
                }
                let (mut em, mut ev) = (0.0, 0.0);
                for r in 0..*repetitions {
                    let run = run_mc(cfg, &solver, n, seed.wrapping_add(r as u64), cfg.error_field)?;
                    let (a, b) = relative_errors(reference, &run.moments)?;
                    em += a;
                    ev += b;
                }
                let reps = *repetitions as f64;
                points.push(ErrorPoint {
                    grid_point: n,
                    rel_mean_error: em / reps,
                    rel_var_error: ev / reps,
                    repetitions: *repetitions,
                });
            }
            "n_samples"
        }
        Propagation::Sg { degrees, .. } => {
            for &p in degrees {
                let run = run_sg(cfg, ivp, &solver, p)?;
                let (a, b) = relative_errors(reference, &run.solution.moments(cfg.error_field)?)?;
                points.push(ErrorPoint {
                    grid_point: p,
                    rel_mean_error: a,
                    rel_var_error: b,
                    repetitions: 1,
                });
            }
            "degree"
        }
    };
    Ok(ErrorReport {
        grid_label,
        points,
        reference_path,
        reference_samples: reference.n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn moments(mean: &[f64], var: &[f64]) -> MomentEstimate {
        MomentEstimate {
            mean: DVector::from_column_slice(mean),
            variance: DVector::from_column_slice(var),
            n_samples: 2,
        }
    }

    #[test]
    fn identical_moments_give_zero_error() {
        let m = moments(&[1.0, 2.0], &[0.5, 0.25]);
        assert_eq!(relative_errors(&m, &m).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn zero_approximation_gives_unit_error() {
        let r = moments(&[1.0, -2.0], &[0.5, 0.25]);
        let z = moments(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(relative_errors(&r, &z).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn hand_computed_three_vector() {
        let r = moments(&[1.0, 2.0, 2.0], &[3.0, 0.0, 4.0]);
        let a = moments(&[1.0, 2.0, 1.0], &[0.0, 0.0, 0.0]);
        let (em, ev) = relative_errors(&r, &a).unwrap();
        assert!((em - 1.0 / 3.0).abs() <= 1e-15);
        assert!((ev - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let r = moments(&[1.0, 2.0], &[1.0, 1.0]);
        let a = moments(&[1.0], &[1.0]);
        assert!(relative_errors(&r, &a).is_err());
    }

    #[test]
    fn metadata_sits_next_to_the_cache() {
        assert_eq!(
            metadata_path(Path::new("out/ref.csv")),
            PathBuf::from("out/ref.csv.meta.json")
        );
    }
}
