//! Stage timings of the online/offline workflow and FOM/ROM speedups.
//!
//! All timings run on a single worker thread so stages are comparable across
//! methods.

use std::time::Instant;

use crate::config::{ErrorField, Method, Propagation, RunConfig};
use crate::pipeline::{build_problem, build_solver};
use crate::propagate::{run_mc, run_sg};
use crate::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub method: Method,
    /// Sample count (Monte Carlo) or polynomial degree (stochastic Galerkin).
    pub grid_point: usize,
    pub n_samples: usize,
    /// FOM snapshot generation; excluded from [`TimingReport::total_s`].
    pub offline_fom_s: f64,
    pub find_trial_subspace_s: f64,
    pub build_rom_s: f64,
    pub solve_rom_s: f64,
    /// Set when no samples were solved.
    pub empty: bool,
}

impl TimingReport {
    pub fn total_s(&self) -> f64 {
        self.find_trial_subspace_s + self.build_rom_s + self.solve_rom_s
    }
}

pub fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| BenchError::Usage(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// One report per grid point; the offline stages are shared by all points.
pub fn run_timing(cfg: &RunConfig) -> Result<Vec<TimingReport>, BenchError> {
    single_thread(|| timing_inner(cfg))?
}

fn timing_inner(cfg: &RunConfig) -> Result<Vec<TimingReport>, BenchError> {
    let ivp = build_problem(cfg)?;
    let (solver, trained) = build_solver(cfg, &ivp)?;
    let (offline, find, build) = trained
        .as_ref()
        .map_or((0.0, 0.0, 0.0), |t| (t.offline_fom_s, t.find_trial_subspace_s, t.build_rom_s));
    let mut reports = Vec::new();
    let report = |grid_point, n_samples, solve, empty| TimingReport {
        method: cfg.method,
        grid_point,
        n_samples,
        offline_fom_s: offline,
        find_trial_subspace_s: find,
        build_rom_s: build,
        solve_rom_s: solve,
        empty,
    };
    match &cfg.propagation {
        Propagation::Mc { n_samples, seed, .. } => {
            for &n in n_samples {
                if n == 0 {
                    reports.push(report(0, 0, 0.0, true));
                    continue;
                }
                let start = Instant::now();
                run_mc_any(cfg, &solver, n, *seed)?;
                reports.push(report(n, n, start.elapsed().as_secs_f64(), false));
            }
        }
        Propagation::Sg { degrees, .. } => {
            for &p in degrees {
                let start = Instant::now();
                let run = run_sg(cfg, &ivp, &solver, p)?;
                run.solution.moments(ErrorField::FinalTime)?;
                reports.push(report(p, 0, start.elapsed().as_secs_f64(), false));
            }
        }
    }
    Ok(reports)
}

/// Sampling that also accepts a single sample (no variance needed for timing).
fn run_mc_any(cfg: &RunConfig, solver: &crate::pipeline::Solver, n: usize, seed: u64) -> Result<(), BenchError> {
    if n == 1 {
        let mu = cfg.distribution.sample_at(seed, 0);
        solver
            .as_sample_solver()
            .field(&mu, strom_core::mc::FieldKind::FinalTime)?;
        return Ok(());
    }
    run_mc(cfg, solver, n, seed, ErrorField::FinalTime)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupPoint {
    pub n_samples: usize,
    pub fom_s: f64,
    pub rom_s: f64,
    /// `fom_s / rom_s`; infinite when the ROM time is zero.
    pub speedup: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub fom_method: Method,
    pub rom_method: Method,
    pub points: Vec<SpeedupPoint>,
}

pub fn speedup_points(fom: &[TimingReport], rom: &[TimingReport]) -> Result<Vec<SpeedupPoint>, BenchError> {
    if fom.len() != rom.len() || fom.iter().zip(rom).any(|(a, b)| a.grid_point != b.grid_point) {
        return Err(BenchError::Usage("speedup runs must share their sample grid".into()));
    }
    Ok(fom
        .iter()
        .zip(rom)
        .map(|(f, r)| {
            let (fom_s, rom_s) = (f.total_s(), r.total_s());
            let speedup = if rom_s > 0.0 { fom_s / rom_s } else { f64::INFINITY };
            SpeedupPoint {
                n_samples: f.grid_point,
                fom_s,
                rom_s,
                speedup,
                flagged: rom_s <= 0.0,
            }
        })
        .collect())
}

/// Times the FOM and the ROM configuration on the same samples and seeds.
pub fn run_speedup(fom_cfg: &RunConfig, rom_cfg: &RunConfig) -> Result<SpeedupReport, BenchError> {
    match (&fom_cfg.propagation, &rom_cfg.propagation) {
        (Propagation::Mc { n_samples: a, seed: sa, .. }, Propagation::Mc { n_samples: b, seed: sb, .. })
            if a == b && sa == sb => {}
        _ => {
            return Err(BenchError::Usage(
                "speedup needs Monte Carlo runs with identical sample counts and seeds".into(),
            ))
        }
    }
    let fom = run_timing(fom_cfg)?;
    let rom = run_timing(rom_cfg)?;
    Ok(SpeedupReport {
        fom_method: fom_cfg.method,
        rom_method: rom_cfg.method,
        points: speedup_points(&fom, &rom)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(grid_point: usize, solve: f64) -> TimingReport {
        TimingReport {
            method: Method::StRom,
            grid_point,
            n_samples: grid_point,
            offline_fom_s: 9.0,
            find_trial_subspace_s: 0.0,
            build_rom_s: 0.0,
            solve_rom_s: solve,
            empty: false,
        }
    }

    #[test]
    fn total_excludes_offline_snapshots() {
        let mut r = report(10, 1.0);
        r.find_trial_subspace_s = 0.5;
        r.build_rom_s = 0.25;
        assert_eq!(r.total_s(), 1.75);
    }

    #[test]
    fn zero_rom_time_is_flagged_infinite() {
        let p = speedup_points(&[report(10, 2.0)], &[report(10, 0.0)]).unwrap();
        assert!(p[0].speedup.is_infinite() && p[0].flagged);
        let q = speedup_points(&[report(10, 2.0)], &[report(10, 0.5)]).unwrap();
        assert_eq!(q[0].speedup, 4.0);
        assert!(speedup_points(&[report(10, 2.0)], &[report(20, 0.5)]).is_err());
    }

    #[test]
    fn zero_samples_gives_an_empty_report() {
        let mut cfg = RunConfig::defaults(crate::config::ProblemKind::OneD, crate::config::Preset::Desk);
        cfg.method = Method::Fom;
        cfg.propagation = Propagation::Mc {
            n_samples: vec![0],
            seed: 0,
            repetitions: 1,
        };
        let r = run_timing(&cfg).unwrap();
        assert!(r[0].empty);
        assert_eq!(r[0].solve_rom_s, 0.0);
    }
}
