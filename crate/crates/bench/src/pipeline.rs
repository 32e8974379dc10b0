//! Builds the problem, trains the trial subspace and assembles the solver a
//! configuration asks for.

use std::time::Instant;

use strom_core::fom::{FomSolver, ParametrizedIVP};
use strom_core::mc::{sample_parameters, SampleSolver};
use strom_core::pod::{collect_snapshots, pod_basis, rrf_basis, Basis, SnapshotKind};
use strom_core::rom::{build_space_rom, build_st_rom, ReducedModel};

use crate::config::{Method, ProblemKind, RunConfig};
use crate::BenchError;

pub fn build_problem(cfg: &RunConfig) -> Result<ParametrizedIVP, BenchError> {
    let ivp = match cfg.problem {
        ProblemKind::OneD => ParametrizedIVP::advection_diffusion_1d(cfg.nodes[0], cfg.dt, cfg.t_final, cfg.source_amplitude)?,
        ProblemKind::TwoD => ParametrizedIVP::advection_diffusion_2d(
            cfg.nodes[0],
            cfg.nodes[1],
            cfg.dt,
            cfg.t_final,
            cfg.source_amplitude,
        )?,
    };
    Ok(ivp)
}

pub fn training_parameters(cfg: &RunConfig) -> Result<Vec<Vec<f64>>, BenchError> {
    Ok(sample_parameters(&cfg.distribution, cfg.n_train, cfg.train_seed)?)
}

/// Snapshot layout used by a method; `None` for the FOM.
pub fn snapshot_kind(method: Method) -> Option<SnapshotKind> {
    match method {
        Method::Fom => None,
        Method::SpaceRom | Method::SpaceRomRrf => Some(SnapshotKind::Spatial),
        Method::StRom => Some(SnapshotKind::SpaceTime),
    }
}

/// The offline phase with its three timed stages.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ReducedModel,
    pub offline_fom_s: f64,
    pub find_trial_subspace_s: f64,
    pub build_rom_s: f64,
}

pub fn find_basis(cfg: &RunConfig, snapshots: &strom_core::pod::SnapshotMatrix) -> Result<Basis, BenchError> {
    let basis = match cfg.method {
        Method::SpaceRomRrf => rrf_basis(snapshots, cfg.rrf_k_hat, cfg.rrf_seed)?,
        _ => pod_basis(snapshots, cfg.e_tol)?,
    };
    Ok(basis)
}

/// Collects snapshots, computes the basis and builds the reduced model.
pub fn train(cfg: &RunConfig, ivp: &ParametrizedIVP) -> Result<Trained, BenchError> {
    let kind = snapshot_kind(cfg.method)
        .ok_or_else(|| BenchError::Usage("the full-order method has no training stage".into()))?;
    let mus = training_parameters(cfg)?;

    let start = Instant::now();
    let snapshots = collect_snapshots(ivp, &mus, kind)?;
    let offline_fom_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let basis = find_basis(cfg, &snapshots)?;
    let find_trial_subspace_s = start.elapsed().as_secs_f64();
    drop(snapshots);

    let start = Instant::now();
    let model = match cfg.method {
        Method::StRom => build_st_rom(ivp, &basis)?,
        _ => build_space_rom(ivp, &basis)?,
    };
    let build_rom_s = start.elapsed().as_secs_f64();

    Ok(Trained {
        model,
        offline_fom_s,
        find_trial_subspace_s,
        build_rom_s,
    })
}

/// A ready-to-sample solver.
pub enum Solver {
    Fom(FomSolver),
    Rom(ReducedModel),
}

impl Solver {
    pub fn as_sample_solver(&self) -> &dyn SampleSolver {
        match self {
            Solver::Fom(s) => s,
            Solver::Rom(m) => m,
        }
    }
}

/// The solver for `cfg.method`, training first when it is a ROM.
pub fn build_solver(cfg: &RunConfig, ivp: &ParametrizedIVP) -> Result<(Solver, Option<Trained>), BenchError> {
    if cfg.method.is_rom() {
        let trained = train(cfg, ivp)?;
        Ok((Solver::Rom(trained.model.clone()), Some(trained)))
    } else {
        Ok((Solver::Fom(FomSolver::new(ivp)?), None))
    }
}
