//! Uncertainty propagation for a configured method: Monte Carlo ensembles and
//! stochastic Galerkin expansions, reduced to moments on a chosen field.

use nalgebra::{DMatrix, DVector};
use strom_core::fom::ParametrizedIVP;
use strom_core::mc::{mc_propagate, FieldKind, MomentEstimate, MonteCarloRun};
use strom_core::rom::{ReducedModel, Regime};
use strom_core::sg::{
    build_poly_basis, gauss_quadrature, pce_moments, sg_space_solve, sg_spacetime_solve, PceCoefficients,
    PolyBasis, SpaceSgModel, SpaceTimeSgModel,
};

use crate::config::{ErrorField, RunConfig};
use crate::pipeline::Solver;
use crate::BenchError;

pub fn field_kind(field: ErrorField) -> FieldKind {
    match field {
        ErrorField::FinalTime => FieldKind::FinalTime,
        ErrorField::SpaceTime => FieldKind::Trajectory,
    }
}

pub fn run_mc(
    cfg: &RunConfig,
    solver: &Solver,
    n_samples: usize,
    seed: u64,
    field: ErrorField,
) -> Result<MonteCarloRun, BenchError> {
    Ok(mc_propagate(
        solver.as_sample_solver(),
        &cfg.distribution,
        n_samples,
        seed,
        field_kind(field),
    )?)
}

/// SG coefficients with the map that lifts them to full-space fields.
pub enum SgSolution {
    /// One expansion per time step.
    Steps {
        pce: Vec<PceCoefficients>,
        lift: Option<DMatrix<f64>>,
    },
    /// One expansion of the stacked trajectory.
    Stacked {
        pce: PceCoefficients,
        lift: Option<DMatrix<f64>>,
        n_s: usize,
        n_t: usize,
    },
}

pub struct SgRun {
    pub basis: PolyBasis,
    pub solution: SgSolution,
}

pub fn nodes_per_axis(cfg: &RunConfig, degree: usize) -> usize {
    match cfg.propagation {
        crate::config::Propagation::Sg {
            nodes_per_axis: Some(n),
            ..
        } => n,
        _ => degree + 1,
    }
}

pub fn run_sg(cfg: &RunConfig, ivp: &ParametrizedIVP, solver: &Solver, degree: usize) -> Result<SgRun, BenchError> {
    let basis = build_poly_basis(&cfg.distribution, degree)?;
    let quad = gauss_quadrature(&cfg.distribution, nodes_per_axis(cfg, degree))?;
    let solution = match solver {
        Solver::Fom(_) => SgSolution::Steps {
            pce: sg_space_solve(SpaceSgModel::Full(ivp), &basis, &quad)?,
            lift: None,
        },
        Solver::Rom(rom) => rom_sg(rom, &basis, &quad)?,
    };
    Ok(SgRun { basis, solution })
}

fn rom_sg(rom: &ReducedModel, basis: &PolyBasis, quad: &strom_core::sg::QuadratureRule) -> Result<SgSolution, BenchError> {
    Ok(match rom.regime {
        Regime::Space => SgSolution::Steps {
            pce: sg_space_solve(SpaceSgModel::Reduced(rom), basis, quad)?,
            lift: Some(rom.basis.columns.clone()),
        },
        Regime::SpaceTime => SgSolution::Stacked {
            pce: sg_spacetime_solve(SpaceTimeSgModel::Reduced(rom), basis, quad)?,
            lift: Some(rom.basis.columns.clone()),
            n_s: rom.n_s,
            n_t: rom.n_t,
        },
    })
}

impl SgSolution {
    /// Full-space final-time expansion.
    pub fn final_pce(&self) -> Result<PceCoefficients, BenchError> {
        match self {
            SgSolution::Steps { pce, lift } => {
                let last = pce.last().ok_or_else(|| BenchError::Usage("no time steps".into()))?;
                Ok(match lift {
                    Some(phi) => last.lift(phi)?,
                    None => last.clone(),
                })
            }
            SgSolution::Stacked { pce, lift, n_s, n_t } => {
                let rows = match lift {
                    Some(phi) => phi.rows((n_t - 1) * n_s, *n_s).into_owned(),
                    None => {
                        let mut sel = DMatrix::zeros(*n_s, n_s * n_t);
                        for i in 0..*n_s {
                            sel[(i, (n_t - 1) * n_s + i)] = 1.0;
                        }
                        sel
                    }
                };
                Ok(pce.lift(&rows)?)
            }
        }
    }

    pub fn moments(&self, field: ErrorField) -> Result<MomentEstimate, BenchError> {
        match (self, field) {
            (_, ErrorField::FinalTime) => Ok(pce_moments(&self.final_pce()?, None)?),
            (SgSolution::Steps { pce, lift }, ErrorField::SpaceTime) => {
                let parts = pce
                    .iter()
                    .map(|c| pce_moments(c, lift.as_ref()))
                    .collect::<Result<Vec<_>, _>>()?;
                let len: usize = parts.iter().map(|m| m.mean.len()).sum();
                let mean = DVector::from_iterator(len, parts.iter().flat_map(|m| m.mean.iter().copied()));
                let variance = DVector::from_iterator(len, parts.iter().flat_map(|m| m.variance.iter().copied()));
                Ok(MomentEstimate {
                    mean,
                    variance,
                    n_samples: 0,
                })
            }
            (SgSolution::Stacked { pce, lift, .. }, ErrorField::SpaceTime) => Ok(pce_moments(pce, lift.as_ref())?),
        }
    }
}
