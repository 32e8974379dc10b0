#![allow(dead_code)]

use nalgebra::DVector;
use strom_core::fom::ParametrizedIVP;
use strom_core::mc::{sample_parameters, ParameterDistribution};

/// 1D desk problem: 63 interior nodes, 100 steps to `T = 1`, unit source.
pub fn desk_1d() -> ParametrizedIVP {
    ParametrizedIVP::advection_diffusion_1d(63, 0.01, 1.0, 1.0).unwrap()
}

pub fn training_set(n: usize, seed: u64) -> Vec<Vec<f64>> {
    sample_parameters(&ParameterDistribution::advection_diffusion_1d(), n, seed).unwrap()
}

pub fn rel_err(approx: &DVector<f64>, exact: &DVector<f64>) -> f64 {
    (approx - exact).norm() / exact.norm()
}
