mod common;

use common::rel_err;
use strom_core::fom::{fom_solve, ParametrizedIVP};
use strom_core::mc::{sample_parameters, ParameterDistribution};
use strom_core::spacetime::st_solve;

#[test]
fn stacked_system_matches_sequential_stepping() {
    let ivp = ParametrizedIVP::advection_diffusion_1d(15, 0.05, 1.0, 1.0).unwrap();
    assert_eq!(ivp.n_t, 20);
    let mus = sample_parameters(&ParameterDistribution::advection_diffusion_1d(), 20, 11).unwrap();
    for mu in &mus {
        let st = st_solve(&ivp, mu).unwrap().stacked();
        let seq = fom_solve(&ivp, mu).unwrap().stacked();
        assert!(rel_err(&st, &seq) <= 1e-10, "mu = {mu:?}");
    }
}

#[test]
fn stacked_system_matches_sequential_stepping_in_2d() {
    let ivp = ParametrizedIVP::advection_diffusion_2d(6, 5, 0.1, 1.0, 1.0).unwrap();
    let mus = sample_parameters(&ParameterDistribution::advection_diffusion_2d(), 5, 3).unwrap();
    for mu in &mus {
        let st = st_solve(&ivp, mu).unwrap().stacked();
        let seq = fom_solve(&ivp, mu).unwrap().stacked();
        assert!(rel_err(&st, &seq) <= 1e-10);
    }
}

#[test]
fn solution_is_positive_under_a_positive_source() {
    let ivp = common::desk_1d();
    let u = fom_solve(&ivp, &[1.0, 0.015]).unwrap();
    assert!(u.final_state().iter().all(|&v| v > 0.0));
}
