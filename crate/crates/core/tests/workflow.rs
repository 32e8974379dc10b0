//! End-to-end offline/online workflow through the public API.

use strom_core::fom::{FomSolver, ParametrizedIVP};
use strom_core::mc::{mc_propagate, sample_parameters, FieldKind, ParameterDistribution};
use strom_core::pod::{collect_snapshots, pod_basis, SnapshotKind};
use strom_core::rom::build_st_rom;

#[test]
fn reduced_moments_track_full_order_moments() -> strom_core::error::Result<()> {
    let ivp = ParametrizedIVP::advection_diffusion_1d(63, 0.01, 1.0, 1.0)?;
    let dist = ParameterDistribution::advection_diffusion_1d();
    let train = sample_parameters(&dist, 20, 1)?;
    let snapshots = collect_snapshots(&ivp, &train, SnapshotKind::SpaceTime)?;
    let rom = build_st_rom(&ivp, &pod_basis(&snapshots, 0.999999)?)?;
    let reduced = mc_propagate(&rom, &dist, 1000, 0, FieldKind::FinalTime)?.moments;
    let full = mc_propagate(&FomSolver::new(&ivp)?, &dist, 1000, 0, FieldKind::FinalTime)?.moments;
    let err = (&reduced.mean - &full.mean).norm() / full.mean.norm();
    assert!(err < 1e-2, "mean error {err:e}");
    Ok(())
}
