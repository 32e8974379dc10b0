mod common;

use common::{desk_1d, rel_err, training_set};
use strom_core::fom::fom_solve;
use strom_core::pod::{collect_snapshots, pod_basis, Basis, SnapshotKind};
use strom_core::rom::{build_space_rom, build_st_rom, reconstruct, rom_solve};
use strom_core::spacetime::{st_solve, SpaceTimeSystem};

const HELD_OUT: [f64; 2] = [1.07, 0.0137];

#[test]
fn space_rom_final_state_error() {
    let ivp = desk_1d();
    let s = collect_snapshots(&ivp, &training_set(20, 1), SnapshotKind::Spatial).unwrap();
    let truth = fom_solve(&ivp, &HELD_OUT).unwrap().final_state();
    let mut errors = Vec::new();
    for e_tol in [1.0 - 1e-10, 0.999] {
        let rom = build_space_rom(&ivp, &pod_basis(&s, e_tol).unwrap()).unwrap();
        let u = reconstruct(&rom, &rom_solve(&rom, &HELD_OUT).unwrap()).unwrap();
        errors.push(rel_err(&u.final_state(), &truth));
    }
    assert!(errors[0] <= 1e-3, "{errors:?}");
    assert!(errors[1] > errors[0], "{errors:?}");
}

#[test]
fn spacetime_rom_stacked_error() {
    let ivp = desk_1d();
    let s = collect_snapshots(&ivp, &training_set(20, 1), SnapshotKind::SpaceTime).unwrap();
    let truth = fom_solve(&ivp, &HELD_OUT).unwrap().stacked();
    let mut errors = Vec::new();
    for e_tol in [1.0 - 1e-10, 0.999] {
        let rom = build_st_rom(&ivp, &pod_basis(&s, e_tol).unwrap()).unwrap();
        let u = reconstruct(&rom, &rom_solve(&rom, &HELD_OUT).unwrap()).unwrap();
        errors.push(rel_err(&u.stacked(), &truth));
    }
    assert!(errors[0] <= 1e-2, "{errors:?}");
    assert!(errors[1] > errors[0], "{errors:?}");
}

#[test]
fn identity_basis_reproduces_stacked_solution() {
    let ivp = strom_core::fom::ParametrizedIVP::advection_diffusion_1d(8, 0.1, 1.0, 1.0).unwrap();
    let rom = build_st_rom(&ivp, &Basis::identity(80)).unwrap();
    let u = reconstruct(&rom, &rom_solve(&rom, &HELD_OUT).unwrap()).unwrap();
    let truth = st_solve(&ivp, &HELD_OUT).unwrap();
    assert!((u.states - truth.states).amax() < 1e-12);
}

#[test]
fn spacetime_residual_is_orthogonal_to_the_basis() {
    let ivp = desk_1d();
    let s = collect_snapshots(&ivp, &training_set(20, 1), SnapshotKind::SpaceTime).unwrap();
    let basis = pod_basis(&s, 1.0 - 1e-8).unwrap();
    let rom = build_st_rom(&ivp, &basis).unwrap();
    let u = rom_solve(&rom, &HELD_OUT).unwrap();
    let sys = SpaceTimeSystem::new(&ivp).unwrap();
    let m = sys.matrix.evaluate(&HELD_OUT).unwrap();
    let b = sys.rhs.evaluate(&HELD_OUT).unwrap();
    let full = &basis.columns * u.values.column(0);
    let r = b - m.mul_vec(&full);
    let projected = basis.columns.tr_mul(&r);
    assert!(projected.norm() <= 1e-10 * r.norm().max(1.0), "{}", projected.norm());
}
