mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strom_core::pod::{collect_snapshots, pod_basis, rrf_basis, SnapshotKind, SnapshotMatrix};

fn residual(phi: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    (u - phi * phi.tr_mul(u)).norm()
}

#[test]
fn energy_bound_holds_for_both_layouts() {
    let ivp = common::desk_1d();
    let mus = common::training_set(20, 1);
    let e_tol = 0.999999;
    for kind in [SnapshotKind::Spatial, SnapshotKind::SpaceTime] {
        let s = collect_snapshots(&ivp, &mus, kind).unwrap();
        let basis = pod_basis(&s, e_tol).unwrap();
        let bound = (1.0 - e_tol).sqrt() * s.data.norm();
        assert!(residual(&basis.columns, &s.data) <= bound, "{kind:?}");
        assert!(basis.orthonormality_error() < 1e-10);
    }
}

#[test]
fn pod_beats_random_subspaces_of_equal_size() {
    let ivp = common::desk_1d();
    let s = collect_snapshots(&ivp, &common::training_set(5, 2), SnapshotKind::Spatial).unwrap();
    let basis = pod_basis(&s, 0.9999).unwrap();
    let best = residual(&basis.columns, &s.data);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let g = DMatrix::from_fn(s.nrows(), basis.k(), |_, _| rng.random::<f64>() - 0.5);
        let q = g.qr().q();
        assert!(residual(&q, &s.data) >= best);
    }
}

#[test]
fn randomized_range_finder_captures_exact_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rank = 4;
    let left = DMatrix::from_fn(120, rank, |_, _| rng.random::<f64>() - 0.5);
    let right = DMatrix::from_fn(rank, 60, |_, _| rng.random::<f64>() - 0.5);
    let u = &left * &right;
    let s = SnapshotMatrix { data: u.clone(), kind: SnapshotKind::Spatial };
    for k_hat in [rank, rank + 3] {
        let basis = rrf_basis(&s, k_hat, 17).unwrap();
        assert!(residual(&basis.columns, &u) <= 1e-10 * u.norm());
    }
    let pod = pod_basis(&s, 1.0 - 1e-12).unwrap();
    assert_eq!(pod.k(), rank);
}

#[test]
fn rrf_singular_values_approach_exact_ones() {
    let ivp = common::desk_1d();
    let s = collect_snapshots(&ivp, &common::training_set(20, 1), SnapshotKind::Spatial).unwrap();
    let exact = pod_basis(&s, 1.0 - 1e-12).unwrap();
    let approx = rrf_basis(&s, 20, 3).unwrap();
    for (a, e) in approx.singular_values.iter().zip(&exact.singular_values).take(3) {
        assert!((a - e).abs() <= 1e-6 * e, "{a} vs {e}");
    }
}
