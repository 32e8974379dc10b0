mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strom_core::affine::{AffineOperator, AffineVector, Coefficient};
use strom_core::fom::{fom_solve, ParametrizedIVP, SpatialMesh};
use strom_core::mc::{mc_propagate, sample_parameters, FieldKind, Marginal, ParameterDistribution};
use strom_core::pod::{collect_snapshots, pod_basis, Basis, SnapshotKind};
use strom_core::rom::{build_st_rom, galerkin_project, rom_solve};
use strom_core::sg::{
    assemble_sg_system, build_poly_basis, gauss_quadrature, pce_moments, sg_space_solve, sg_spacetime_solve,
    PceSurrogate, SpaceSgModel, SpaceTimeSgModel, StochasticProjector,
};
use strom_core::sparse::CsrMatrix;

fn random_distribution(rng: &mut ChaCha8Rng, dim: usize) -> ParameterDistribution {
    let marginals = (0..dim)
        .map(|_| {
            if rng.random::<bool>() {
                Marginal::Normal {
                    mean: rng.random_range(-1.0..1.0),
                    std: rng.random_range(0.1..0.5),
                }
            } else {
                let lo = rng.random_range(-1.0..1.0);
                Marginal::Uniform { lo, hi: lo + rng.random_range(0.1..1.0) }
            }
        })
        .collect();
    ParameterDistribution::new(marginals).unwrap()
}

/// `Σ_k w_k ψ(μ_k)ψ(μ_k)ᵀ ⊗ A(μ_k)` with explicit index arithmetic.
fn node_loop_matrix(
    op: &AffineOperator,
    basis: &strom_core::sg::PolyBasis,
    quad: &strom_core::sg::QuadratureRule,
) -> DMatrix<f64> {
    let n = op.dim();
    let np = basis.len();
    let mut out = DMatrix::zeros(n * np, n * np);
    for (x, &w) in quad.nodes.iter().zip(&quad.weights) {
        let psi = basis.eval(x).unwrap();
        let a = op.evaluate(x).unwrap().to_dense();
        for i in 0..np {
            for j in 0..np {
                for r in 0..n {
                    for c in 0..n {
                        out[(i * n + r, j * n + c)] += w * psi[i] * psi[j] * a[(r, c)];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn kronecker_assembly_matches_node_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let dim = rng.random_range(1..=3);
        let dist = random_distribution(&mut rng, dim);
        let p = rng.random_range(0..=3);
        let basis = build_poly_basis(&dist, p).unwrap();
        let n = rng.random_range(1..=(200 / basis.len()).clamp(1, 6));
        let mut terms = vec![(Coefficient::Constant, CsrMatrix::from_dense(&DMatrix::from_fn(n, n, |_, _| rng.random())))];
        for k in 0..dim {
            terms.push((Coefficient::Param(k), CsrMatrix::from_dense(&DMatrix::from_fn(n, n, |_, _| rng.random()))));
        }
        let op = AffineOperator::new(dim, terms).unwrap();
        let rhs = AffineVector::new(dim, vec![(Coefficient::Constant, DVector::from_element(n, 1.0))]).unwrap();
        let quad = gauss_quadrature(&dist, p + 1).unwrap();
        let (m, v) = assemble_sg_system(&op, &rhs, &basis, &quad).unwrap();
        let oracle = node_loop_matrix(&op, &basis, &quad);
        assert!((m.to_dense() - &oracle).amax() <= 1e-12 * oracle.amax().max(1.0));
        assert!((v.rows(0, n) - DVector::from_element(n, 1.0)).amax() < 1e-14);
        assert!(v.rows(n, v.len() - n).amax() < 1e-13);
    }
}

#[test]
fn gram_matrix_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for dim in 1..=3 {
        for p in 0..=5 {
            let dist = random_distribution(&mut rng, dim);
            let basis = build_poly_basis(&dist, p).unwrap();
            let quad = gauss_quadrature(&dist, p + 1).unwrap();
            let proj = StochasticProjector::new(&basis, &quad).unwrap();
            assert!(proj.gram_error() <= 1e-10, "dim {dim} p {p}: {}", proj.gram_error());
        }
    }
}

#[test]
fn default_rule_matches_fine_rule() {
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, 4).unwrap();
    let coarse = StochasticProjector::new(&basis, &gauss_quadrature(&dist, 5).unwrap()).unwrap();
    let fine = StochasticProjector::new(&basis, &gauss_quadrature(&dist, 30).unwrap()).unwrap();
    for c in [Coefficient::Constant, Coefficient::Param(0), Coefficient::Param(1)] {
        assert!((coarse.outer(&c) - fine.outer(&c)).amax() <= 1e-12);
    }
    assert!((coarse.outer(&Coefficient::Constant) - DMatrix::identity(15, 15)).amax() <= 1e-12);
}

#[test]
fn reduced_assembly_commutes_with_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, 2).unwrap();
    let quad = gauss_quadrature(&dist, 3).unwrap();
    let terms = (0..2)
        .map(|k| (Coefficient::Param(k), CsrMatrix::from_dense(&DMatrix::from_fn(6, 6, |_, _| rng.random()))))
        .collect();
    let op = AffineOperator::new(2, terms).unwrap();
    let phi = Basis::from_orthonormal(DMatrix::from_fn(6, 3, |_, _| rng.random::<f64>()).qr().q()).unwrap();
    let proj = StochasticProjector::new(&basis, &quad).unwrap();
    let reduced = proj.assemble_dense(&galerkin_project(&op, &phi).unwrap());
    let lift = DMatrix::identity(basis.len(), basis.len()).kronecker(&phi.columns);
    let full = proj.assemble_matrix(&op).unwrap().to_dense();
    assert!((reduced - lift.transpose() * full * lift).amax() <= 1e-12);
}

fn small_ivp(n_x: usize, dt: f64) -> ParametrizedIVP {
    ParametrizedIVP::advection_diffusion_1d(n_x, dt, 1.0, 1.0).unwrap()
}

#[test]
fn deterministic_operator_collapses_to_constant_mode() {
    let mesh = SpatialMesh::new(vec![5]).unwrap();
    let a = strom_core::fom::assemble_1d_advdiff(5).unwrap().evaluate(&[1.0, 0.05]).unwrap();
    let op = AffineOperator::new(2, vec![(Coefficient::Constant, a)]).unwrap();
    let ivp = ParametrizedIVP::new(mesh, op, DVector::from_element(5, 1.0), DVector::zeros(5), 1.0, 0.1).unwrap();
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, 3).unwrap();
    let quad = gauss_quadrature(&dist, 4).unwrap();
    let pce = sg_space_solve(SpaceSgModel::Full(&ivp), &basis, &quad).unwrap();
    let det = fom_solve(&ivp, &[0.0, 0.0]).unwrap();
    for (n, c) in pce.iter().enumerate() {
        assert!((c.block(0) - det.states.column(n)).amax() < 1e-13);
        assert!(c.values.rows(5, c.values.len() - 5).amax() < 1e-13);
    }
}

#[test]
fn homogeneous_problem_has_zero_coefficients() {
    let mut ivp = small_ivp(6, 0.1);
    ivp.source.fill(0.0);
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, 2).unwrap();
    let quad = gauss_quadrature(&dist, 3).unwrap();
    for c in sg_space_solve(SpaceSgModel::Full(&ivp), &basis, &quad).unwrap() {
        assert_eq!(c.values.amax(), 0.0);
    }
}

#[test]
fn stacked_sg_matches_sequential_sg() {
    let ivp = small_ivp(8, 0.1);
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, 2).unwrap();
    let quad = gauss_quadrature(&dist, 3).unwrap();
    let seq = sg_space_solve(SpaceSgModel::Full(&ivp), &basis, &quad).unwrap();
    let st = sg_spacetime_solve(SpaceTimeSgModel::Full { ivp: &ivp, size_limit: 10_000 }, &basis, &quad).unwrap();
    let id = build_st_rom(&ivp, &Basis::identity(80)).unwrap();
    let st_rom = sg_spacetime_solve(SpaceTimeSgModel::Reduced(&id), &basis, &quad).unwrap();
    let (n_s, n_t) = (8, 10);
    let scale = st.values.amax();
    for j in 0..basis.len() {
        for (n, c) in seq.iter().enumerate() {
            let a = st.block(j).rows(n * n_s, n_s).into_owned();
            assert!((a - c.block(j)).amax() <= 1e-10 * scale);
        }
    }
    assert!((st.values - st_rom.values).amax() <= 1e-10 * scale);
    assert_eq!(seq.len(), n_t);
    let guard = sg_spacetime_solve(SpaceTimeSgModel::Full { ivp: &ivp, size_limit: 100 }, &basis, &quad);
    assert!(matches!(guard, Err(strom_core::Error::SizeGuard { .. })));
}

#[test]
fn degree_zero_is_the_rom_at_the_mean() {
    let ivp = common::desk_1d();
    let s = collect_snapshots(&ivp, &common::training_set(20, 1), SnapshotKind::SpaceTime).unwrap();
    let rom = build_st_rom(&ivp, &pod_basis(&s, 0.999999).unwrap()).unwrap();
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, 0).unwrap();
    let pce = sg_spacetime_solve(SpaceTimeSgModel::Reduced(&rom), &basis, &gauss_quadrature(&dist, 1).unwrap()).unwrap();
    let direct = rom_solve(&rom, &dist.mean()).unwrap();
    assert!((pce.values - direct.values.column(0)).amax() <= 1e-10 * direct.values.amax());
}

fn pointwise_error(ivp: &ParametrizedIVP, p: usize, mus: &[Vec<f64>], truths: &[DVector<f64>]) -> f64 {
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, p).unwrap();
    let quad = gauss_quadrature(&dist, p + 1).unwrap();
    let pce = sg_space_solve(SpaceSgModel::Full(ivp), &basis, &quad).unwrap();
    let last = pce.last().unwrap();
    mus.iter()
        .zip(truths)
        .map(|(mu, u)| common::rel_err(&last.evaluate(&basis, mu).unwrap(), u))
        .fold(0.0, f64::max)
}

#[test]
fn full_sg_surrogate_converges_pointwise() {
    let ivp = common::desk_1d();
    let mus = sample_parameters(&ParameterDistribution::advection_diffusion_1d(), 50, 77).unwrap();
    let truths: Vec<_> = mus.iter().map(|mu| fom_solve(&ivp, mu).unwrap().final_state()).collect();
    let errors: Vec<f64> = (1..=3).map(|p| pointwise_error(&ivp, p, &mus, &truths)).collect();
    assert!(errors[2] <= 1e-2, "{errors:?}");
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn pce_moments_match_sampling_the_surrogate() {
    let ivp = common::desk_1d();
    let s = collect_snapshots(&ivp, &common::training_set(20, 1), SnapshotKind::SpaceTime).unwrap();
    let rom = build_st_rom(&ivp, &pod_basis(&s, 0.999999).unwrap()).unwrap();
    let dist = ParameterDistribution::advection_diffusion_1d();
    let basis = build_poly_basis(&dist, 4).unwrap();
    let pce = sg_spacetime_solve(SpaceTimeSgModel::Reduced(&rom), &basis, &gauss_quadrature(&dist, 5).unwrap()).unwrap();
    let lift = rom.final_rows();
    let exact = pce_moments(&pce, Some(&lift)).unwrap();
    let surrogate = PceSurrogate::new(basis, &pce, Some(&lift)).unwrap();
    let mc = mc_propagate(&surrogate, &dist, 1_000_000, 31, FieldKind::FinalTime).unwrap().moments;
    let rel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() / b.norm();
    assert!(rel(&mc.mean, &exact.mean) < 5e-3, "{}", rel(&mc.mean, &exact.mean));
    assert!(rel(&mc.variance, &exact.variance) < 5e-3, "{}", rel(&mc.variance, &exact.variance));
}
