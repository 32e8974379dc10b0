//! Galerkin reduced-order models in the space (per time step) and space-time
//! (single solve) regimes.

use nalgebra::{DMatrix, DVector};

use crate::affine::{Affine, AffineOperator, AffineVector, Coefficient, DenseAffineOperator};
use crate::error::{Error, Result};
use crate::fom::{cn_step_operators, ParametrizedIVP, StateTrajectory};
use crate::pod::Basis;
use crate::spacetime::{SpaceTimeOperator, SpaceTimeSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Space,
    SpaceTime,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Space => "space",
            Regime::SpaceTime => "space-time",
        })
    }
}

/// Projected operators and data; immutable once built.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub basis: Basis,
    pub regime: Regime,
    /// `ΦᵀA_qΦ` (space) or `ΦᵀM_qΦ` of the stacked matrix (space-time).
    pub reduced_op: DenseAffineOperator,
    /// Reduced Crank–Nicolson right operator `I/dt + ΦᵀAΦ/2` (space regime only).
    pub step_rhs: Option<DenseAffineOperator>,
    /// `Φᵀg` (space) or `Φᵀr⃗(μ)` (space-time), affine in μ.
    pub source: AffineVector,
    /// `Φᵀu0` (space regime; empty for space-time).
    pub initial: DVector<f64>,
    pub n_s: usize,
    pub n_t: usize,
    pub dt: f64,
}

/// `K × N_t` reduced trajectory (space) or a single `K`-vector (space-time).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub values: DMatrix<f64>,
}

/// Component-wise projection `ΦᵀA_qΦ`, preserving coefficient tags.
pub fn galerkin_project(op: &AffineOperator, basis: &Basis) -> Result<DenseAffineOperator> {
    if basis.n_rows() != op.dim() {
        return Err(Error::DimensionMismatch {
            context: "Galerkin projection",
            expected: op.dim(),
            found: basis.n_rows(),
        });
    }
    let phi = &basis.columns;
    Ok(op.map(|a| phi.tr_mul(&a.mul_dense(phi))))
}

pub fn galerkin_project_spacetime(op: &SpaceTimeOperator, basis: &Basis) -> Result<DenseAffineOperator> {
    if basis.n_rows() != op.dim() {
        return Err(Error::DimensionMismatch {
            context: "space-time Galerkin projection",
            expected: op.dim(),
            found: basis.n_rows(),
        });
    }
    let phi = &basis.columns;
    Ok(op.map(|m| phi.tr_mul(&m.mul_dense(phi))))
}

fn project_vector(v: &AffineVector, basis: &Basis) -> AffineVector {
    v.map(|x| basis.columns.tr_mul(x))
}

pub fn build_space_rom(ivp: &ParametrizedIVP, basis: &Basis) -> Result<ReducedModel> {
    if basis.n_rows() != ivp.n_s() {
        return Err(Error::DimensionMismatch {
            context: "space ROM basis rows",
            expected: ivp.n_s(),
            found: basis.n_rows(),
        });
    }
    let (lhs, rhs) = cn_step_operators(&ivp.op, ivp.dt)?;
    let source = Affine::new(
        ivp.n_params(),
        vec![(Coefficient::Constant, ivp.source.clone())],
    )?;
    let initial = if ivp.u0.iter().all(|&v| v == 0.0) {
        DVector::zeros(basis.k())
    } else {
        basis.columns.tr_mul(&ivp.u0)
    };
    Ok(ReducedModel {
        reduced_op: galerkin_project(&lhs, basis)?,
        step_rhs: Some(galerkin_project(&rhs, basis)?),
        source: project_vector(&source, basis),
        initial,
        basis: basis.clone(),
        regime: Regime::Space,
        n_s: ivp.n_s(),
        n_t: ivp.n_t,
        dt: ivp.dt,
    })
}

pub fn build_st_rom(ivp: &ParametrizedIVP, basis: &Basis) -> Result<ReducedModel> {
    let sys = SpaceTimeSystem::new(ivp)?;
    build_st_rom_from_system(&sys, basis, ivp.dt)
}

pub fn build_st_rom_from_system(sys: &SpaceTimeSystem, basis: &Basis, dt: f64) -> Result<ReducedModel> {
    if basis.n_rows() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "space-time ROM basis rows",
            expected: sys.dim(),
            found: basis.n_rows(),
        });
    }
    Ok(ReducedModel {
        reduced_op: galerkin_project_spacetime(&sys.matrix, basis)?,
        step_rhs: None,
        source: project_vector(&sys.rhs, basis),
        initial: DVector::zeros(0),
        basis: basis.clone(),
        regime: Regime::SpaceTime,
        n_s: sys.n_s,
        n_t: sys.n_t,
        dt,
    })
}

impl ReducedModel {
    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn n_params(&self) -> usize {
        self.reduced_op.n_params()
    }

    /// The reduced system matrix: CN left operator (space) or stacked matrix (space-time).
    pub fn lhs(&self) -> &DenseAffineOperator {
        &self.reduced_op
    }

    fn singular(&self, mu: &[f64]) -> Error {
        Error::singular(format!("{} ROM at mu = {mu:?}", self.regime))
    }

    /// Marches the reduced trajectory, handing each `û^n` to `visit`.
    fn march(&self, mu: &[f64], mut visit: impl FnMut(usize, &DVector<f64>)) -> Result<()> {
        let step_rhs = self
            .step_rhs
            .as_ref()
            .expect("space regime carries a step operator");
        let lu = self.reduced_op.evaluate(mu)?.lu();
        if !lu.is_invertible() {
            return Err(self.singular(mu));
        }
        let r = step_rhs.evaluate(mu)?;
        let g = self.source.evaluate(mu)?;
        let mut u = self.initial.clone();
        let mut b = DVector::zeros(self.k());
        for step in 1..=self.n_t {
            b.copy_from(&g);
            b.gemv(1.0, &r, &u, 1.0);
            if !lu.solve_mut(&mut b) {
                return Err(self.singular(mu).at_step(step));
            }
            std::mem::swap(&mut u, &mut b);
            visit(step, &u);
        }
        Ok(())
    }

    fn solve_spacetime(&self, mu: &[f64]) -> Result<DVector<f64>> {
        let m = self.reduced_op.evaluate(mu)?;
        let mut b = self.source.evaluate(mu)?;
        if !m.lu().solve_mut(&mut b) {
            return Err(self.singular(mu));
        }
        Ok(b)
    }

    /// Rows of `Φ` that produce the final-time field.
    pub fn final_rows(&self) -> DMatrix<f64> {
        match self.regime {
            Regime::Space => self.basis.columns.clone(),
            Regime::SpaceTime => self
                .basis
                .columns
                .rows((self.n_t - 1) * self.n_s, self.n_s)
                .into_owned(),
        }
    }

    /// Reduced solve followed by reconstruction of the final-time field only.
    pub fn solve_final_state(&self, mu: &[f64]) -> Result<DVector<f64>> {
        match self.regime {
            Regime::Space => {
                let mut last = DVector::zeros(self.k());
                let n_t = self.n_t;
                self.march(mu, |step, u| {
                    if step == n_t {
                        last.copy_from(u);
                    }
                })?;
                Ok(&self.basis.columns * last)
            }
            Regime::SpaceTime => {
                let u = self.solve_spacetime(mu)?;
                let rows = self
                    .basis
                    .columns
                    .rows((self.n_t - 1) * self.n_s, self.n_s);
                Ok(rows * u)
            }
        }
    }
}

pub fn rom_solve(model: &ReducedModel, mu: &[f64]) -> Result<ReducedState> {
    match model.regime {
        Regime::Space => {
            let mut values = DMatrix::zeros(model.k(), model.n_t);
            model.march(mu, |step, u| values.column_mut(step - 1).copy_from(u))?;
            Ok(ReducedState { values })
        }
        Regime::SpaceTime => {
            let u = model.solve_spacetime(mu)?;
            Ok(ReducedState {
                values: DMatrix::from_column_slice(u.len(), 1, u.as_slice()),
            })
        }
    }
}

/// Lifts a reduced state back to the full `N_s × N_t` trajectory.
pub fn reconstruct(model: &ReducedModel, state: &ReducedState) -> Result<StateTrajectory> {
    let expected_cols = match model.regime {
        Regime::Space => model.n_t,
        Regime::SpaceTime => 1,
    };
    if state.values.nrows() != model.k() || state.values.ncols() != expected_cols {
        return Err(Error::DimensionMismatch {
            context: "reduced state",
            expected: model.k() * expected_cols,
            found: state.values.len(),
        });
    }
    let full = &model.basis.columns * &state.values;
    match model.regime {
        Regime::Space => Ok(StateTrajectory { states: full }),
        Regime::SpaceTime => StateTrajectory::from_stacked(&full.column(0).into_owned(), model.n_s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::fom_solve;
    use crate::spacetime::st_solve;

    fn small_ivp() -> ParametrizedIVP {
        ParametrizedIVP::advection_diffusion_1d(8, 0.05, 0.5, 1.0).unwrap()
    }

    #[test]
    fn identity_projection_is_noop() {
        let op = small_ivp().op;
        let red = galerkin_project(&op, &Basis::identity(8)).unwrap();
        for ((_, a), (_, r)) in op.terms().iter().zip(red.terms()) {
            assert_eq!(&a.to_dense(), r);
        }
    }

    #[test]
    fn unit_vector_projection_picks_entry() {
        let op = small_ivp().op;
        let mut e1 = DMatrix::zeros(8, 1);
        e1[(0, 0)] = 1.0;
        let red = galerkin_project(&op, &Basis::from_orthonormal(e1).unwrap()).unwrap();
        for ((_, a), (_, r)) in op.terms().iter().zip(red.terms()) {
            assert_eq!(r[(0, 0)], a.get(0, 0));
        }
    }

    #[test]
    fn projection_dimension_is_checked() {
        let op = small_ivp().op;
        assert!(galerkin_project(&op, &Basis::identity(5)).is_err());
        assert!(build_space_rom(&small_ivp(), &Basis::identity(5)).is_err());
        assert!(build_st_rom(&small_ivp(), &Basis::identity(8)).is_err());
    }

    #[test]
    fn identity_basis_space_rom_matches_fom() {
        let ivp = small_ivp();
        let model = build_space_rom(&ivp, &Basis::identity(8)).unwrap();
        let mu = [1.2, 0.017];
        let rom = reconstruct(&model, &rom_solve(&model, &mu).unwrap()).unwrap();
        let fom = fom_solve(&ivp, &mu).unwrap();
        assert!((rom.states - &fom.states).amax() <= 1e-12 * fom.states.amax());
        assert!((model.solve_final_state(&mu).unwrap() - fom.final_state()).amax() < 1e-12);
    }

    #[test]
    fn identity_basis_st_rom_matches_st_solve() {
        let ivp = small_ivp();
        let n = ivp.n_s() * ivp.n_t;
        let model = build_st_rom(&ivp, &Basis::identity(n)).unwrap();
        let mu = [0.8, 0.012];
        let rom = reconstruct(&model, &rom_solve(&model, &mu).unwrap()).unwrap();
        let st = st_solve(&ivp, &mu).unwrap();
        assert!((rom.states - &st.states).amax() <= 1e-12 * st.states.amax());
    }

    #[test]
    fn zero_initial_state_projects_to_zero() {
        let model = build_space_rom(&small_ivp(), &Basis::identity(8)).unwrap();
        assert!(model.initial.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let ivp = ParametrizedIVP::advection_diffusion_1d(6, 0.1, 1.0, 0.0).unwrap();
        let model = build_space_rom(&ivp, &Basis::identity(6)).unwrap();
        let s = rom_solve(&model, &[1.0, 0.01]).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        let t = reconstruct(&model, &ReducedState { values: DMatrix::zeros(6, 10) }).unwrap();
        assert!(t.states.iter().all(|&v| v == 0.0));
        assert!(reconstruct(&model, &ReducedState { values: DMatrix::zeros(6, 3) }).is_err());
    }

    #[test]
    fn scalar_spacetime_rom_is_a_division() {
        let ivp = small_ivp();
        let n = ivp.n_s() * ivp.n_t;
        let v = DMatrix::from_fn(n, 1, |i, _| ((i % 7) as f64 + 1.0) / 10.0);
        let basis = Basis::from_orthonormal(&v / v.norm()).unwrap();
        let model = build_st_rom(&ivp, &basis).unwrap();
        let mu = [1.0, 0.015];
        let m = model.reduced_op.evaluate(&mu).unwrap()[(0, 0)];
        let r = model.source.evaluate(&mu).unwrap()[0];
        let s = rom_solve(&model, &mu).unwrap();
        assert_eq!(s.values[(0, 0)], r / m);
    }

    #[test]
    fn singular_reduced_system_reports_regime() {
        let ivp = small_ivp();
        let mut model = build_space_rom(&ivp, &Basis::identity(8)).unwrap();
        model.reduced_op = model.reduced_op.map(|m| m * 0.0);
        match rom_solve(&model, &[1.0, 0.01]) {
            Err(Error::SingularSystem { context, .. }) => assert!(context.contains("space ROM")),
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
