//! Full-order models: finite-difference advection–diffusion(–reaction)
//! operators on the unit square/interval and Crank–Nicolson time stepping.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::affine::{AffineOperator, Coefficient};
use crate::banded::{choose_ordering, SparseLu};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Uniform Cartesian grid of interior nodes on `[0,1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    nodes: Vec<usize>,
}

impl SpatialMesh {
    pub fn new(nodes: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() > 2 {
            return Err(Error::InvalidSize {
                what: "mesh dimension",
                value: nodes.len(),
            });
        }
        if let Some(&n) = nodes.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidSize {
                what: "nodes per axis",
                value: n,
            });
        }
        Ok(SpatialMesh { nodes })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    /// Grid spacing per axis; Dirichlet nodes at 0 and 1 are excluded.
    pub fn spacing(&self) -> Vec<f64> {
        self.nodes.iter().map(|&n| 1.0 / (n as f64 + 1.0)).collect()
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Physical coordinates of every unknown, x fastest.
    pub fn coordinates(&self) -> Vec<Vec<f64>> {
        let h = self.spacing();
        match self.nodes.as_slice() {
            [nx] => (0..*nx).map(|i| vec![(i + 1) as f64 * h[0]]).collect(),
            [nx, ny] => (0..*ny)
                .flat_map(|j| (0..*nx).map(move |i| (i, j)))
                .map(|(i, j)| vec![(i + 1) as f64 * h[0], (j + 1) as f64 * h[1]])
                .collect(),
            _ => unreachable!("validated at construction"),
        }
    }
}

fn backward_first_order(n: usize, h: f64) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::with_capacity(2 * n);
    for i in 0..n {
        t.push((i, i, 1.0 / h));
        if i > 0 {
            t.push((i, i - 1, -1.0 / h));
        }
    }
    t
}

fn central_second(n: usize, h: f64) -> Vec<(usize, usize, f64)> {
    let s = 1.0 / (h * h);
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            t.push((i, i - 1, s));
        }
        t.push((i, i, -2.0 * s));
        if i + 1 < n {
            t.push((i, i + 1, s));
        }
    }
    t
}

/// `(3u_i − 4u_{i−1} + u_{i−2}) / 2h`, first-order backward at the first node.
fn backward_second_order(n: usize, h: f64) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::with_capacity(3 * n);
    t.push((0, 0, 1.0 / h));
    for i in 1..n {
        t.push((i, i, 1.5 / h));
        t.push((i, i - 1, -2.0 / h));
        if i >= 2 {
            t.push((i, i - 2, 0.5 / h));
        }
    }
    t
}

/// Lifts a 1D stencil along one axis of an `nx × ny` grid (x fastest).
fn lift(stencil: &[(usize, usize, f64)], nx: usize, ny: usize, axis: usize) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::with_capacity(stencil.len() * if axis == 0 { ny } else { nx });
    match axis {
        0 => {
            for j in 0..ny {
                t.extend(stencil.iter().map(|&(a, b, v)| (j * nx + a, j * nx + b, v)));
            }
        }
        _ => {
            for i in 0..nx {
                t.extend(stencil.iter().map(|&(a, b, v)| (a * nx + i, b * nx + i, v)));
            }
        }
    }
    t
}

/// 1D operator `A(c, ν) = −c·D1 + ν·D2` with parameters ordered `(c, ν)`.
pub fn assemble_1d_advdiff(n_x: usize) -> Result<AffineOperator> {
    if n_x < 2 {
        return Err(Error::InvalidSize {
            what: "1D interior nodes",
            value: n_x,
        });
    }
    let h = 1.0 / (n_x as f64 + 1.0);
    let d1 = CsrMatrix::from_triplets(n_x, n_x, &backward_first_order(n_x, h));
    let d2 = CsrMatrix::from_triplets(n_x, n_x, &central_second(n_x, h));
    AffineOperator::new(
        2,
        vec![
            (Coefficient::Param(0), d1.scale(-1.0)),
            (Coefficient::Param(1), d2),
        ],
    )
}

/// 2D operator `A(b, σ, ν) = −b(cos(π/3) D1x + sin(π/3) D1y) − σI + ν(D2x + D2y)`,
/// parameters ordered `(b, σ, ν)`.
pub fn assemble_2d_advdiff(n_x: usize, n_y: usize) -> Result<AffineOperator> {
    for n in [n_x, n_y] {
        if n < 3 {
            return Err(Error::InvalidSize {
                what: "2D interior nodes per axis",
                value: n,
            });
        }
    }
    let (hx, hy) = (1.0 / (n_x as f64 + 1.0), 1.0 / (n_y as f64 + 1.0));
    let n = n_x * n_y;
    let (cx, cy) = ((PI / 3.0).cos(), (PI / 3.0).sin());

    let mut adv = Vec::new();
    adv.extend(
        lift(&backward_second_order(n_x, hx), n_x, n_y, 0)
            .into_iter()
            .map(|(i, j, v)| (i, j, -cx * v)),
    );
    adv.extend(
        lift(&backward_second_order(n_y, hy), n_x, n_y, 1)
            .into_iter()
            .map(|(i, j, v)| (i, j, -cy * v)),
    );
    let mut lap = lift(&central_second(n_x, hx), n_x, n_y, 0);
    lap.extend(lift(&central_second(n_y, hy), n_x, n_y, 1));

    AffineOperator::new(
        3,
        vec![
            (Coefficient::Param(0), CsrMatrix::from_triplets(n, n, &adv)),
            (Coefficient::Param(1), CsrMatrix::scaled_identity(n, -1.0)),
            (Coefficient::Param(2), CsrMatrix::from_triplets(n, n, &lap)),
        ],
    )
}

/// Crank–Nicolson split `lhs(μ) = I/dt − A(μ)/2`, `rhs(μ) = I/dt + A(μ)/2`.
///
/// Both decompositions carry the constant `I/dt` term first, followed by one
/// term per term of `op`, in the same order.
pub fn cn_step_operators(op: &AffineOperator, dt: f64) -> Result<(AffineOperator, AffineOperator)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let n = op.dim();
    let mass = AffineOperator::new(
        op.n_params(),
        vec![(Coefficient::Constant, CsrMatrix::scaled_identity(n, 1.0 / dt))],
    )?;
    let lhs = mass.clone().concat(op.map(|a| a.scale(-0.5)))?;
    let rhs = mass.concat(op.map(|a| a.scale(0.5)))?;
    Ok((lhs, rhs))
}

/// Semi-discrete linear IVP `u' = A(μ)u + g`, `u(0) = u0`, on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ParametrizedIVP {
    pub mesh: SpatialMesh,
    pub op: AffineOperator,
    pub source: DVector<f64>,
    pub u0: DVector<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub n_t: usize,
}

impl ParametrizedIVP {
    pub fn new(
        mesh: SpatialMesh,
        op: AffineOperator,
        source: DVector<f64>,
        u0: DVector<f64>,
        t_final: f64,
        dt: f64,
    ) -> Result<Self> {
        let n = mesh.n_dofs();
        for (what, len) in [("operator", op.dim()), ("source", source.len()), ("initial state", u0.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    context: what,
                    expected: n,
                    found: len,
                });
            }
        }
        if !(dt > 0.0 && t_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need dt > 0 and T > 0, got dt={dt}, T={t_final}"
            )));
        }
        let steps = (t_final / dt).round();
        if steps < 1.0 || (steps * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidArgument(format!(
                "T={t_final} is not an integer multiple of dt={dt}"
            )));
        }
        if u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("initial state is not finite".into()));
        }
        Ok(ParametrizedIVP {
            mesh,
            op,
            source,
            u0,
            t_final,
            dt,
            n_t: steps as usize,
        })
    }

    /// 1D advection–diffusion with a uniform source of the given amplitude and zero initial state.
    pub fn advection_diffusion_1d(n_x: usize, dt: f64, t_final: f64, source_amplitude: f64) -> Result<Self> {
        let mesh = SpatialMesh::new(vec![n_x])?;
        let op = assemble_1d_advdiff(n_x)?;
        Self::new(
            mesh,
            op,
            DVector::from_element(n_x, source_amplitude),
            DVector::zeros(n_x),
            t_final,
            dt,
        )
    }

    pub fn advection_diffusion_2d(
        n_x: usize,
        n_y: usize,
        dt: f64,
        t_final: f64,
        source_amplitude: f64,
    ) -> Result<Self> {
        let mesh = SpatialMesh::new(vec![n_x, n_y])?;
        let op = assemble_2d_advdiff(n_x, n_y)?;
        let n = n_x * n_y;
        Self::new(
            mesh,
            op,
            DVector::from_element(n, source_amplitude),
            DVector::zeros(n),
            t_final,
            dt,
        )
    }

    pub fn n_s(&self) -> usize {
        self.mesh.n_dofs()
    }

    pub fn n_params(&self) -> usize {
        self.op.n_params()
    }
}

/// States `u^1 … u^{N_t}` as columns of an `N_s × N_t` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub states: DMatrix<f64>,
}

impl StateTrajectory {
    pub fn n_s(&self) -> usize {
        self.states.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.states.ncols()
    }

    pub fn final_state(&self) -> DVector<f64> {
        self.states.column(self.n_t() - 1).into_owned()
    }

    /// `[u^1; …; u^{N_t}]`. Column-major storage already has this layout.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_column_slice(self.states.as_slice())
    }

    pub fn from_stacked(v: &DVector<f64>, n_s: usize) -> Result<Self> {
        if n_s == 0 || !v.len().is_multiple_of(n_s) {
            return Err(Error::DimensionMismatch {
                context: "stacked trajectory",
                expected: n_s,
                found: v.len(),
            });
        }
        Ok(StateTrajectory {
            states: DMatrix::from_column_slice(n_s, v.len() / n_s, v.as_slice()),
        })
    }
}

/// Reusable Crank–Nicolson solver for one IVP.
///
/// The bandwidth-reducing ordering is computed once from the (μ-independent)
/// sparsity pattern; each solve factors `lhs(μ)` once and reuses it for all steps.
#[derive(Debug, Clone)]
pub struct FomSolver {
    ivp: ParametrizedIVP,
    lhs: AffineOperator,
    rhs: AffineOperator,
    ordering: Option<Vec<usize>>,
}

impl FomSolver {
    pub fn new(ivp: &ParametrizedIVP) -> Result<Self> {
        let (lhs, rhs) = cn_step_operators(&ivp.op, ivp.dt)?;
        let probe = lhs.evaluate(&vec![1.0; lhs.n_params()])?;
        let ordering = choose_ordering(&probe);
        Ok(FomSolver {
            ivp: ivp.clone(),
            lhs,
            rhs,
            ordering,
        })
    }

    pub fn ivp(&self) -> &ParametrizedIVP {
        &self.ivp
    }

    pub fn step_operators(&self) -> (&AffineOperator, &AffineOperator) {
        (&self.lhs, &self.rhs)
    }

    fn factor(&self, mu: &[f64]) -> Result<(SparseLu, CsrMatrix)> {
        let lhs = self.lhs.evaluate(mu)?;
        let rhs = self.rhs.evaluate(mu)?;
        let lu = SparseLu::factor_ordered(&lhs, self.ordering.as_deref())?;
        Ok((lu, rhs))
    }

    /// Marches all steps, handing each new state to `visit(step, state)`.
    pub fn march(&self, mu: &[f64], mut visit: impl FnMut(usize, &[f64])) -> Result<()> {
        let (lu, rhs) = self.factor(mu).map_err(|e| e.at_step(1))?;
        let n = self.ivp.n_s();
        let mut prev = self.ivp.u0.as_slice().to_vec();
        let mut next = vec![0.0; n];
        for step in 1..=self.ivp.n_t {
            rhs.mul_vec_into(&prev, &mut next);
            for (x, g) in next.iter_mut().zip(self.ivp.source.iter()) {
                *x += g;
            }
            lu.solve_in_place(&mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::singular("non-finite state").at_step(step));
            }
            visit(step, &next);
            std::mem::swap(&mut prev, &mut next);
        }
        Ok(())
    }

    pub fn solve(&self, mu: &[f64]) -> Result<StateTrajectory> {
        let mut states = DMatrix::zeros(self.ivp.n_s(), self.ivp.n_t);
        self.march(mu, |step, u| states.column_mut(step - 1).copy_from_slice(u))?;
        Ok(StateTrajectory { states })
    }

    pub fn final_state(&self, mu: &[f64]) -> Result<DVector<f64>> {
        let mut last = DVector::zeros(self.ivp.n_s());
        let n_t = self.ivp.n_t;
        self.march(mu, |step, u| {
            if step == n_t {
                last.copy_from_slice(u);
            }
        })?;
        Ok(last)
    }
}

/// Solves the full-order trajectory `u^1 … u^{N_t}` at `mu`.
pub fn fom_solve(ivp: &ParametrizedIVP, mu: &[f64]) -> Result<StateTrajectory> {
    FomSolver::new(ivp)?.solve(mu)
}
