//! Stochastic Galerkin propagation on orthonormal polynomial chaos bases.
//!
//! Expansion coefficients are stored ψ-major: block `j` (length `N`) multiplies
//! `ψ_j(μ)`, so a field is `Σ_j ψ_j(μ) m_j`. System matrices are
//! `Σ_q E[θ_q ψψᵀ] ⊗ A_q` with expectations taken by tensor Gauss quadrature.

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen};

use crate::affine::{AffineOperator, AffineVector, Coefficient, DenseAffineOperator};
use crate::banded::SparseLu;
use crate::error::{Error, Result};
use crate::fom::{cn_step_operators, ParametrizedIVP};
use crate::mc::{FieldKind, Marginal, MomentEstimate, ParameterDistribution, SampleSolver};
use crate::rom::{ReducedModel, Regime};
use crate::spacetime::SpaceTimeSystem;
use crate::sparse::CsrMatrix;

/// Deviation of `E[ψψᵀ]` from the identity above which a rule is rejected.
pub const GRAM_TOLERANCE: f64 = 1e-8;

/// Maps a parameter value to the standard variable of its polynomial family.
fn standardize(m: &Marginal, x: f64) -> f64 {
    match *m {
        Marginal::Normal { mean, std } => (x - mean) / std,
        Marginal::Uniform { lo, hi } => (2.0 * x - lo - hi) / (hi - lo),
    }
}

fn unstandardize(m: &Marginal, xi: f64) -> f64 {
    match *m {
        Marginal::Normal { mean, std } => mean + std * xi,
        Marginal::Uniform { lo, hi } => 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi,
    }
}

/// Orthonormal Hermite values `h_0(ξ) … h_degree(ξ)` under `N(0, 1)`.
pub fn hermite_orthonormal(degree: usize, xi: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(degree + 1);
    h.push(1.0);
    if degree >= 1 {
        h.push(xi);
    }
    for n in 1..degree {
        let next = (xi * h[n] - (n as f64).sqrt() * h[n - 1]) / ((n + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// Orthonormal Legendre values `√(2n+1) P_n(ξ)` under `U[-1, 1]`.
pub fn legendre_orthonormal(degree: usize, xi: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(degree + 1);
    p.push(1.0);
    if degree >= 1 {
        p.push(xi);
    }
    for n in 1..degree {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * xi * p[n] - nf * p[n - 1]) / (nf + 1.0);
        p.push(next);
    }
    p.iter()
        .enumerate()
        .map(|(n, v)| v * ((2 * n + 1) as f64).sqrt())
        .collect()
}

fn family_values(m: &Marginal, degree: usize, xi: f64) -> Vec<f64> {
    match m {
        Marginal::Normal { .. } => hermite_orthonormal(degree, xi),
        Marginal::Uniform { .. } => legendre_orthonormal(degree, xi),
    }
}

/// Total-degree multi-indices in graded lexicographic order.
fn total_degree_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, remaining: usize, slots: usize, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first);
            fill(prefix, remaining - first, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=degree {
        fill(&mut Vec::with_capacity(dim), d, dim, &mut out);
    }
    out
}

/// Orthonormal multivariate polynomials of total degree at most `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    marginals: Vec<Marginal>,
    degree: usize,
    indices: Vec<Vec<usize>>,
}

impl PolyBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_params(&self) -> usize {
        self.marginals.len()
    }

    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// `ψ(μ)`, length `N_ψ`.
    pub fn eval(&self, mu: &[f64]) -> Result<DVector<f64>> {
        if mu.len() != self.marginals.len() {
            return Err(Error::DimensionMismatch {
                context: "polynomial basis parameters",
                expected: self.marginals.len(),
                found: mu.len(),
            });
        }
        let axes: Vec<Vec<f64>> = self
            .marginals
            .iter()
            .zip(mu)
            .map(|(m, &x)| family_values(m, self.degree, standardize(m, x)))
            .collect();
        Ok(DVector::from_iterator(
            self.indices.len(),
            self.indices
                .iter()
                .map(|alpha| alpha.iter().zip(&axes).map(|(&a, v)| v[a]).product()),
        ))
    }
}

pub fn build_poly_basis(dist: &ParameterDistribution, degree: usize) -> Result<PolyBasis> {
    for m in &dist.marginals {
        m.validate()?;
    }
    Ok(PolyBasis {
        marginals: dist.marginals.clone(),
        degree,
        indices: total_degree_indices(dist.dim(), degree),
    })
}

/// Tensor Gauss rule for a probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub nodes_per_axis: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `E[f(μ)]` for a scalar integrand.
    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Golub–Welsch nodes on the standard variable with Christoffel weights.
fn gauss_standard(m: &Marginal, n: usize) -> (Vec<f64>, Vec<f64>) {
    let offdiag = |k: usize| -> f64 {
        let k = k as f64;
        match m {
            Marginal::Normal { .. } => k.sqrt(),
            Marginal::Uniform { .. } => k / (4.0 * k * k - 1.0).sqrt(),
        }
    };
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            offdiag(j)
        } else if j + 1 == i {
            offdiag(i)
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| 1.0 / family_values(m, n - 1, x).iter().map(|v| v * v).sum::<f64>())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Full tensor grid with `nodes_per_axis` Gauss points per parameter; the
/// first parameter varies fastest.
pub fn gauss_quadrature(dist: &ParameterDistribution, nodes_per_axis: usize) -> Result<QuadratureRule> {
    if nodes_per_axis == 0 {
        return Err(Error::InvalidSize {
            what: "quadrature nodes per axis",
            value: 0,
        });
    }
    for m in &dist.marginals {
        m.validate()?;
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = dist
        .marginals
        .iter()
        .map(|m| {
            let (xi, w) = gauss_standard(m, nodes_per_axis);
            (xi.iter().map(|&x| unstandardize(m, x)).collect(), w)
        })
        .collect();
    let total = nodes_per_axis.pow(dist.dim() as u32);
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut x = Vec::with_capacity(dist.dim());
        let mut w = 1.0;
        for (ax, aw) in &axes {
            let i = rest % nodes_per_axis;
            rest /= nodes_per_axis;
            x.push(ax[i]);
            w *= aw[i];
        }
        nodes.push(x);
        weights.push(w);
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        nodes_per_axis,
    })
}

/// Stochastic moments `E[θ ψψᵀ]` and `E[θ ψ]` under a fixed basis and rule.
#[derive(Debug, Clone)]
pub struct StochasticProjector {
    /// `ψ` at every node, `N_ψ × n_nodes`.
    psi: DMatrix<f64>,
    weights: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    gram_error: f64,
}

impl StochasticProjector {
    /// Fails when the rule does not reproduce `E[ψψᵀ] = I` to [`GRAM_TOLERANCE`].
    pub fn new(basis: &PolyBasis, quad: &QuadratureRule) -> Result<Self> {
        let n_nodes = quad.len();
        let mut psi = DMatrix::zeros(basis.len(), n_nodes);
        for (k, x) in quad.nodes.iter().enumerate() {
            psi.column_mut(k).copy_from(&basis.eval(x)?);
        }
        let mut proj = StochasticProjector {
            psi,
            weights: quad.weights.clone(),
            nodes: quad.nodes.clone(),
            gram_error: 0.0,
        };
        let gram = proj.outer(&Coefficient::Constant);
        proj.gram_error = (gram - DMatrix::identity(basis.len(), basis.len())).amax();
        if proj.gram_error > GRAM_TOLERANCE {
            return Err(Error::QuadratureTooCoarse {
                deviation: proj.gram_error,
            });
        }
        Ok(proj)
    }

    pub fn n_psi(&self) -> usize {
        self.psi.nrows()
    }

    /// Max-entry deviation of `E[ψψᵀ]` from the identity.
    pub fn gram_error(&self) -> f64 {
        self.gram_error
    }

    fn weighted(&self, c: &Coefficient) -> DMatrix<f64> {
        let mut scaled = self.psi.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.weights[k] * c.eval(&self.nodes[k]);
        }
        scaled
    }

    /// `E[θ ψψᵀ]`.
    pub fn outer(&self, c: &Coefficient) -> DMatrix<f64> {
        let e = self.weighted(c) * self.psi.transpose();
        (&e + e.transpose()) * 0.5
    }

    /// `E[θ ψ]`.
    pub fn first(&self, c: &Coefficient) -> DVector<f64> {
        self.weighted(c).column_sum()
    }

    pub fn assemble_matrix(&self, op: &AffineOperator) -> Result<CsrMatrix> {
        let blocks: Vec<CsrMatrix> = op
            .terms()
            .iter()
            .map(|(c, a)| CsrMatrix::kron_dense_left(&self.outer(c), a))
            .collect();
        let weighted: Vec<_> = blocks.iter().map(|b| (1.0, b)).collect();
        CsrMatrix::linear_combination(&weighted)
    }

    pub fn assemble_dense(&self, op: &DenseAffineOperator) -> DMatrix<f64> {
        let n = op.dim() * self.n_psi();
        let mut out = DMatrix::zeros(n, n);
        for (c, a) in op.terms() {
            out += self.outer(c).kronecker(a);
        }
        out
    }

    /// `Σ_q E[θ_q ψ] ⊗ b_q`.
    pub fn assemble_vector(&self, v: &AffineVector) -> DVector<f64> {
        let mut out = DVector::zeros(v.dim() * self.n_psi());
        for (c, b) in v.terms() {
            out += self.first(c).kronecker(b);
        }
        out
    }
}

/// SG matrix `Σ_q E[θ_q ψψᵀ] ⊗ A_q` and vector `Σ_q E[θ_q ψ] ⊗ b_q`.
pub fn assemble_sg_system(
    op: &AffineOperator,
    rhs: &AffineVector,
    basis: &PolyBasis,
    quad: &QuadratureRule,
) -> Result<(CsrMatrix, DVector<f64>)> {
    check_dims(op.dim(), rhs.dim())?;
    let proj = StochasticProjector::new(basis, quad)?;
    Ok((proj.assemble_matrix(op)?, proj.assemble_vector(rhs)))
}

/// Dense SG system of a reduced model's system operator and right-hand side.
pub fn assemble_sg_rom_system(
    model: &ReducedModel,
    basis: &PolyBasis,
    quad: &QuadratureRule,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_dims(model.reduced_op.dim(), model.source.dim())?;
    let proj = StochasticProjector::new(basis, quad)?;
    Ok((proj.assemble_dense(&model.reduced_op), proj.assemble_vector(&model.source)))
}

fn check_dims(op: usize, rhs: usize) -> Result<()> {
    if op != rhs {
        return Err(Error::DimensionMismatch {
            context: "SG right-hand side",
            expected: op,
            found: rhs,
        });
    }
    Ok(())
}

/// Expansion coefficients in ψ-major blocks of length `block_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct PceCoefficients {
    pub values: DVector<f64>,
    pub block_len: usize,
    pub n_psi: usize,
    /// Gram deviation of the rule used to compute the coefficients.
    pub gram_error: f64,
}

impl PceCoefficients {
    pub fn block(&self, j: usize) -> DVectorView<'_, f64> {
        self.values.rows(j * self.block_len, self.block_len)
    }

    /// Blocks as the columns of a `block_len × N_ψ` matrix.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.block_len, self.n_psi, self.values.as_slice())
    }

    /// Applies `lift` to every block, e.g. a reduced basis.
    pub fn lift(&self, lift: &DMatrix<f64>) -> Result<PceCoefficients> {
        if lift.ncols() != self.block_len {
            return Err(Error::DimensionMismatch {
                context: "PCE lift columns",
                expected: self.block_len,
                found: lift.ncols(),
            });
        }
        let lifted = lift * self.as_matrix();
        Ok(PceCoefficients {
            values: DVector::from_column_slice(lifted.as_slice()),
            block_len: lift.nrows(),
            n_psi: self.n_psi,
            gram_error: self.gram_error,
        })
    }

    /// Surrogate value `Σ_j ψ_j(μ) m_j`.
    pub fn evaluate(&self, basis: &PolyBasis, mu: &[f64]) -> Result<DVector<f64>> {
        if basis.len() != self.n_psi {
            return Err(Error::DimensionMismatch {
                context: "PCE basis size",
                expected: self.n_psi,
                found: basis.len(),
            });
        }
        Ok(self.as_matrix() * basis.eval(mu)?)
    }
}

/// Mean `Φ m_1` and variance `Σ_{j≥2} (Φ m_j)²`, with `Φ = I` when `lift` is `None`.
pub fn pce_moments(coeffs: &PceCoefficients, lift: Option<&DMatrix<f64>>) -> Result<MomentEstimate> {
    if coeffs.gram_error.is_nan() || coeffs.gram_error > GRAM_TOLERANCE {
        return Err(Error::NonOrthonormalBasis {
            deviation: coeffs.gram_error,
        });
    }
    let m = match lift {
        Some(phi) => coeffs.lift(phi)?.as_matrix(),
        None => coeffs.as_matrix(),
    };
    let mean = m.column(0).into_owned();
    let mut variance = DVector::zeros(m.nrows());
    for j in 1..m.ncols() {
        variance += m.column(j).component_mul(&m.column(j));
    }
    Ok(MomentEstimate {
        mean,
        variance,
        n_samples: 0,
    })
}

/// Models that march SG coefficients step by step.
#[derive(Debug, Clone, Copy)]
pub enum SpaceSgModel<'a> {
    Full(&'a ParametrizedIVP),
    Reduced(&'a ReducedModel),
}

/// Marches `E[ψψᵀ⊗lhs] m^n = E[ψψᵀ⊗rhs] m^{n−1} + E[ψ⊗g]` from `m^0 = e_1 ⊗ u0`.
pub fn sg_space_solve(
    model: SpaceSgModel<'_>,
    basis: &PolyBasis,
    quad: &QuadratureRule,
) -> Result<Vec<PceCoefficients>> {
    let proj = StochasticProjector::new(basis, quad)?;
    let n_psi = proj.n_psi();
    let gram_error = proj.gram_error();
    let pack = |values: DVector<f64>, block_len: usize| PceCoefficients {
        values,
        block_len,
        n_psi,
        gram_error,
    };
    match model {
        SpaceSgModel::Full(ivp) => {
            let n = ivp.n_s();
            let (lhs, rhs) = cn_step_operators(&ivp.op, ivp.dt)?;
            let source = AffineVector::new(ivp.n_params(), vec![(Coefficient::Constant, ivp.source.clone())])?;
            let l = proj.assemble_matrix(&lhs)?;
            let r = proj.assemble_matrix(&rhs)?;
            let g = proj.assemble_vector(&source);
            let lu = SparseLu::factor(&l).map_err(|e| e.at_step(1))?;
            let mut m = DVector::zeros(n * n_psi);
            m.rows_mut(0, n).copy_from(&ivp.u0);
            let mut out = Vec::with_capacity(ivp.n_t);
            let mut next = vec![0.0; n * n_psi];
            for step in 1..=ivp.n_t {
                r.mul_vec_into(m.as_slice(), &mut next);
                for (x, b) in next.iter_mut().zip(g.iter()) {
                    *x += b;
                }
                lu.solve_in_place(&mut next);
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::singular("full SG step").at_step(step));
                }
                m.as_mut_slice().copy_from_slice(&next);
                out.push(pack(m.clone(), n));
            }
            Ok(out)
        }
        SpaceSgModel::Reduced(rom) => {
            let step_rhs = match (rom.regime, rom.step_rhs.as_ref()) {
                (Regime::Space, Some(r)) => r,
                _ => {
                    return Err(Error::InvalidArgument(
                        "stepwise SG needs a space-regime reduced model".into(),
                    ))
                }
            };
            let k = rom.k();
            let l = proj.assemble_dense(&rom.reduced_op);
            let r = proj.assemble_dense(step_rhs);
            let g = proj.assemble_vector(&rom.source);
            let lu = l.lu();
            if !lu.is_invertible() {
                return Err(Error::singular("space ROM SG system").at_step(1));
            }
            let mut m = DVector::zeros(k * n_psi);
            m.rows_mut(0, k).copy_from(&rom.initial);
            let mut out = Vec::with_capacity(rom.n_t);
            for step in 1..=rom.n_t {
                let mut b = g.clone();
                b.gemv(1.0, &r, &m, 1.0);
                if !lu.solve_mut(&mut b) {
                    return Err(Error::singular("space ROM SG system").at_step(step));
                }
                m = b;
                out.push(pack(m.clone(), k));
            }
            Ok(out)
        }
    }
}

/// Models solved for all time steps at once.
#[derive(Debug, Clone, Copy)]
pub enum SpaceTimeSgModel<'a> {
    Reduced(&'a ReducedModel),
    /// The unreduced stacked system, refused when `N_sN_tN_ψ > size_limit`.
    Full {
        ivp: &'a ParametrizedIVP,
        size_limit: usize,
    },
}

/// One solve of `E[ψψᵀ ⊗ M] m = E[ψ ⊗ b]` for the stacked (or reduced stacked) system.
pub fn sg_spacetime_solve(
    model: SpaceTimeSgModel<'_>,
    basis: &PolyBasis,
    quad: &QuadratureRule,
) -> Result<PceCoefficients> {
    match model {
        SpaceTimeSgModel::Reduced(rom) => {
            if rom.regime != Regime::SpaceTime {
                return Err(Error::InvalidArgument(
                    "all-at-once SG needs a space-time reduced model".into(),
                ));
            }
            let proj = StochasticProjector::new(basis, quad)?;
            let a = proj.assemble_dense(&rom.reduced_op);
            let mut b = proj.assemble_vector(&rom.source);
            if !a.lu().solve_mut(&mut b) {
                return Err(Error::singular("space-time ROM SG system"));
            }
            Ok(PceCoefficients {
                values: b,
                block_len: rom.k(),
                n_psi: proj.n_psi(),
                gram_error: proj.gram_error(),
            })
        }
        SpaceTimeSgModel::Full { ivp, size_limit } => {
            let size = ivp.n_s() * ivp.n_t * basis.len();
            if size > size_limit {
                return Err(Error::SizeGuard {
                    size,
                    limit: size_limit,
                });
            }
            let sys = SpaceTimeSystem::new(ivp)?;
            let proj = StochasticProjector::new(basis, quad)?;
            let matrix = sys.matrix.map(|b| b.to_csr());
            let a = proj.assemble_matrix(&matrix)?;
            let b = proj.assemble_vector(&sys.rhs);
            let x = SparseLu::factor(&a)?.solve(&b);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::singular("full space-time SG system"));
            }
            Ok(PceCoefficients {
                values: x,
                block_len: sys.dim(),
                n_psi: proj.n_psi(),
                gram_error: proj.gram_error(),
            })
        }
    }
}

/// A PCE evaluated as a sampling surrogate, optionally lifted by `Φ`.
#[derive(Debug, Clone)]
pub struct PceSurrogate {
    pub basis: PolyBasis,
    /// Lifted coefficients as a `N × N_ψ` matrix.
    coefficients: DMatrix<f64>,
}

impl PceSurrogate {
    pub fn new(basis: PolyBasis, coeffs: &PceCoefficients, lift: Option<&DMatrix<f64>>) -> Result<Self> {
        if basis.len() != coeffs.n_psi {
            return Err(Error::DimensionMismatch {
                context: "PCE basis size",
                expected: coeffs.n_psi,
                found: basis.len(),
            });
        }
        let coefficients = match lift {
            Some(phi) => coeffs.lift(phi)?.as_matrix(),
            None => coeffs.as_matrix(),
        };
        Ok(PceSurrogate { basis, coefficients })
    }
}

impl SampleSolver for PceSurrogate {
    /// The surrogate has a single field, whatever `kind` asks for.
    fn field(&self, mu: &[f64], _kind: FieldKind) -> Result<DVector<f64>> {
        Ok(&self.coefficients * self.basis.eval(mu)?)
    }

    fn field_len(&self, _kind: FieldKind) -> usize {
        self.coefficients.nrows()
    }
}
