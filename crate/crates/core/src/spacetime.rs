//! The all-at-once space-time system: Crank–Nicolson steps stacked into one
//! block lower-bidiagonal matrix acting on `[u^1; …; u^{N_t}]`.

use nalgebra::{DMatrix, DVector};

use crate::affine::{Affine, AffineVector, Coefficient};
use crate::banded::SparseLu;
use crate::error::{Error, Result};
use crate::fom::{cn_step_operators, ParametrizedIVP, StateTrajectory};
use crate::sparse::CsrMatrix;

/// `N_t × N_t` block matrix with `diag` on the diagonal and `sub` below it.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBidiagonal {
    pub n_t: usize,
    pub diag: CsrMatrix,
    pub sub: CsrMatrix,
}

impl BlockBidiagonal {
    pub fn block_size(&self) -> usize {
        self.diag.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_t * self.block_size()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.block_size();
        let mut t = Vec::with_capacity(self.n_t * (self.diag.nnz() + self.sub.nnz()));
        for b in 0..self.n_t {
            t.extend(self.diag.triplets().map(|(i, j, v)| (b * n + i, b * n + j, v)));
            if b > 0 {
                t.extend(
                    self.sub
                        .triplets()
                        .map(|(i, j, v)| (b * n + i, (b - 1) * n + j, v)),
                );
            }
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), &t)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.block_size();
        for b in 0..self.n_t {
            let yb = &mut y[b * n..(b + 1) * n];
            self.diag.mul_vec_into(&x[b * n..(b + 1) * n], yb);
            if b > 0 {
                self.sub.mul_vec_add(1.0, &x[(b - 1) * n..b * n], yb);
            }
        }
    }

    /// `M Φ` for a dense `N_sN_t × K` basis, without forming `M`.
    pub fn mul_dense(&self, phi: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), phi.ncols());
        for c in 0..phi.ncols() {
            self.mul_vec(phi.column(c).as_slice(), out.column_mut(c).as_mut_slice());
        }
        out
    }
}

pub type SpaceTimeOperator = Affine<BlockBidiagonal>;

impl SpaceTimeOperator {
    pub fn dim(&self) -> usize {
        self.terms().first().map_or(0, |(_, m)| m.dim())
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<CsrMatrix> {
        let theta = self.coefficients(mu)?;
        let blocks: Vec<CsrMatrix> = self.terms().iter().map(|(_, m)| m.to_csr()).collect();
        let weighted: Vec<_> = theta.iter().copied().zip(blocks.iter()).collect();
        CsrMatrix::linear_combination(&weighted)
    }
}

/// Affine decomposition of the stacked system matrix and right-hand side.
#[derive(Debug, Clone)]
pub struct SpaceTimeSystem {
    pub n_s: usize,
    pub n_t: usize,
    pub matrix: SpaceTimeOperator,
    pub rhs: AffineVector,
}

impl SpaceTimeSystem {
    /// Diagonal blocks `lhs(μ)`, sub-diagonal blocks `−rhs(μ)`; right-hand side
    /// block 1 is `g + rhs(μ) u0`, every later block is `g`.
    pub fn new(ivp: &ParametrizedIVP) -> Result<Self> {
        let (lhs, rhs) = cn_step_operators(&ivp.op, ivp.dt)?;
        let (n_s, n_t) = (ivp.n_s(), ivp.n_t);
        let terms = lhs
            .terms()
            .iter()
            .zip(rhs.terms())
            .map(|((c, d), (c2, s))| {
                debug_assert_eq!(c, c2);
                (
                    *c,
                    BlockBidiagonal {
                        n_t,
                        diag: d.clone(),
                        sub: s.scale(-1.0),
                    },
                )
            })
            .collect();
        let matrix = Affine::new(ivp.n_params(), terms)?;

        let mut constant = DVector::zeros(n_s * n_t);
        for b in 0..n_t {
            constant.rows_mut(b * n_s, n_s).copy_from(&ivp.source);
        }
        let mut rhs_terms = vec![(Coefficient::Constant, constant)];
        if ivp.u0.iter().any(|&v| v != 0.0) {
            for (c, m) in rhs.terms() {
                let mut v = DVector::zeros(n_s * n_t);
                v.rows_mut(0, n_s).copy_from(&m.mul_vec(&ivp.u0));
                rhs_terms.push((*c, v));
            }
        }
        let rhs = Affine::new(ivp.n_params(), rhs_terms)?;
        Ok(SpaceTimeSystem {
            n_s,
            n_t,
            matrix,
            rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_s * self.n_t
    }
}

/// Assembles the stacked `N_sN_t × N_sN_t` matrix and right-hand side at `mu`.
pub fn st_assemble(ivp: &ParametrizedIVP, mu: &[f64]) -> Result<(CsrMatrix, DVector<f64>)> {
    let sys = SpaceTimeSystem::new(ivp)?;
    Ok((sys.matrix.evaluate(mu)?, sys.rhs.evaluate(mu)?))
}

/// Solves the stacked system directly.
pub fn st_solve(ivp: &ParametrizedIVP, mu: &[f64]) -> Result<StateTrajectory> {
    let (m, b) = st_assemble(ivp, mu)?;
    if m.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "space-time rhs",
            expected: m.nrows(),
            found: b.len(),
        });
    }
    let x = SparseLu::factor(&m)?.solve(&b);
    StateTrajectory::from_stacked(&x, ivp.n_s())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::AffineOperator;
    use crate::fom::{fom_solve, SpatialMesh};

    fn tiny_ivp(u0: DVector<f64>, g: DVector<f64>) -> ParametrizedIVP {
        let mesh = SpatialMesh::new(vec![2]).unwrap();
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, -2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -2.0)]);
        let op = AffineOperator::new(1, vec![(Coefficient::Param(0), a)]).unwrap();
        ParametrizedIVP::new(mesh, op, g, u0, 0.3, 0.1).unwrap()
    }

    #[test]
    fn block_pattern() {
        let ivp = tiny_ivp(DVector::from_element(2, 1.0), DVector::from_element(2, 1.0));
        let (m, _) = st_assemble(&ivp, &[0.7]).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (6, 6));
        let d = m.to_dense();
        for bi in 0..3 {
            for bj in 0..3 {
                let block = d.view((bi * 2, bj * 2), (2, 2));
                let nonzero = block.iter().any(|&v| v != 0.0);
                let expected = bi == bj || bi == bj + 1;
                assert_eq!(nonzero, expected, "block ({bi},{bj})");
            }
        }
    }

    #[test]
    fn homogeneous_rhs_is_zero() {
        let ivp = tiny_ivp(DVector::zeros(2), DVector::zeros(2));
        let (_, b) = st_assemble(&ivp, &[1.3]).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
        let x = st_solve(&ivp, &[1.3]).unwrap();
        assert!(x.states.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_sequential_stepping_with_initial_state() {
        let ivp = tiny_ivp(DVector::from_vec(vec![1.0, -0.5]), DVector::from_vec(vec![0.2, 0.1]));
        let st = st_solve(&ivp, &[0.9]).unwrap();
        let seq = fom_solve(&ivp, &[0.9]).unwrap();
        assert!((st.states - seq.states).amax() < 1e-13);
    }

    #[test]
    fn structured_product_matches_assembled() {
        let ivp = tiny_ivp(DVector::zeros(2), DVector::from_element(2, 1.0));
        let sys = SpaceTimeSystem::new(&ivp).unwrap();
        let phi = DMatrix::from_fn(6, 2, |i, j| (i * 3 + j) as f64 * 0.1 - 0.4);
        for (_, term) in sys.matrix.terms() {
            let direct = term.to_csr().mul_dense(&phi);
            assert!((term.mul_dense(&phi) - direct).amax() < 1e-15);
        }
    }
}
