//! Parameter-affine decompositions `X(μ) = Σ_q θ_q(μ) X_q`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Scalar coefficient function `θ_q(μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Constant,
    Param(usize),
    /// `offset + scale · μ_index`
    Scaled {
        index: usize,
        scale: f64,
        offset: f64,
    },
}

impl Coefficient {
    pub fn eval(&self, mu: &[f64]) -> f64 {
        match *self {
            Coefficient::Constant => 1.0,
            Coefficient::Param(k) => mu[k],
            Coefficient::Scaled {
                index,
                scale,
                offset,
            } => offset + scale * mu[index],
        }
    }

    fn max_index(&self) -> Option<usize> {
        match *self {
            Coefficient::Constant => None,
            Coefficient::Param(k) | Coefficient::Scaled { index: k, .. } => Some(k),
        }
    }
}

/// An ordered list of `(θ_q, X_q)` terms over `n_params` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<T> {
    n_params: usize,
    terms: Vec<(Coefficient, T)>,
}

pub type AffineOperator = Affine<CsrMatrix>;
pub type DenseAffineOperator = Affine<DMatrix<f64>>;
pub type AffineVector = Affine<DVector<f64>>;

impl<T> Affine<T> {
    pub fn new(n_params: usize, terms: Vec<(Coefficient, T)>) -> Result<Self> {
        if let Some(k) = terms.iter().filter_map(|(c, _)| c.max_index()).max() {
            if k >= n_params {
                return Err(Error::InvalidArgument(format!(
                    "coefficient references parameter {k} but only {n_params} parameters exist"
                )));
            }
        }
        Ok(Affine { n_params, terms })
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn terms(&self) -> &[(Coefficient, T)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficients(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_params(mu)?;
        Ok(self.terms.iter().map(|(c, _)| c.eval(mu)).collect())
    }

    pub fn check_params(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: self.n_params,
                found: mu.len(),
            });
        }
        Ok(())
    }

    /// Applies `f` to every term, keeping coefficient tags.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Affine<U> {
        Affine {
            n_params: self.n_params,
            terms: self.terms.iter().map(|(c, x)| (*c, f(x))).collect(),
        }
    }

    pub fn try_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<Affine<U>> {
        let terms = self
            .terms
            .iter()
            .map(|(c, x)| Ok((*c, f(x)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Affine {
            n_params: self.n_params,
            terms,
        })
    }

    /// Concatenates the term lists of two decompositions over the same parameters.
    pub fn concat(mut self, other: Affine<T>) -> Result<Self> {
        if self.n_params != other.n_params {
            return Err(Error::DimensionMismatch {
                context: "affine concatenation",
                expected: self.n_params,
                found: other.n_params,
            });
        }
        self.terms.extend(other.terms);
        Ok(self)
    }
}

impl AffineOperator {
    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, m)| m.nrows())
    }

    /// `A(μ) = Σ_q θ_q(μ) A_q`.
    pub fn evaluate(&self, mu: &[f64]) -> Result<CsrMatrix> {
        let theta = self.coefficients(mu)?;
        let weighted: Vec<_> = theta
            .iter()
            .zip(&self.terms)
            .map(|(&t, (_, m))| (t, m))
            .collect();
        CsrMatrix::linear_combination(&weighted)
    }
}

impl DenseAffineOperator {
    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, m)| m.nrows())
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<DMatrix<f64>> {
        let theta = self.coefficients(mu)?;
        self.evaluate_with(&theta)
    }

    pub fn evaluate_with(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let (_, first) = self
            .terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty affine operator".into()))?;
        let mut out = DMatrix::zeros(first.nrows(), first.ncols());
        for (&t, (_, m)) in theta.iter().zip(&self.terms) {
            out += m * t;
        }
        Ok(out)
    }
}

impl AffineVector {
    pub fn dim(&self) -> usize {
        self.terms.first().map_or(0, |(_, v)| v.len())
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<DVector<f64>> {
        let theta = self.coefficients(mu)?;
        let mut out = DVector::zeros(self.dim());
        for (&t, (_, v)) in theta.iter().zip(&self.terms) {
            out.axpy(t, v, 1.0);
        }
        Ok(out)
    }
}
