//! Snapshot collection and trial-subspace extraction: proper orthogonal
//! decomposition (energy-truncated SVD) and the Gaussian random range finder.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::{FomSolver, ParametrizedIVP};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    /// `N_s × (N_t · N_train)`: every time step of sample 1, then sample 2, …
    Spatial,
    /// `N_sN_t × N_train`: one stacked trajectory per column.
    SpaceTime,
}

#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    pub data: DMatrix<f64>,
    pub kind: SnapshotKind,
}

impl SnapshotMatrix {
    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }
}

/// Orthonormal trial basis `Φ` (columns) with its retained spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub columns: DMatrix<f64>,
    /// Retained singular values (empty for random range finder bases).
    pub singular_values: Vec<f64>,
    pub energy_captured: Option<f64>,
}

impl Basis {
    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal(columns: DMatrix<f64>) -> Result<Self> {
        if columns.ncols() == 0 {
            return Err(Error::InvalidSize {
                what: "basis width",
                value: 0,
            });
        }
        let basis = Basis {
            columns,
            singular_values: Vec::new(),
            energy_captured: None,
        };
        let dev = basis.orthonormality_error();
        if dev > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (deviation {dev:e})"
            )));
        }
        Ok(basis)
    }

    pub fn identity(n: usize) -> Self {
        Basis {
            columns: DMatrix::identity(n, n),
            singular_values: Vec::new(),
            energy_captured: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    /// `max |ΦᵀΦ − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.columns.tr_mul(&self.columns);
        (g - DMatrix::identity(self.k(), self.k())).amax()
    }

    /// `ΦΦᵀ x` for each column of `x`.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.columns * self.columns.tr_mul(x)
    }
}

/// Solves the FOM at every training parameter and lays out the snapshots.
pub fn collect_snapshots(
    ivp: &ParametrizedIVP,
    training_params: &[Vec<f64>],
    kind: SnapshotKind,
) -> Result<SnapshotMatrix> {
    if training_params.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let solver = FomSolver::new(ivp)?;
    let trajectories: Vec<_> = training_params
        .par_iter()
        .map(|mu| solver.solve(mu))
        .collect();
    let (n_s, n_t) = (ivp.n_s(), ivp.n_t);
    let n_train = training_params.len();
    let mut data = match kind {
        SnapshotKind::Spatial => DMatrix::zeros(n_s, n_t * n_train),
        SnapshotKind::SpaceTime => DMatrix::zeros(n_s * n_t, n_train),
    };
    // Both layouts are the same column-major buffer.
    let stride = n_s * n_t;
    for (index, traj) in trajectories.into_iter().enumerate() {
        let traj = traj.map_err(|e| Error::SampleFailed {
            index,
            source: Box::new(e),
        })?;
        data.as_mut_slice()[index * stride..(index + 1) * stride]
            .copy_from_slice(traj.states.as_slice());
    }
    Ok(SnapshotMatrix { data, kind })
}

/// Smallest `K` whose leading singular values hold at least `e_tol` of the energy.
pub fn select_k(singular_values: &[f64], e_tol: f64) -> Result<usize> {
    if !(e_tol > 0.0 && e_tol <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy tolerance must lie in (0, 1], got {e_tol}"
        )));
    }
    if singular_values.is_empty() {
        return Err(Error::InvalidArgument("empty singular spectrum".into()));
    }
    if singular_values.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument("singular values must be finite and nonnegative".into()));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("singular values must be nonincreasing".into()));
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::InvalidArgument("singular spectrum is identically zero".into()));
    }
    let mut acc = 0.0;
    for (k, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc / total >= e_tol {
            return Ok(k + 1);
        }
    }
    Ok(singular_values.len())
}

/// Flips each column so its largest-magnitude entry is positive.
fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Eigenpairs of a symmetric Gram matrix, sorted by decreasing eigenvalue,
/// with round-off-level eigenvalues clamped to zero.
fn sorted_gram_eigen(gram: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i].max(0.0));
    let floor = top * f64::EPSILON * n as f64;
    let values = order
        .iter()
        .map(|&i| {
            let l = eig.eigenvalues[i];
            if l > floor {
                l
            } else {
                0.0
            }
        })
        .collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Proper orthogonal decomposition with energy-based truncation.
///
/// The SVD is computed through the eigendecomposition of the smaller Gram
/// matrix (`UUᵀ` for wide snapshot sets, `UᵀU` for tall ones).
pub fn pod_basis(snapshots: &SnapshotMatrix, e_tol: f64) -> Result<Basis> {
    let u = &snapshots.data;
    if u.nrows() == 0 || u.ncols() == 0 || u.iter().all(|&v| v == 0.0) {
        return Err(Error::Decomposition("snapshot matrix is empty or zero".into()));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Decomposition("snapshot matrix is not finite".into()));
    }
    let wide = u.nrows() <= u.ncols();
    let gram = if wide { u * u.transpose() } else { u.transpose() * u };
    let (eigenvalues, vectors) = sorted_gram_eigen(gram);
    let singular: Vec<f64> = eigenvalues.iter().map(|l| l.sqrt()).collect();
    let k = select_k(&singular, e_tol)?;

    let mut columns = if wide {
        orthonormalize(vectors.columns(0, k).into_owned())
    } else {
        orthonormalize(u * vectors.columns(0, k))
    };
    fix_signs(&mut columns);

    let total: f64 = singular.iter().map(|s| s * s).sum();
    let kept: f64 = singular[..k].iter().map(|s| s * s).sum();
    Ok(Basis {
        columns,
        singular_values: singular[..k].to_vec(),
        energy_captured: Some(kept / total),
    })
}

/// Gaussian random range finder: `Y = U G` with `G ~ N(0,1)^{n_cols × k̂}`,
/// returning the `k̂` left singular vectors of `Y`.
pub fn rrf_basis(snapshots: &SnapshotMatrix, k_hat: usize, seed: u64) -> Result<Basis> {
    let u = &snapshots.data;
    let limit = u.nrows().min(u.ncols());
    if k_hat == 0 || k_hat > limit {
        return Err(Error::InvalidArgument(format!(
            "k_hat must lie in 1..={limit}, got {k_hat}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(u.ncols(), k_hat, |_, _| StandardNormal.sample(&mut rng));
    let y = u * g;
    let qr = y.qr();
    let (q, r) = (qr.q(), qr.r());
    let svd = r.svd(true, false);
    let w = svd
        .u
        .ok_or_else(|| Error::Decomposition("SVD of sketch failed".into()))?;
    let mut order: Vec<usize> = (0..k_hat).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let w_sorted = DMatrix::from_fn(k_hat, k_hat, |i, j| w[(i, order[j])]);
    let mut columns = q * w_sorted;
    fix_signs(&mut columns);
    Ok(Basis {
        columns,
        singular_values: Vec::new(),
        energy_captured: None,
    })
}
