//! Sparse direct solves through banded LU with partial pivoting.
//!
//! A [`SparseLu`] first picks between the natural ordering and a reverse
//! Cuthill–McKee ordering (whichever gives the cheaper band), then factors the
//! permuted matrix in LAPACK `gbtrf` style: row interchanges are applied only
//! to the trailing part of each row, so the solve replays them in order.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    // Row i holds columns i - kl ..= i + kl + ku.
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "banded factorization",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut upper = vec![0.0; n * width];
        for (i, j, v) in a.triplets() {
            upper[i * width + j + kl - i] += v;
        }
        let mut lower = vec![0.0; n * kl];
        let mut pivots = vec![0; n];
        let scale = upper.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let at = |i: usize, j: usize| i * width + j + kl - i;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = upper[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = upper[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || best <= scale * 1e-300 || !best.is_finite() {
                return Err(Error::singular(format!("zero pivot in column {k}")));
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    upper.swap(at(k, j), at(p, j));
                }
            }
            let pivot = upper[at(k, k)];
            for i in k + 1..=last_row {
                let l = upper[at(i, k)] / pivot;
                lower[k * kl + (i - k - 1)] = l;
                upper[at(i, k)] = 0.0;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        upper[at(i, j)] -= l * upper[at(k, j)];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            width,
            upper,
            lower,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + kl).min(n - 1);
                let col = &self.lower[k * kl..k * kl + (last - k)];
                for (bi, l) in b[k + 1..=last].iter_mut().zip(col) {
                    *bi -= l * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = &self.upper[k * w..(k + 1) * w];
            let last = (k + kl + ku).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=last {
                s -= row[j + kl - k] * b[j];
            }
            b[k] = s / row[kl];
        }
    }
}

/// Banded LU behind a bandwidth-reducing symmetric permutation.
#[derive(Debug, Clone)]
pub struct SparseLu {
    // perm[new] = old; None for natural ordering.
    perm: Option<Vec<usize>>,
    lu: BandedLu,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let ordering = choose_ordering(a);
        Self::factor_ordered(a, ordering.as_deref())
    }

    /// Factors with a precomputed ordering (`perm[new] = old`), or the natural one.
    pub fn factor_ordered(a: &CsrMatrix, perm: Option<&[usize]>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "sparse factorization",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        match perm {
            None => Ok(SparseLu {
                lu: BandedLu::factor(a)?,
                perm: None,
            }),
            Some(p) => Ok(SparseLu {
                lu: BandedLu::factor(&a.permute_symmetric(p))?,
                perm: Some(p.to_vec()),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        match &self.perm {
            None => self.lu.solve_in_place(b),
            Some(perm) => {
                let mut work: Vec<f64> = perm.iter().map(|&old| b[old]).collect();
                self.lu.solve_in_place(&mut work);
                for (new, &old) in perm.iter().enumerate() {
                    b[old] = work[new];
                }
            }
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        x
    }
}

/// Reverse Cuthill–McKee when it gives a cheaper band than the natural ordering.
pub fn choose_ordering(a: &CsrMatrix) -> Option<Vec<usize>> {
    let cost = |(kl, ku): (usize, usize)| kl * (2 * kl + ku + 1);
    let perm = reverse_cuthill_mckee(a);
    (cost(a.permute_symmetric(&perm).bandwidths()) < cost(a.bandwidths())).then_some(perm)
}

/// Reverse Cuthill–McKee ordering of the symmetrized sparsity graph.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for nb in adj.iter_mut() {
        nb.sort_unstable();
        nb.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .expect("unvisited node exists");
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> CsrMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                t.push((i, j, next()));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn matches_dense_lu_on_nonsymmetric_band() {
        // Small random entries with no diagonal dominance force row interchanges.
        for (n, kl, ku, seed) in [(12, 2, 1, 1), (30, 4, 3, 7), (25, 0, 2, 3), (9, 8, 8, 11)] {
            let a = random_banded(n, kl, ku, seed);
            let b = DVector::from_fn(n, |i, _| (i as f64 * 0.37).sin());
            let x = SparseLu::factor(&a).unwrap().solve(&b);
            let oracle = a.to_dense().lu().solve(&b).unwrap();
            let rel = (&x - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-10, "n={n} kl={kl} ku={ku}: rel {rel}");
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)]);
        assert!(matches!(
            SparseLu::factor(&a),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = random_banded(40, 3, 2, 5).permute_symmetric(&(0..40).rev().collect::<Vec<_>>());
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..40).collect::<Vec<_>>());
    }
}
