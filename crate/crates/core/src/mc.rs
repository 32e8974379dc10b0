//! Monte Carlo propagation: parameter sampling, ensemble solves and sample
//! moments.
//!
//! Sample `i` of a run with seed `s` is drawn from a ChaCha stream keyed by
//! `(s, i)`, and moments are reduced over fixed-size chunks merged in a fixed
//! tree order, so results do not depend on the number of worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::FomSolver;
use crate::rom::{reconstruct, rom_solve, ReducedModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Normal { mean, std } => {
                if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
                    return Err(Error::InvalidDistribution(format!(
                        "normal needs finite mean and std > 0, got N({mean}, {std})"
                    )));
                }
            }
            Marginal::Uniform { lo, hi } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform needs lo < hi, got U[{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Normal { mean, .. } => mean,
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

/// Independent marginals, one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDistribution {
    pub marginals: Vec<Marginal>,
}

impl ParameterDistribution {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidDistribution("no marginals".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(ParameterDistribution { marginals })
    }

    /// `c ~ N(1, 0.15)`, `ν ~ U[0.01, 0.02]`.
    pub fn advection_diffusion_1d() -> Self {
        ParameterDistribution {
            marginals: vec![
                Marginal::Normal { mean: 1.0, std: 0.15 },
                Marginal::Uniform { lo: 0.01, hi: 0.02 },
            ],
        }
    }

    /// `b ~ N(0.5, 0.1)`, `σ ~ U[0.003, 0.005]`, `ν ~ U[0.9, 1.1]`.
    pub fn advection_diffusion_2d() -> Self {
        ParameterDistribution {
            marginals: vec![
                Marginal::Normal { mean: 0.5, std: 0.1 },
                Marginal::Uniform { lo: 0.003, hi: 0.005 },
                Marginal::Uniform { lo: 0.9, hi: 1.1 },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::mean).collect()
    }

    /// The `index`-th draw of the stream identified by `seed`.
    pub fn sample_at(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.marginals
            .iter()
            .map(|m| match *m {
                Marginal::Normal { mean, std } => Normal::new(mean, std)
                    .expect("validated normal")
                    .sample(&mut rng),
                Marginal::Uniform { lo, hi } => Uniform::new(lo, hi)
                    .expect("validated uniform")
                    .sample(&mut rng),
            })
            .collect()
    }
}

pub fn sample_parameters(dist: &ParameterDistribution, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    for m in &dist.marginals {
        m.validate()?;
    }
    Ok((0..n as u64).map(|i| dist.sample_at(seed, i)).collect())
}

/// Componentwise mean and unbiased variance of a field.
///
/// `n_samples` is zero for moments integrated exactly from an expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
    pub n_samples: usize,
}

/// Running count, mean and sum of squared deviations (Welford / Chan).
#[derive(Debug, Clone)]
struct Accumulator {
    n: usize,
    mean: DVector<f64>,
    m2: DVector<f64>,
}

impl Accumulator {
    fn new(len: usize) -> Self {
        Accumulator {
            n: 0,
            mean: DVector::zeros(len),
            m2: DVector::zeros(len),
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x.iter()) {
            let d = v - *m;
            *m += d * inv;
            *s += d * (v - *m);
        }
    }

    fn merge(a: Accumulator, b: Accumulator) -> Accumulator {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let (na, nb) = (a.n as f64, b.n as f64);
        let delta = &b.mean - &a.mean;
        let mean = &a.mean + &delta * (nb / n as f64);
        let m2 = a.m2 + b.m2 + delta.component_mul(&delta) * (na * nb / n as f64);
        Accumulator { n, mean, m2 }
    }

    fn finish(self) -> Result<MomentEstimate> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "variance needs at least two samples, got {}",
                self.n
            )));
        }
        let variance = self.m2.map(|v| (v / (self.n - 1) as f64).max(0.0));
        Ok(MomentEstimate {
            mean: self.mean,
            variance,
            n_samples: self.n,
        })
    }
}

/// Merges adjacent pairs repeatedly, in order.
fn tree_reduce(mut parts: Vec<Accumulator>, len: usize) -> Accumulator {
    if parts.is_empty() {
        return Accumulator::new(len);
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(Accumulator::merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("one part remains")
}

const CHUNK: usize = 64;

pub fn sample_mean(ensemble: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
    let mut sum = DVector::zeros(first.len());
    for x in ensemble {
        if x.len() != first.len() {
            return Err(Error::DimensionMismatch {
                context: "ensemble member",
                expected: first.len(),
                found: x.len(),
            });
        }
        sum += x;
    }
    Ok(sum / ensemble.len() as f64)
}

pub fn sample_moments(ensemble: &[DVector<f64>]) -> Result<MomentEstimate> {
    let len = ensemble
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?
        .len();
    let mut parts = Vec::new();
    for chunk in ensemble.chunks(CHUNK) {
        let mut acc = Accumulator::new(len);
        for x in chunk {
            if x.len() != len {
                return Err(Error::DimensionMismatch {
                    context: "ensemble member",
                    expected: len,
                    found: x.len(),
                });
            }
            acc.push(x);
        }
        parts.push(acc);
    }
    tree_reduce(parts, len).finish()
}

/// Which field of each solution enters the moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldKind {
    /// `u^{N_t}`, length `N_s`.
    #[default]
    FinalTime,
    /// `[u^1; …; u^{N_t}]`, length `N_sN_t`.
    Trajectory,
}

/// Anything that maps a parameter sample to a full-space field.
pub trait SampleSolver: Sync {
    fn field(&self, mu: &[f64], kind: FieldKind) -> Result<DVector<f64>>;
    fn field_len(&self, kind: FieldKind) -> usize;
}

impl SampleSolver for FomSolver {
    fn field(&self, mu: &[f64], kind: FieldKind) -> Result<DVector<f64>> {
        match kind {
            FieldKind::FinalTime => self.final_state(mu),
            FieldKind::Trajectory => Ok(self.solve(mu)?.stacked()),
        }
    }

    fn field_len(&self, kind: FieldKind) -> usize {
        match kind {
            FieldKind::FinalTime => self.ivp().n_s(),
            FieldKind::Trajectory => self.ivp().n_s() * self.ivp().n_t,
        }
    }
}

impl SampleSolver for ReducedModel {
    fn field(&self, mu: &[f64], kind: FieldKind) -> Result<DVector<f64>> {
        match kind {
            FieldKind::FinalTime => self.solve_final_state(mu),
            FieldKind::Trajectory => Ok(reconstruct(self, &rom_solve(self, mu)?)?.stacked()),
        }
    }

    fn field_len(&self, kind: FieldKind) -> usize {
        match kind {
            FieldKind::FinalTime => self.n_s,
            FieldKind::Trajectory => self.n_s * self.n_t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub moments: MomentEstimate,
    /// Sum of per-sample solve times, in seconds.
    pub solve_seconds: f64,
}

/// Solves `n` sampled parameters through `solver` and reduces the fields to moments.
///
/// Aborts on failure and reports the lowest failing sample index, independent
/// of scheduling.
pub fn mc_propagate(
    solver: &dyn SampleSolver,
    dist: &ParameterDistribution,
    n: usize,
    seed: u64,
    kind: FieldKind,
) -> Result<MonteCarloRun> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    for m in &dist.marginals {
        m.validate()?;
    }
    let len = solver.field_len(kind);
    let first_failure = AtomicUsize::new(usize::MAX);
    let chunks: Vec<Result<(Accumulator, f64)>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new(len);
            let mut seconds = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                if i > first_failure.load(Ordering::Relaxed) {
                    break;
                }
                let mu = dist.sample_at(seed, i as u64);
                let start = Instant::now();
                let field = solver.field(&mu, kind).map_err(|e| {
                    first_failure.fetch_min(i, Ordering::Relaxed);
                    Error::SampleFailed {
                        index: i,
                        source: Box::new(e),
                    }
                })?;
                seconds += start.elapsed().as_secs_f64();
                acc.push(&field);
            }
            Ok((acc, seconds))
        })
        .collect();

    let mut parts = Vec::with_capacity(chunks.len());
    let mut solve_seconds = 0.0;
    for chunk in chunks {
        let (acc, s) = chunk?;
        parts.push(acc);
        solve_seconds += s;
    }
    let total = tree_reduce(parts, len);
    if total.n != n {
        return Err(Error::InvalidArgument("sampling aborted".into()));
    }
    Ok(MonteCarloRun {
        moments: total.finish()?,
        solve_seconds,
    })
}
