//! Reproducible sample ensembles and empirical expectations.
//!
//! The ensemble is the discrete stand-in for the probability space: every
//! expectation in the solvers is a plain sample mean over the same fixed set
//! of realizations.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Block length for the blocked pairwise reductions below.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// Uniform on `[-0.5, 0.5]`.
    Uniform,
    StandardNormal,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::StandardNormal => "standard_normal",
        }
    }
}

/// `N × M` table of realizations `ξ_j(θ⁽ⁿ⁾)`, stored column by column.
///
/// Column `j` depends only on `(seed, j)`: each column is drawn from its own
/// ChaCha stream, so growing `M` never perturbs the existing columns.
#[derive(Debug, Clone)]
pub struct SampleEnsemble {
    n: usize,
    m: usize,
    distribution: Distribution,
    seed: u64,
    data: Vec<f64>,
}

impl SampleEnsemble {
    pub fn generate(distribution: Distribution, n: usize, m: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("sample count must be at least 2, got {n}")));
        }
        if m < 1 {
            return Err(Error::invalid("random dimension must be at least 1"));
        }
        let mut data = Vec::with_capacity(n * m);
        for j in 0..m {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            match distribution {
                Distribution::Uniform => {
                    data.extend((0..n).map(|_| rng.random::<f64>() - 0.5));
                }
                Distribution::StandardNormal => {
                    data.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                }
            }
        }
        Ok(Self { n, m, distribution, seed, data })
    }

    /// Builds an ensemble from explicit columns (each of length `N`).
    pub fn from_columns(distribution: Distribution, columns: Vec<Vec<f64>>) -> Result<Self> {
        let m = columns.len();
        if m == 0 {
            return Err(Error::invalid("at least one column is required"));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(Error::invalid(format!("sample count must be at least 2, got {n}")));
        }
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("columns have different lengths"));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite sample value"));
        }
        let data = columns.into_iter().flatten().collect();
        Ok(Self { n, m, distribution, seed: 0, data })
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Realizations of `ξ_{j+1}` (zero-based column index).
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn value(&self, sample: usize, j: usize) -> f64 {
        self.data[j * self.n + sample]
    }

    /// Copies sample `n` (all `M` variables) into `out`.
    pub fn row_into(&self, sample: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.m).map(|j| self.data[j * self.n + sample]));
    }

    pub fn row(&self, sample: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m);
        self.row_into(sample, &mut out);
        out
    }

    /// `out[n] = Σ_j weights[j] ξ_j(θ⁽ⁿ⁾)`.
    pub fn combine_columns(&self, weights: &[f64], out: &mut [f64]) {
        debug_assert_eq!(weights.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        out.fill(0.0);
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(self.column(j)) {
                *o += w * x;
            }
        }
    }

    /// Several [`combine_columns`](Self::combine_columns) at once, reading
    /// the table a single time. `weights[r]` produces `outs[r]`.
    pub fn combine_columns_many(&self, weights: &[&[f64]], outs: &mut [Vec<f64>]) {
        debug_assert_eq!(weights.len(), outs.len());
        for out in outs.iter_mut() {
            out.clear();
            out.resize(self.n, 0.0);
        }
        for j in 0..self.m {
            let col = self.column(j);
            for (w, out) in weights.iter().zip(outs.iter_mut()) {
                let w = w[j];
                if w == 0.0 {
                    continue;
                }
                for (o, &x) in out.iter_mut().zip(col) {
                    *o += w * x;
                }
            }
        }
    }

    /// `E{w_r ξ_j}` for every weight vector `w_r` and every `j < count`,
    /// reading each column once. Indexed `[r][j]`. Bitwise equal to
    /// [`mean_product`] of each pair.
    pub fn column_moments(&self, weights: &[&[f64]], count: usize) -> Vec<Vec<f64>> {
        let count = count.min(self.m);
        let blocks = self.n.div_ceil(BLOCK);
        let mut out = vec![Vec::with_capacity(count); weights.len()];
        let mut partial = vec![vec![0.0; blocks]; weights.len()];
        for j in 0..count {
            let col = self.column(j);
            for (b, s) in (0..self.n).step_by(BLOCK).enumerate() {
                let e = (s + BLOCK).min(self.n);
                for (w, p) in weights.iter().zip(partial.iter_mut()) {
                    p[b] = block_dot(&w[s..e], &col[s..e]);
                }
            }
            for (p, o) in partial.iter().zip(out.iter_mut()) {
                o.push(pairwise(p.clone()) / self.n as f64);
            }
        }
        out
    }
}

/// One random variable represented by its values on the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariableSamples(Vec<f64>);

impl RandomVariableSamples {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(value: f64, n: usize) -> Self {
        Self(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scale(&mut self, s: f64) {
        self.0.iter_mut().for_each(|v| *v *= s);
    }
}

impl Deref for RandomVariableSamples {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RandomVariableSamples {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Pairwise sum of per-block partial sums, `block(start, end)` covering
/// `start..end` with at most [`BLOCK`] entries.
fn blocked_sum(n: usize, block: impl Fn(usize, usize) -> f64) -> f64 {
    pairwise((0..n).step_by(BLOCK).map(|s| block(s, (s + BLOCK).min(n))).collect())
}

fn pairwise(mut partial: Vec<f64>) -> f64 {
    while partial.len() > 1 {
        partial = partial.chunks(2).map(|c| c.iter().sum()).collect();
    }
    partial.first().copied().unwrap_or(0.0)
}

/// Sum with [`LANES`] interleaved accumulators, pairwise-combined.
#[inline]
fn lane_sum(chunks: impl Iterator<Item = [f64; LANES]>, tail: impl Iterator<Item = f64>) -> f64 {
    let mut acc = [0.0; LANES];
    for c in chunks {
        for k in 0..LANES {
            acc[k] += c[k];
        }
    }
    let mut t = 0.0;
    for v in tail {
        t += v;
    }
    fold_lanes(acc, t)
}

const LANES: usize = 8;

/// Sample mean of `a`, without argument checks.
pub fn mean(a: &[f64]) -> f64 {
    blocked_sum(a.len(), |s, e| block_sum(&a[s..e])) / a.len() as f64
}

/// Sample mean of `a ⊙ b`, without argument checks.
pub fn mean_product(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    blocked_sum(a.len(), |s, e| block_dot(&a[s..e], &b[s..e])) / a.len() as f64
}

fn block_sum(a: &[f64]) -> f64 {
    let x = a.chunks_exact(LANES);
    let tail = x.remainder().iter().copied();
    lane_sum(x.map(|c| std::array::from_fn(|k| c[k])), tail)
}

fn block_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let tail = dot_lanes(&mut acc, a, b);
    fold_lanes(acc, tail)
}

/// Accumulates `a ⊙ b` over whole lane chunks into `acc` and returns the sum
/// of the leftover entries.
#[inline]
fn dot_lanes(acc: &mut [f64; LANES], a: &[f64], b: &[f64]) -> f64 {
    let (x, y) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let mut t = 0.0;
    for (p, q) in x.remainder().iter().zip(y.remainder()) {
        t += p * q;
    }
    for (p, q) in x.zip(y) {
        for k in 0..LANES {
            acc[k] += p[k] * q[k];
        }
    }
    t
}

fn fold_lanes(mut acc: [f64; LANES], tail: f64) -> f64 {
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for k in 0..width {
            acc[k] += acc[k + width];
        }
    }
    acc[0] + tail
}

/// Sample mean of `a ⊙ b ⊙ c`, without argument checks.
pub fn mean_product3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    debug_assert!(a.len() == b.len() && b.len() == c.len());
    blocked_sum(a.len(), |s, e| {
        let (x, y, z) = (a[s..e].chunks_exact(LANES), b[s..e].chunks_exact(LANES), c[s..e].chunks_exact(LANES));
        let tail = x.remainder().iter().zip(y.remainder()).zip(z.remainder()).map(|((p, q), r)| (p * q) * r);
        let body = x.zip(y).zip(z).map(|((p, q), r)| std::array::from_fn(|k| (p[k] * q[k]) * r[k]));
        lane_sum(body, tail)
    }) / a.len() as f64
}

/// Empirical expectation: arithmetic mean over the ensemble.
pub fn expectation(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("expectation of an empty sample list"));
    }
    Ok(mean(samples))
}

/// `E{a b c}` as a sample mean; symmetric in `a` and `b`.
pub fn expectation_product(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::invalid("expectation of an empty sample list"));
    }
    if a.len() != b.len() || b.len() != c.len() {
        return Err(Error::invalid(format!(
            "sample length mismatch: {}, {}, {}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    Ok(mean_product3(a, b, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_entries_are_bounded() {
        let e = SampleEnsemble::generate(Distribution::Uniform, 100_000, 100, 1).unwrap();
        assert!(e.data.iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn same_seed_same_table() {
        let a = SampleEnsemble::generate(Distribution::StandardNormal, 4, 1, 99).unwrap();
        let b = SampleEnsemble::generate(Distribution::StandardNormal, 4, 1, 99).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn columns_do_not_depend_on_dimension() {
        let a = SampleEnsemble::generate(Distribution::StandardNormal, 50, 3, 5).unwrap();
        let b = SampleEnsemble::generate(Distribution::StandardNormal, 50, 7, 5).unwrap();
        for j in 0..3 {
            assert_eq!(a.column(j), b.column(j));
        }
        assert_ne!(a.column(0), a.column(1));
    }

    #[test]
    fn column_moments_match_pairwise_means() {
        let e = SampleEnsemble::generate(Distribution::Uniform, 1003, 6, 4).unwrap();
        let w: Vec<f64> = (0..1003).map(|i| (i as f64 * 0.37).sin()).collect();
        let v: Vec<f64> = (0..1003).map(|i| 1.0 + i as f64 * 1e-3).collect();
        let m = e.column_moments(&[&w, &v], 4);
        for j in 0..4 {
            assert_eq!(m[0][j], mean_product(&w, e.column(j)));
            assert_eq!(m[1][j], mean_product(&v, e.column(j)));
        }
        assert_eq!(m[0].len(), 4);
    }

    #[test]
    fn rejects_empty_shapes() {
        assert!(SampleEnsemble::generate(Distribution::Uniform, 0, 3, 1).is_err());
        assert!(SampleEnsemble::generate(Distribution::Uniform, 10, 0, 1).is_err());
        assert!(SampleEnsemble::generate(Distribution::Uniform, 1, 3, 1).is_err());
    }

    #[test]
    fn uniform_column_mean_is_centered() {
        let e = SampleEnsemble::generate(Distribution::Uniform, 100_000, 1, 7).unwrap();
        let m = expectation(e.column(0)).unwrap();
        assert!(m.abs() <= 0.003, "mean {m}");
    }

    #[test]
    fn second_moments() {
        let e = SampleEnsemble::generate(Distribution::Uniform, 100_000, 1, 3).unwrap();
        let sq: Vec<f64> = e.column(0).iter().map(|x| x * x).collect();
        assert!((expectation(&sq).unwrap() - 1.0 / 12.0).abs() <= 1e-3);

        let e = SampleEnsemble::generate(Distribution::StandardNormal, 100_000, 1, 3).unwrap();
        let sq: Vec<f64> = e.column(0).iter().map(|x| x * x).collect();
        assert!((expectation(&sq).unwrap() - 1.0).abs() <= 0.02);
    }

    #[test]
    fn expectation_of_constant_is_exact() {
        assert_eq!(expectation(&[1.0; 977]).unwrap(), 1.0);
        assert!(expectation(&[]).is_err());
    }

    #[test]
    fn triple_products() {
        let two = vec![2.0; 10];
        assert_eq!(expectation_product(&two, &two, &two).unwrap(), 8.0);

        let e = SampleEnsemble::generate(Distribution::Uniform, 100_000, 1, 11).unwrap();
        let ones = vec![1.0; 100_000];
        let v = expectation_product(&ones, &ones, e.column(0)).unwrap();
        assert!(v.abs() <= 0.003);

        let e = SampleEnsemble::generate(Distribution::StandardNormal, 100_000, 1, 11).unwrap();
        let x = e.column(0);
        assert!(expectation_product(x, x, x).unwrap().abs() <= 0.03);

        assert!(expectation_product(&ones[..3], &ones[..4], &ones[..3]).is_err());
    }

    #[test]
    fn antithetic_pairs_average_to_exact_zero() {
        let mut col = Vec::new();
        for i in 0..1000 {
            let v = (i as f64 * 0.37).sin();
            col.push(v);
            col.push(-v);
        }
        assert_eq!(mean(&col), 0.0);
    }

    proptest! {
        #[test]
        fn expectation_is_linear(
            a in prop::collection::vec(-10.0..10.0f64, 64),
            b in prop::collection::vec(-10.0..10.0f64, 64),
            alpha in -3.0..3.0f64,
            beta in -3.0..3.0f64,
        ) {
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = expectation(&combo).unwrap();
            let rhs = alpha * expectation(&a).unwrap() + beta * expectation(&b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn triple_product_is_symmetric_in_first_two(
            a in prop::collection::vec(-5.0..5.0f64, 1..300),
            seed in any::<u64>(),
        ) {
            let n = a.len();
            let e = SampleEnsemble::generate(Distribution::StandardNormal, n.max(2), 2, seed).unwrap();
            let b = &e.column(0)[..n];
            let c = &e.column(1)[..n];
            prop_assert_eq!(
                expectation_product(&a, b, c).unwrap(),
                expectation_product(b, &a, c).unwrap()
            );
        }
    }
}
