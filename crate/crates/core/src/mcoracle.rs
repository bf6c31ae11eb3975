//! Brute-force Monte Carlo reference: one full deterministic solve per
//! fresh realization, recording the solution at a probe point.
//!
//! Realizations come from a seed stream disjoint from the solver ensembles.
//! Sample `n` is drawn from its own ChaCha stream, so results do not depend
//! on the thread count.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::burgers::BurgersProblem;
use crate::elliptic::EllipticProblem;
use crate::fem2d::EnvelopeCholesky;
use crate::sampling::Distribution;
use crate::stats::{moments, Moments};
use crate::wave::WaveProblem;
use crate::{Error, Result};

/// Default number of oracle samples.
pub const DEFAULT_ORACLE_SAMPLES: usize = 20_000;

/// Largest tolerated fraction of failed sample solves.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Seed of the oracle stream for a run seeded with `seed`.
pub fn oracle_seed(seed: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ 0x6a09_e667_f3bc_c909;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Realization `n` of the oracle stream.
pub fn oracle_realization(distribution: Distribution, m: usize, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(n as u64);
    match distribution {
        Distribution::Uniform => (0..m).map(|_| rng.random::<f64>() - 0.5).collect(),
        Distribution::StandardNormal => (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCResult {
    pub problem: String,
    /// Probe values of the successful samples, in sample order.
    pub values: Vec<f64>,
    /// Sample index of each entry of `values`.
    pub indices: Vec<usize>,
    pub summary: Moments,
    pub n_mc: usize,
    pub seed: u64,
    pub failures: usize,
}

impl MCResult {
    /// `sample,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,value\n");
        for (i, v) in self.indices.iter().zip(&self.values) {
            writeln!(out, "{i},{v:e}").unwrap();
        }
        out
    }
}

/// Runs `solve` on `n_mc` realizations of dimension `m` and collects the
/// probe values. Failed samples are skipped and counted.
pub fn mc_solve<F>(
    problem: &str,
    distribution: Distribution,
    m: usize,
    n_mc: usize,
    seed: u64,
    solve: F,
) -> Result<MCResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if n_mc < 2 {
        return Err(Error::invalid(format!("oracle needs at least 2 samples, got {n_mc}")));
    }
    let outcomes: Vec<Option<f64>> = (0..n_mc)
        .into_par_iter()
        .map(|n| {
            let xi = oracle_realization(distribution, m, seed, n);
            solve(&xi).ok().filter(|v| v.is_finite())
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    if failures as f64 > MAX_FAILURE_RATE * n_mc as f64 {
        return Err(Error::Oracle { failures, total: n_mc });
    }
    let (indices, values): (Vec<usize>, Vec<f64>) =
        outcomes.into_iter().enumerate().filter_map(|(i, o)| o.map(|v| (i, v))).unzip();
    let summary = moments(&values)?;
    Ok(MCResult { problem: problem.to_string(), values, indices, summary, n_mc, seed, failures })
}

/// Elliptic oracle. The nodal coefficient of each realization is assembled
/// directly, without going through the affine operator family.
pub fn mc_elliptic(problem: &EllipticProblem, x: f64, y: f64, n_mc: usize, seed: u64) -> Result<MCResult> {
    let disc = problem.discretization();
    let cfg = problem.config();
    let kl = problem.kl();
    let n = disc.mesh().n_nodes();
    let reaction = disc.mass(&vec![cfg.reaction; n])?;
    let load = disc.load(&vec![cfg.load; n])?;
    let probe = disc.point_functional(x, y)?;
    let m = problem.dimension();
    mc_solve("elliptic", Distribution::Uniform, m, n_mc, seed, |xi| {
        let mut coef = vec![cfg.coefficient.mean; n];
        for ((mode, &nu), &s) in kl.modes.iter().zip(&kl.nu).zip(xi) {
            let w = cfg.coefficient.scale * nu * s;
            for (c, v) in coef.iter_mut().zip(mode) {
                *c += w * v;
            }
        }
        let mut a = disc.stiffness(&coef)?;
        for (v, r) in a.values_mut().iter_mut().zip(reaction.values()) {
            *v += r;
        }
        let u = EnvelopeCholesky::factor(&a)?.solve(&load)?;
        Ok(probe.iter().map(|&(d, w)| w * u[d]).sum())
    })
}

/// Burgers oracle: a full nonlinear march per realization.
pub fn mc_burgers(problem: &BurgersProblem, x: f64, t: f64, n_mc: usize, seed: u64) -> Result<MCResult> {
    let probe = problem.probe_functional(x, t)?;
    mc_solve("burgers", Distribution::StandardNormal, problem.dimension(), n_mc, seed, |xi| {
        let u = problem.solve_realization(xi)?;
        Ok(probe.iter().map(|&(i, w)| w * u[i]).sum())
    })
}

/// Wave oracle: build the sampled initial shape and march to the probe time.
pub fn mc_wave(problem: &WaveProblem, x: f64, y: f64, t: f64, n_mc: usize, seed: u64) -> Result<MCResult> {
    let probe = problem.probe_functional(x, y, t)?;
    let nd = problem.n_dofs();
    let level = probe.first().map_or(0, |&(i, _)| i / nd);
    mc_solve("wave", Distribution::StandardNormal, problem.dimension(), n_mc, seed, |xi| {
        let u = problem.march(&problem.initial_shape(xi), level)?;
        Ok(probe.iter().map(|&(i, w)| w * u[i]).sum())
    })
}
