//! Rank-one enrichment driver.
//!
//! The solution is grown one couple `(λ_k, d_k)` at a time. For each new
//! couple an inner loop alternates
//!
//! 1. a Galerkin projection in the random space: given `λ_k`, solve a
//!    deterministic problem for `d_k`;
//! 2. a Galerkin projection in the deterministic space: given `d_k`, solve a
//!    scalar equation for `λ_k(θ⁽ⁿ⁾)` at every sample.
//!
//! `d_k` is normalized after every deterministic update (its norm is absorbed
//! into `λ_k`). The inner loop stops once successive normalized modes agree,
//! the outer loop once the relative energy of the newest couple is small.

use std::fmt::Write as _;
use std::ops::Deref;

use crate::sampling::{mean_product, RandomVariableSamples};
use crate::{Error, Result};

/// Nodal values of one deterministic mode `d_k` (spatial or space-time).
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicField(Vec<f64>);

impl DeterministicField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
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

impl Deref for DeterministicField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DeterministicField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone)]
pub struct Couple {
    pub lambda: RandomVariableSamples,
    pub d: DeterministicField,
}

/// Convergence record for one accepted couple.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupleRecord {
    pub k: usize,
    pub inner_iterations: usize,
    /// `ε_local` after each inner iteration (the first iteration has no
    /// predecessor and is not recorded).
    pub eps_local: Vec<f64>,
    pub eps_global: f64,
    /// The inner loop hit its cap before `ε_local < ε₂`.
    pub stagnated: bool,
}

/// Truncated expansion `u_k = Σ_i λ_i d_i` with its Gram matrices and
/// convergence history.
#[derive(Debug, Clone, Default)]
pub struct SeparatedSolution {
    couples: Vec<Couple>,
    /// `⟨d_i, d_j⟩`
    gram_d: Vec<Vec<f64>>,
    /// `E{λ_i λ_j}`
    gram_lambda: Vec<Vec<f64>>,
    pub history: Vec<CoupleRecord>,
    /// Set when the enrichment stopped because the next increment vanished.
    pub exhausted: bool,
}

impl SeparatedSolution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.couples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couples.is_empty()
    }

    pub fn couples(&self) -> &[Couple] {
        &self.couples
    }

    pub fn lambda(&self, i: usize) -> &RandomVariableSamples {
        &self.couples[i].lambda
    }

    pub fn mode(&self, i: usize) -> &DeterministicField {
        &self.couples[i].d
    }

    pub fn gram_d(&self) -> &[Vec<f64>] {
        &self.gram_d
    }

    pub fn gram_lambda(&self) -> &[Vec<f64>] {
        &self.gram_lambda
    }

    /// Appends a couple, extending both Gram matrices with `inner`.
    pub fn push(
        &mut self,
        lambda: RandomVariableSamples,
        d: DeterministicField,
        inner: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<()> {
        if let Some(c) = self.couples.first() {
            if c.lambda.len() != lambda.len() || c.d.len() != d.len() {
                return Err(Error::invalid("couple shape does not match the existing couples"));
            }
        }
        let k = self.couples.len();
        let gd: Vec<f64> = self.couples.iter().map(|c| inner(&c.d, &d)).collect();
        let gl: Vec<f64> = self.couples.iter().map(|c| mean_product(&c.lambda, &lambda)).collect();
        for i in 0..k {
            self.gram_d[i].push(gd[i]);
            self.gram_lambda[i].push(gl[i]);
        }
        let mut row_d = gd;
        row_d.push(inner(&d, &d));
        let mut row_l = gl;
        row_l.push(mean_product(&lambda, &lambda));
        self.gram_d.push(row_d);
        self.gram_lambda.push(row_l);
        self.couples.push(Couple { lambda, d });
        Ok(())
    }

    /// `∫ E{u_j²}` for the expansion truncated at `j` couples.
    pub fn energy(&self, j: usize) -> f64 {
        let mut e = 0.0;
        for a in 0..j {
            for b in 0..j {
                e += self.gram_lambda[a][b] * self.gram_d[a][b];
            }
        }
        e
    }

    /// Energy added by couple `k` (zero-based): `E{λ_k²}⟨d_k,d_k⟩ + 2 Σ_{i<k}
    /// E{λ_k λ_i}⟨d_k,d_i⟩`.
    pub fn increment_energy(&self, k: usize) -> f64 {
        let mut e = self.gram_lambda[k][k] * self.gram_d[k][k];
        for i in 0..k {
            e += 2.0 * self.gram_lambda[k][i] * self.gram_d[k][i];
        }
        e
    }

    /// `ε_global` of the newest couple, from the Gram matrices.
    pub fn last_global_error(&self) -> Result<f64> {
        let k = self.len().checked_sub(1).ok_or(Error::DegenerateSolution)?;
        let inc = self.increment_energy(k);
        let total = self.energy(k) + inc;
        if total == 0.0 {
            return Err(Error::DegenerateSolution);
        }
        Ok(inc.abs() / total)
    }

    /// `u_k(·, θ⁽ⁿ⁾) = Σ_i λ_i(θ⁽ⁿ⁾) d_i`.
    pub fn evaluate_at_sample(&self, n: usize) -> Result<DeterministicField> {
        let Some(first) = self.couples.first() else {
            return Ok(DeterministicField::new(Vec::new()));
        };
        if n >= first.lambda.len() {
            return Err(Error::invalid(format!("sample {n} out of range (N = {})", first.lambda.len())));
        }
        let mut out = vec![0.0; first.d.len()];
        for c in &self.couples {
            let l = c.lambda[n];
            for (o, v) in out.iter_mut().zip(c.d.iter()) {
                *o += l * v;
            }
        }
        Ok(DeterministicField::new(out))
    }

    /// Applies a linear functional `Σ w_i u[idx_i]` to every sample.
    pub fn probe(&self, functional: &[(usize, f64)]) -> Vec<f64> {
        let Some(first) = self.couples.first() else {
            return Vec::new();
        };
        let mut out = vec![0.0; first.lambda.len()];
        for c in &self.couples {
            let dv: f64 = functional.iter().map(|&(i, w)| w * c.d[i]).sum();
            for (o, l) in out.iter_mut().zip(c.lambda.iter()) {
                *o += l * dv;
            }
        }
        out
    }

    /// Convergence history as CSV with columns
    /// `k,inner_iter,eps_local,eps_global,eps_local_trace`. The trace lists
    /// every inner-iteration local error, separated by `;`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("k,inner_iter,eps_local,eps_global,eps_local_trace\n");
        for r in &self.history {
            let local = r.eps_local.last().copied().unwrap_or(f64::NAN);
            let trace: Vec<String> = r.eps_local.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{},{},{:e},{:e},{}", r.k, r.inner_iterations, local, r.eps_global, trace.join(";"));
        }
        s
    }
}

/// `ε_global = |∫E{u_k²} - ∫E{u_{k-1}²}| / ∫E{u_k²}`, evaluated from Gram
/// matrices.
pub fn global_error(u_k: &SeparatedSolution, u_km1: &SeparatedSolution) -> Result<f64> {
    let ek = u_k.energy(u_k.len());
    if ek == 0.0 {
        return Err(Error::DegenerateSolution);
    }
    Ok((ek - u_km1.energy(u_km1.len())).abs() / ek)
}

/// `ε_local = 2 - 2⟨d_new, d_old⟩` for normalized modes.
pub fn local_error(d_new: &[f64], d_old: &[f64], inner: impl Fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    if d_new.len() != d_old.len() {
        return Err(Error::invalid("modes have different lengths"));
    }
    for (name, d) in [("new", d_new), ("old", d_old)] {
        let norm = inner(d, d).sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("{name} mode is not normalized (norm {norm})")));
        }
    }
    Ok(2.0 - 2.0 * inner(d_new, d_old))
}

/// Problem-specific halves of the alternating iteration.
pub trait ProblemAdapter {
    /// Ensemble size `N`.
    fn n_samples(&self) -> usize;

    /// Discrete L2 inner product of two deterministic fields.
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;

    /// An optional deterministic first couple (`λ ≡ const`), accepted as
    /// `k = 1` without inner iterations.
    fn seed_couple(&mut self) -> Result<Option<DeterministicField>> {
        Ok(None)
    }

    /// Starting random variable for couple `k` (one-based).
    fn initial_lambda(&self, _k: usize) -> RandomVariableSamples {
        RandomVariableSamples::constant(1.0, self.n_samples())
    }

    /// Galerkin projection in the random space: the (unnormalized) `d_k` for a
    /// given `λ_k`, with `current` holding the accepted couples.
    fn deterministic_update(
        &mut self,
        lambda: &RandomVariableSamples,
        current: &SeparatedSolution,
    ) -> Result<DeterministicField>;

    /// Sample-wise projection in the deterministic space: `λ_k(θ⁽ⁿ⁾)` for a
    /// normalized `d_k`. `previous` is the last inner iterate, if any.
    fn stochastic_update(
        &mut self,
        d: &DeterministicField,
        previous: Option<&RandomVariableSamples>,
        current: &SeparatedSolution,
    ) -> Result<RandomVariableSamples>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrichmentOptions {
    /// Outer tolerance `ε₁` on `ε_global`.
    pub eps_global: f64,
    /// Inner tolerance `ε₂` on `ε_local`.
    pub eps_local: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for EnrichmentOptions {
    fn default() -> Self {
        Self { eps_global: 1e-6, eps_local: 1e-3, max_outer: 50, max_inner: 25 }
    }
}

impl EnrichmentOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_global > 0.0) || !(self.eps_local > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.max_outer < 1 || self.max_inner < 1 {
            return Err(Error::invalid("iteration caps must be at least 1"));
        }
        Ok(())
    }
}

/// Builds couples until `ε_global ≤ ε₁`, starting from `u_0 = 0`.
///
/// A zero increment (vanishing `d_k` or `λ_k`) means the residual is already
/// orthogonal to the enrichment direction; the expansion is then returned as
/// is, with `exhausted` set and a final history entry with `ε_global = 0`.
pub fn enrich_until_converged<A: ProblemAdapter + ?Sized>(
    adapter: &mut A,
    opts: &EnrichmentOptions,
) -> Result<SeparatedSolution> {
    opts.validate()?;
    let mut sol = SeparatedSolution::new();
    if let Some(d) = adapter.seed_couple()? {
        let norm = adapter.inner(&d, &d).sqrt();
        if norm > 0.0 && norm.is_finite() {
            let mut d = d;
            d.scale(1.0 / norm);
            let lambda = RandomVariableSamples::constant(norm, adapter.n_samples());
            sol.push(lambda, d, |a, b| adapter.inner(a, b))?;
            let eps_global = sol.last_global_error()?;
            sol.history.push(CoupleRecord { k: 1, inner_iterations: 0, eps_local: Vec::new(), eps_global, stagnated: false });
            if eps_global <= opts.eps_global {
                return Ok(sol);
            }
        }
    }
    loop {
        let k = sol.len() + 1;
        if k > opts.max_outer {
            return Err(Error::NonConvergence { partial: Box::new(sol) });
        }
        let mut lambda = adapter.initial_lambda(k);
        let mut prev_d: Option<DeterministicField> = None;
        let mut prev_lambda: Option<RandomVariableSamples> = None;
        let mut eps_trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        let mut zero_mode = false;
        for j in 1..=opts.max_inner {
            iterations = j;
            let mut d = adapter.deterministic_update(&lambda, &sol)?;
            let norm = adapter.inner(&d, &d).sqrt();
            if !norm.is_finite() {
                return Err(Error::Internal(format!("non-finite mode at couple {k}")));
            }
            if norm == 0.0 {
                zero_mode = true;
                break;
            }
            d.scale(1.0 / norm);
            lambda.scale(norm);
            lambda = adapter.stochastic_update(&d, prev_lambda.as_ref(), &sol)?;
            if lambda.iter().all(|&l| l == 0.0) {
                zero_mode = true;
                break;
            }
            if let Some(old) = &prev_d {
                let eps = local_error(&d, old, |a, b| adapter.inner(a, b))?;
                eps_trace.push(eps);
                if eps < opts.eps_local {
                    prev_d = Some(d);
                    converged = true;
                    break;
                }
            }
            prev_d = Some(d);
            prev_lambda = Some(lambda.clone());
        }
        if zero_mode {
            sol.history.push(CoupleRecord {
                k,
                inner_iterations: iterations,
                eps_local: eps_trace,
                eps_global: 0.0,
                stagnated: false,
            });
            sol.exhausted = true;
            return Ok(sol);
        }
        let d = prev_d.expect("at least one inner iteration ran");
        sol.push(lambda, d, |a, b| adapter.inner(a, b))?;
        let eps_global = sol.last_global_error()?;
        sol.history.push(CoupleRecord {
            k,
            inner_iterations: iterations,
            eps_local: eps_trace,
            eps_global,
            stagnated: !converged,
        });
        if eps_global <= opts.eps_global {
            return Ok(sol);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn local_error_identities() {
        let d = [0.6, 0.8];
        let e = local_error(&d, &d, dot).unwrap();
        assert!(e.abs() <= 1e-12);
        let ortho = [-0.8, 0.6];
        assert!((local_error(&d, &ortho, dot).unwrap() - 2.0).abs() <= 1e-12);
        let anti = [-0.6, -0.8];
        assert!((local_error(&d, &anti, dot).unwrap() - 4.0).abs() <= 1e-12);
        assert!(local_error(&[1.0, 1.0], &d, dot).is_err());
    }

    #[test]
    fn global_error_from_zero_start_is_one() {
        let mut u1 = SeparatedSolution::new();
        u1.push(vec![1.3, -0.2, 0.7].into(), vec![0.6, 0.8].into(), dot).unwrap();
        assert_eq!(global_error(&u1, &SeparatedSolution::new()).unwrap(), 1.0);
        assert_eq!(u1.last_global_error().unwrap(), 1.0);
        assert_eq!(global_error(&u1, &u1).unwrap(), 0.0);
        assert!(global_error(&SeparatedSolution::new(), &SeparatedSolution::new()).is_err());
    }

    #[test]
    fn two_couples_with_equal_variance() {
        let mut u = SeparatedSolution::new();
        u.push(vec![1.0, -1.0, 1.0, -1.0].into(), vec![1.0, 0.0].into(), dot).unwrap();
        u.push(vec![1.0, 1.0, -1.0, -1.0].into(), vec![0.0, 1.0].into(), dot).unwrap();
        assert!((u.last_global_error().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn evaluation_sums_couples() {
        let u = SeparatedSolution::new();
        assert!(u.evaluate_at_sample(0).unwrap().is_empty());
        let mut u = SeparatedSolution::new();
        u.push(vec![2.0, 5.0].into(), vec![1.0, 0.0, 0.0].into(), dot).unwrap();
        assert_eq!(u.evaluate_at_sample(0).unwrap().values(), &[2.0, 0.0, 0.0]);
        assert!(u.evaluate_at_sample(2).is_err());
        assert_eq!(u.probe(&[(0, 0.5)]), vec![1.0, 2.5]);
    }

    #[test]
    fn sign_flip_leaves_solution_unchanged() {
        let lam = vec![0.3, -1.1, 2.0];
        let d = vec![0.6, 0.8];
        let mut a = SeparatedSolution::new();
        a.push(vec![1.0, 1.0, 1.0].into(), vec![1.0, 0.0].into(), dot).unwrap();
        let mut b = a.clone();
        a.push(lam.clone().into(), d.clone().into(), dot).unwrap();
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        b.push(neg(&lam).into(), neg(&d).into(), dot).unwrap();
        assert_eq!(a.last_global_error().unwrap(), b.last_global_error().unwrap());
        for n in 0..3 {
            assert_eq!(a.evaluate_at_sample(n).unwrap(), b.evaluate_at_sample(n).unwrap());
        }
    }

    /// `A u(θ) = F(θ)` with a fixed SPD diagonal `A` and `F = Σ_j η_j(θ) f_j`.
    struct DiagonalToy {
        a: Vec<f64>,
        f: Vec<Vec<f64>>,
        eta: Vec<Vec<f64>>,
    }

    impl DiagonalToy {
        fn rhs(&self, n: usize) -> Vec<f64> {
            let mut r = vec![0.0; self.a.len()];
            for (f, eta) in self.f.iter().zip(&self.eta) {
                for (ri, fi) in r.iter_mut().zip(f) {
                    *ri += eta[n] * fi;
                }
            }
            r
        }
    }

    impl ProblemAdapter for DiagonalToy {
        fn n_samples(&self) -> usize {
            self.eta[0].len()
        }

        fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
            dot(a, b)
        }

        fn deterministic_update(&mut self, lambda: &RandomVariableSamples, cur: &SeparatedSolution) -> Result<DeterministicField> {
            let n = self.n_samples();
            let h = mean_product(lambda, lambda);
            let mut rhs = vec![0.0; self.a.len()];
            for s in 0..n {
                let r = self.rhs(s);
                let u = cur.evaluate_at_sample(s)?;
                for i in 0..rhs.len() {
                    let au = if u.is_empty() { 0.0 } else { self.a[i] * u[i] };
                    rhs[i] += lambda[s] * (r[i] - au) / n as f64;
                }
            }
            Ok(rhs.iter().zip(&self.a).map(|(r, a)| r / (h * a)).collect::<Vec<_>>().into())
        }

        fn stochastic_update(
            &mut self,
            d: &DeterministicField,
            _prev: Option<&RandomVariableSamples>,
            cur: &SeparatedSolution,
        ) -> Result<RandomVariableSamples> {
            let den: f64 = d.iter().zip(&self.a).map(|(x, a)| a * x * x).sum();
            Ok((0..self.n_samples())
                .map(|s| {
                    let r = self.rhs(s);
                    let u = cur.evaluate_at_sample(s).unwrap();
                    (0..d.len())
                        .map(|i| d[i] * (r[i] - if u.is_empty() { 0.0 } else { self.a[i] * u[i] }))
                        .sum::<f64>()
                        / den
                })
                .collect::<Vec<_>>()
                .into())
        }
    }

    #[test]
    fn exact_rank_two_solution_is_recovered() {
        let n = 400;
        let eta1: Vec<f64> = (0..n).map(|s| 1.0 + (s as f64 * 0.731).sin()).collect();
        let eta2: Vec<f64> = (0..n).map(|s| 0.5 * (s as f64 * 1.913).cos()).collect();
        let mut toy = DiagonalToy { a: vec![2.0, 5.0], f: vec![vec![1.0, 0.3], vec![-0.4, 1.0]], eta: vec![eta1, eta2] };
        let opts = EnrichmentOptions { eps_global: 1e-12, eps_local: 1e-14, max_outer: 10, max_inner: 200 };
        let sol = enrich_until_converged(&mut toy, &opts).unwrap();
        assert_eq!(sol.history[0].eps_global, 1.0);
        // two meaningful couples; anything after them carries no energy
        assert!(sol.history.len() >= 2);
        assert!(sol.history[1].eps_global > 1e-6);
        for rec in &sol.history[2..] {
            assert!(rec.eps_global <= 1e-12, "{:?}", rec);
        }
        for s in [0, 17, 399] {
            let u = sol.evaluate_at_sample(s).unwrap();
            let r = toy.rhs(s);
            for i in 0..2 {
                assert!((u[i] - r[i] / toy.a[i]).abs() < 1e-10);
            }
        }
        for c in sol.couples() {
            assert!((dot(&c.d, &c.d).sqrt() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn non_convergence_carries_partial_solution() {
        let n = 50;
        let eta: Vec<Vec<f64>> = (0..3).map(|j| (0..n).map(|s| ((s * (j + 2)) as f64).sin()).collect()).collect();
        let mut toy = DiagonalToy {
            a: vec![1.0, 2.0, 3.0],
            f: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            eta,
        };
        let opts = EnrichmentOptions { eps_global: 1e-30, eps_local: 1e-3, max_outer: 2, max_inner: 5 };
        match enrich_until_converged(&mut toy, &opts) {
            Err(Error::NonConvergence { partial }) => assert_eq!(partial.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad = EnrichmentOptions { eps_global: 0.0, ..opts };
        assert!(enrich_until_converged(&mut toy, &bad).is_err());
    }

    #[test]
    fn history_csv_has_one_row_per_couple() {
        let mut u = SeparatedSolution::new();
        u.push(vec![1.0, 2.0].into(), vec![1.0].into(), dot).unwrap();
        u.history.push(CoupleRecord { k: 1, inner_iterations: 3, eps_local: vec![0.1, 1e-4], eps_global: 1.0, stagnated: false });
        let csv = u.history_csv();
        assert_eq!(csv, "k,inner_iter,eps_local,eps_global,eps_local_trace\n1,3,1e-4,1e0,1e-1;1e-4\n");
    }
}
