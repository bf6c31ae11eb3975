//! Inviscid Burgers equation with a Brownian-motion force
//!
//! `u_t + ½(u²)_x = f(t, θ)` on `[0, 2] × [0, 1]`, where `f` is the
//! truncated KL series of a Brownian motion with `σ_f = 0.2` and standard
//! Gaussian `ξ_j`.
//!
//! The deterministic step marches a scalar transport equation for `d_k` with
//! central differences in space and leapfrog in time. The stochastic step
//! solves one quadratic equation per sample.

use crate::fdgrid::{ddt_values, ddx_values, inner_values, trapezoid_weight, SpaceTimeGrid};
use crate::klexp::brownian_basis;
use crate::sampling::{mean_product, mean_product3, RandomVariableSamples, SampleEnsemble};
use crate::separated::{DeterministicField, ProblemAdapter, SeparatedSolution};
use crate::{Error, Result};

/// Deterministic initial profile `u(x, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialProfile {
    #[default]
    Zero,
    /// `amplitude · sin(πx)`
    Sine { amplitude: f64 },
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Zero => 0.0,
            InitialProfile::Sine { amplitude } => amplitude * (std::f64::consts::PI * x).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersConfig {
    pub grid: SpaceTimeGrid,
    /// Number of KL terms of the force.
    pub m: usize,
    pub initial: InitialProfile,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self { grid: SpaceTimeGrid::default(), m: 1000, initial: InitialProfile::Zero }
    }
}

/// Coefficients of `h1 d_t + (h2 d² + h3 d)_x = h4`. `h3` and `h4` are
/// space-time fields; a missing `h3` is zero.
#[derive(Debug, Clone, Copy)]
pub struct Transport<'a> {
    pub h1: f64,
    pub h2: f64,
    pub h3: Option<&'a [f64]>,
    pub h4: &'a [f64],
}

/// Marches the transport equation from `initial` (one row of `nx` values).
///
/// Leapfrog in time with central fluxes; the first step is a midpoint
/// Runge-Kutta step with `h3`, `h4` averaged over the first interval. Edge
/// values are extrapolated linearly from the interior. The characteristic
/// speed `|2 h2 d + h3| / h1` is checked against `dx/dt` at every step.
pub fn march(grid: SpaceTimeGrid, h: &Transport, initial: &[f64]) -> Result<Vec<f64>> {
    let (nt, nx, dt, dx) = (grid.nt, grid.nx, grid.dt(), grid.dx());
    if !(h.h1 > 0.0) || !h.h1.is_finite() {
        return Err(Error::DegenerateLambda(format!("h1 = {:e}", h.h1)));
    }
    if initial.len() != nx || h.h4.len() != grid.len() || h.h3.is_some_and(|v| v.len() != grid.len()) {
        return Err(Error::invalid("transport coefficients do not match the grid"));
    }
    let mut d = vec![0.0; grid.len()];
    d[..nx].copy_from_slice(initial);
    let mut flux = vec![0.0; nx];

    // time derivative of d for one row; h3/h4 rows given explicitly
    let mut rate = |row: &[f64], h3: &dyn Fn(usize) -> f64, h4: &dyn Fn(usize) -> f64, step: usize, out: &mut [f64]| {
        for i in 0..nx {
            let c3 = h3(i);
            let speed = (2.0 * h.h2 * row[i] + c3).abs() / h.h1;
            if !(speed * dt <= dx) {
                return Err(Error::Stability {
                    step,
                    detail: format!("Courant number {:.3} at x = {:.3}", speed * dt / dx, grid.x(i)),
                });
            }
            flux[i] = h.h2 * row[i] * row[i] + c3 * row[i];
        }
        out[0] = 0.0;
        out[nx - 1] = 0.0;
        for i in 1..nx - 1 {
            out[i] = (h4(i) - (flux[i + 1] - flux[i - 1]) / (2.0 * dx)) / h.h1;
        }
        Ok(())
    };
    let h3_at = |n: usize, i: usize| h.h3.map_or(0.0, |v| v[n * nx + i]);
    let h4_at = |n: usize, i: usize| h.h4[n * nx + i];

    let mut k = vec![0.0; nx];
    rate(&d[..nx], &|i| h3_at(0, i), &|i| h4_at(0, i), 0, &mut k)?;
    let mut mid: Vec<f64> = (0..nx).map(|i| d[i] + 0.5 * dt * k[i]).collect();
    extrapolate(&mut mid);
    rate(
        &mid,
        &|i| 0.5 * (h3_at(0, i) + h3_at(1, i)),
        &|i| 0.5 * (h4_at(0, i) + h4_at(1, i)),
        0,
        &mut k,
    )?;
    for i in 0..nx {
        d[nx + i] = d[i] + dt * k[i];
    }
    extrapolate(&mut d[nx..2 * nx]);

    for n in 1..nt - 1 {
        let (past, future) = d.split_at_mut((n + 1) * nx);
        let cur = &past[n * nx..];
        rate(cur, &|i| h3_at(n, i), &|i| h4_at(n, i), n, &mut k)?;
        let prev = &past[(n - 1) * nx..n * nx];
        let next = &mut future[..nx];
        for i in 0..nx {
            next[i] = prev[i] + 2.0 * dt * k[i];
        }
        extrapolate(next);
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stability { step: nt - 1, detail: "non-finite values".into() });
    }
    Ok(d)
}

fn extrapolate(row: &mut [f64]) {
    let n = row.len();
    row[0] = 2.0 * row[1] - row[2];
    row[n - 1] = 2.0 * row[n - 2] - row[n - 3];
}

/// Result of one scalar quadratic solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRoot {
    pub lambda: f64,
    /// Negative discriminant: `lambda` is the vertex `-b/2a`.
    pub vertex: bool,
}

/// Solves `a λ² + b λ + c = 0`.
///
/// Real roots come from the cancellation-free pair `q/a`, `c/q` with
/// `q = -(b + sign(b)√(b² - 4ac))/2`. With `previous` set, the root closest
/// to it is returned, otherwise the one of smaller magnitude. A negative
/// discriminant yields the vertex `-b/2a`, the minimizer of the squared
/// residual. When `a` is negligible against `b` and `c` the equation is
/// treated as linear. Returns `None` when only `c` is nonzero.
pub fn solve_quadratic(a: f64, b: f64, c: f64, previous: Option<f64>) -> Option<QuadraticRoot> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Some(QuadraticRoot { lambda: previous.unwrap_or(0.0), vertex: false });
    }
    let tiny = f64::EPSILON * scale;
    if a.abs() <= f64::EPSILON * b.abs().max(c.abs()) {
        if b.abs() <= tiny {
            return None;
        }
        // the small root of the stable pair, which tends to -c/b
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        return Some(QuadraticRoot { lambda: c / q, vertex: false });
    }
    let (a, b, c) = (a / scale, b / scale, c / scale);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Some(QuadraticRoot { lambda: -b / (2.0 * a), vertex: true });
    }
    let sign = if b < 0.0 { -1.0 } else { 1.0 };
    let q = -0.5 * (b + sign * disc.sqrt());
    if q == 0.0 {
        return Some(QuadraticRoot { lambda: 0.0, vertex: false });
    }
    let (r1, r2) = (q / a, c / q);
    let pick_first = match previous {
        Some(p) => {
            let (e1, e2) = ((r1 - p).abs(), (r2 - p).abs());
            e1 < e2 || (e1 == e2 && r1.abs() < r2.abs())
        }
        None => r1.abs() < r2.abs() || (r1.abs() == r2.abs() && r1 < r2),
    };
    Some(QuadraticRoot { lambda: if pick_first { r1 } else { r2 }, vertex: false })
}

/// Force series `f(t_n, θ⁽ˢ⁾)` as an `N × nt` row-major table.
pub fn force_samples(config: &BurgersConfig, ensemble: &SampleEnsemble) -> Result<Vec<f64>> {
    if ensemble.dimension() < config.m {
        return Err(Error::invalid("ensemble has fewer variables than force terms"));
    }
    let grid = config.grid;
    let basis: Vec<Vec<f64>> = (0..grid.nt).map(|n| brownian_basis(config.m, grid.t(n))).collect();
    let mut out = vec![0.0; ensemble.n_samples() * grid.nt];
    for j in 0..config.m {
        let col = ensemble.column(j);
        for (s, &xi) in col.iter().enumerate() {
            let row = &mut out[s * grid.nt..(s + 1) * grid.nt];
            for (n, v) in row.iter_mut().enumerate() {
                *v += xi * basis[n][j];
            }
        }
    }
    Ok(out)
}

/// The discretized Burgers problem: grid, force basis and initial profile.
#[derive(Debug, Clone)]
pub struct BurgersProblem {
    config: BurgersConfig,
    /// `φ_j(t_n)`, one row per term.
    phi: Vec<Vec<f64>>,
    u0: Vec<f64>,
}

impl BurgersProblem {
    pub fn new(config: BurgersConfig) -> Result<Self> {
        let grid = SpaceTimeGrid::new(config.grid.nt, config.grid.nx, config.grid.x_len, config.grid.t_len)?;
        if config.m == 0 {
            return Err(Error::invalid("the force needs at least one KL term"));
        }
        let cols: Vec<Vec<f64>> = (0..grid.nt).map(|n| brownian_basis(config.m, grid.t(n))).collect();
        let phi = (0..config.m).map(|j| cols.iter().map(|c| c[j]).collect()).collect();
        let u0 = (0..grid.nx).map(|i| config.initial.eval(grid.x(i))).collect();
        Ok(Self { config, phi, u0 })
    }

    pub fn config(&self) -> &BurgersConfig {
        &self.config
    }

    pub fn grid(&self) -> SpaceTimeGrid {
        self.config.grid
    }

    pub fn dimension(&self) -> usize {
        self.config.m
    }

    pub fn initial_profile(&self) -> &[f64] {
        &self.u0
    }

    /// `f(t_n)` for one realization.
    pub fn force(&self, xi: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.grid().nt];
        for (p, &x) in self.phi.iter().zip(xi) {
            for (v, b) in f.iter_mut().zip(p) {
                *v += x * b;
            }
        }
        f
    }

    /// Space-time solution of `u_t + ½(u²)_x = f` for one realization.
    pub fn solve_realization(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() < self.dimension() {
            return Err(Error::invalid("realization is shorter than the number of force terms"));
        }
        let grid = self.grid();
        let f = self.force(&xi[..self.dimension()]);
        let h4: Vec<f64> = f.iter().flat_map(|&v| std::iter::repeat_n(v, grid.nx)).collect();
        march(grid, &Transport { h1: 1.0, h2: 0.5, h3: None, h4: &h4 }, &self.u0)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        inner_values(a, b, self.grid())
    }

    /// `(index, weight)` pairs of the functional `u ↦ u(x, t)`, bilinear
    /// between grid points.
    pub fn probe_functional(&self, x: f64, t: f64) -> Result<Vec<(usize, f64)>> {
        let g = self.grid();
        if !(0.0..=g.x_len).contains(&x) || !(0.0..=g.t_len).contains(&t) {
            return Err(Error::invalid(format!("probe ({x}, {t}) is outside the space-time domain")));
        }
        let locate = |v: f64, h: f64, n: usize| {
            let i = ((v / h).floor() as usize).min(n - 2);
            (i, (v / h - i as f64).clamp(0.0, 1.0))
        };
        let (i, sx) = locate(x, g.dx(), g.nx);
        let (n, st) = locate(t, g.dt(), g.nt);
        let mut out = Vec::with_capacity(4);
        for (dn, wt) in [(0, 1.0 - st), (1, st)] {
            for (di, wx) in [(0, 1.0 - sx), (1, sx)] {
                if wt * wx != 0.0 {
                    out.push(((n + dn) * g.nx + i + di, wt * wx));
                }
            }
        }
        Ok(out)
    }

    pub fn adapter<'a>(&'a self, ensemble: &'a SampleEnsemble) -> Result<BurgersAdapter<'a>> {
        if ensemble.dimension() < self.dimension() {
            return Err(Error::invalid(format!(
                "ensemble has {} variables but the force needs {}",
                ensemble.dimension(),
                self.dimension()
            )));
        }
        Ok(BurgersAdapter { problem: self, ensemble, vertex_samples: 0, last_vertex_samples: 0 })
    }
}

/// Alternation steps for [`BurgersProblem`].
pub struct BurgersAdapter<'a> {
    problem: &'a BurgersProblem,
    ensemble: &'a SampleEnsemble,
    vertex_samples: usize,
    last_vertex_samples: usize,
}

impl BurgersAdapter<'_> {
    /// Samples resolved by the vertex rule, over all stochastic updates.
    pub fn vertex_samples(&self) -> usize {
        self.vertex_samples
    }

    /// Samples resolved by the vertex rule in the latest stochastic update.
    pub fn last_vertex_samples(&self) -> usize {
        self.last_vertex_samples
    }

    fn grid(&self) -> SpaceTimeGrid {
        self.problem.grid()
    }

    fn integral(&self, a: &[f64], b: &[f64]) -> f64 {
        inner_values(a, b, self.grid())
    }

    fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x * y).collect()
    }

    fn ddx(&self, v: &[f64]) -> Result<Vec<f64>> {
        ddx_values(v, self.grid())
    }

    fn ddt(&self, v: &[f64]) -> Result<Vec<f64>> {
        ddt_values(v, self.grid())
    }
}

impl ProblemAdapter for BurgersAdapter<'_> {
    fn n_samples(&self) -> usize {
        self.ensemble.n_samples()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.problem.inner(a, b)
    }

    /// The mean-force solution from the initial profile, so that every
    /// enrichment mode starts from `d_k(x, 0) = 0`.
    fn seed_couple(&mut self) -> Result<Option<DeterministicField>> {
        if self.problem.u0.iter().all(|&v| v == 0.0) {
            return Ok(None);
        }
        let grid = self.grid();
        let h4 = vec![0.0; grid.len()];
        let d = march(grid, &Transport { h1: 1.0, h2: 0.5, h3: None, h4: &h4 }, &self.problem.u0)?;
        Ok(Some(d.into()))
    }

    fn deterministic_update(
        &mut self,
        lambda: &RandomVariableSamples,
        current: &SeparatedSolution,
    ) -> Result<DeterministicField> {
        let grid = self.grid();
        let (nt, nx) = (grid.nt, grid.nx);
        let h1 = mean_product(lambda, lambda);
        if !(h1 > 0.0) {
            return Err(Error::DegenerateLambda(format!("E{{λ²}} = {h1:e}")));
        }
        let h2 = 0.5 * mean_product3(lambda, lambda, lambda);
        let k = current.len();

        let mut h3 = vec![0.0; grid.len()];
        let mut h4 = vec![0.0; grid.len()];

        let g: Vec<f64> = (0..self.problem.dimension())
            .map(|j| mean_product(lambda, self.ensemble.column(j)))
            .collect();
        for n in 0..nt {
            let ef: f64 = g.iter().zip(&self.problem.phi).map(|(g, p)| g * p[n]).sum();
            h4[n * nx..(n + 1) * nx].fill(ef);
        }
        for i in 0..k {
            let li = current.lambda(i);
            let di = current.mode(i);
            let e1 = mean_product(lambda, li);
            let e2 = mean_product3(lambda, lambda, li);
            let dti = self.ddt(di)?;
            for p in 0..grid.len() {
                h3[p] += e2 * di[p];
                h4[p] -= e1 * dti[p];
            }
            for l in i..k {
                let e3 = mean_product3(lambda, li, current.lambda(l));
                let w = if l == i { 0.5 * e3 } else { e3 };
                let dx = self.ddx(&Self::product(di, current.mode(l)))?;
                for p in 0..grid.len() {
                    h4[p] -= w * dx[p];
                }
            }
        }
        let h3 = if k == 0 { None } else { Some(h3.as_slice()) };
        Ok(march(grid, &Transport { h1, h2, h3, h4: &h4 }, &vec![0.0; nx])?.into())
    }

    fn stochastic_update(
        &mut self,
        d: &DeterministicField,
        previous: Option<&RandomVariableSamples>,
        current: &SeparatedSolution,
    ) -> Result<RandomVariableSamples> {
        let grid = self.grid();
        let k = current.len();
        let a = 0.5 * self.integral(d, &self.ddx(&Self::product(d, d))?);
        let b0 = self.integral(d, &self.ddt(d)?);
        let mut beta = Vec::with_capacity(k);
        let mut gamma = Vec::with_capacity(k);
        let mut big_gamma = vec![vec![0.0; k]; k];
        for i in 0..k {
            let di = current.mode(i);
            beta.push(self.integral(d, &self.ddx(&Self::product(di, d))?));
            gamma.push(self.integral(d, &self.ddt(di)?));
            for l in i..k {
                let v = self.integral(d, &self.ddx(&Self::product(di, current.mode(l)))?);
                big_gamma[i][l] = v;
                big_gamma[l][i] = v;
            }
        }
        // ∫∫ d φ_j dx dt
        let row_int: Vec<f64> = (0..grid.nt)
            .map(|n| {
                let w = trapezoid_weight(n, grid.nt, grid.dt());
                w * d[n * grid.nx..(n + 1) * grid.nx]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| trapezoid_weight(i, grid.nx, grid.dx()) * v)
                    .sum::<f64>()
            })
            .collect();
        let mut p = vec![0.0; self.ensemble.dimension()];
        for (pj, phi) in p.iter_mut().zip(&self.problem.phi) {
            *pj = phi.iter().zip(&row_int).map(|(f, r)| f * r).sum();
        }
        let mut df = vec![0.0; self.n_samples()];
        self.ensemble.combine_columns(&p, &mut df);

        let mut out = Vec::with_capacity(self.n_samples());
        let mut vertices = 0;
        let mut lam = vec![0.0; k];
        for (n, &dfn) in df.iter().enumerate() {
            for (i, l) in lam.iter_mut().enumerate() {
                *l = current.lambda(i)[n];
            }
            let mut b = b0;
            let mut c = -dfn;
            for i in 0..k {
                b += lam[i] * beta[i];
                c += lam[i] * gamma[i];
                for l in 0..k {
                    c += 0.5 * lam[i] * lam[l] * big_gamma[i][l];
                }
            }
            let prev = previous.map(|p| p[n]);
            let root = solve_quadratic(a, b, c, prev).ok_or(Error::InconsistentSample { sample: n })?;
            vertices += root.vertex as usize;
            out.push(root.lambda);
        }
        self.last_vertex_samples = vertices;
        self.vertex_samples += vertices;
        Ok(out.into())
    }
}
