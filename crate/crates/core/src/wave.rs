//! Wave equation on the unit disk with a random initial shape
//!
//! `u_tt - Δu = 0`, `u = 0` on the circle, `u_t(·, 0) = 0` and
//! `u(·, 0) = √2 Σ_j ξ_j sin(jπr)` with standard Gaussian `ξ_j`.
//!
//! Space is discretized with P1 elements and a lumped mass matrix, time with
//! the explicit central difference. The operator is deterministic, so the
//! deterministic update is a single wave solve from a projected initial
//! shape and the stochastic update is a projection of the initial data.

use std::sync::Arc;

use crate::fdgrid::trapezoid_weight;
use crate::fem2d::{mesh_disk, Discretization, SparseMatrix, TriMesh};
use crate::klexp::wave_ic_basis;
use crate::sampling::{mean_product, RandomVariableSamples, SampleEnsemble};
use crate::separated::{DeterministicField, ProblemAdapter, SeparatedSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveConfig {
    /// Number of terms of the initial shape.
    pub m: usize,
    pub mesh_nodes: usize,
    /// Time levels on `[0, t_len]`, both ends included.
    pub nt: usize,
    pub t_len: f64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self { m: 1000, mesh_nodes: 549, nt: 201, t_len: 2.0 }
    }
}

/// Discretized wave problem. Space-time fields are stored time level by
/// time level over the interior unknowns.
#[derive(Debug, Clone)]
pub struct WaveProblem {
    config: WaveConfig,
    disc: Arc<Discretization>,
    stiffness: SparseMatrix,
    lumped: Vec<f64>,
    /// Interior values of `√2 sin(jπr)`, one row per term.
    ic_basis: Vec<Vec<f64>>,
    lambda_max: f64,
}

impl WaveProblem {
    pub fn new(config: WaveConfig) -> Result<Self> {
        Self::on_mesh(mesh_disk(config.mesh_nodes)?, config)
    }

    pub fn on_mesh(mesh: TriMesh, config: WaveConfig) -> Result<Self> {
        if config.nt < 3 || !(config.t_len > 0.0) {
            return Err(Error::invalid("time grid needs at least 3 levels and a positive length"));
        }
        let disc = Arc::new(Discretization::new(Arc::new(mesh), true));
        if disc.n_dofs() == 0 {
            return Err(Error::invalid("mesh has no interior nodes"));
        }
        let stiffness = disc.stiffness(&vec![1.0; disc.mesh().n_nodes()])?;
        let lumped = disc.lumped_mass();
        let radii: Vec<f64> = (0..disc.n_dofs())
            .map(|d| {
                let [x, y] = disc.mesh().nodes()[disc.node_of(d)];
                x.hypot(y)
            })
            .collect();
        let per_node: Vec<Vec<f64>> = radii.iter().map(|&r| wave_ic_basis(config.m, r.min(1.0))).collect();
        let ic_basis = (0..config.m).map(|j| per_node.iter().map(|b| b[j]).collect()).collect();
        let lambda_max = max_eigenvalue(&stiffness, &lumped);
        let p = Self { config, disc, stiffness, lumped, ic_basis, lambda_max };
        let dt = p.dt();
        let bound = 2.0 / lambda_max.sqrt();
        if dt > bound {
            return Err(Error::Stability {
                step: 0,
                detail: format!("dt = {dt:.4e} exceeds the central-difference bound {bound:.4e}"),
            });
        }
        Ok(p)
    }

    pub fn config(&self) -> &WaveConfig {
        &self.config
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    pub fn dimension(&self) -> usize {
        self.config.m
    }

    pub fn n_dofs(&self) -> usize {
        self.disc.n_dofs()
    }

    pub fn nt(&self) -> usize {
        self.config.nt
    }

    pub fn dt(&self) -> f64 {
        self.config.t_len / (self.config.nt - 1) as f64
    }

    /// Estimated largest eigenvalue of `M_L⁻¹ K`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn ic_basis(&self) -> &[Vec<f64>] {
        &self.ic_basis
    }

    /// Interior values of the initial shape for one realization.
    pub fn initial_shape(&self, xi: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_dofs()];
        for (b, &x) in self.ic_basis.iter().zip(xi) {
            for (v, s) in g.iter_mut().zip(b) {
                *v += x * s;
            }
        }
        g
    }

    /// `aᵀ M_L b` for one time level.
    pub fn mass_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.lumped).map(|((x, y), m)| m * x * y).sum()
    }

    /// Space-time inner product: lumped mass in space, trapezoid in time.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let (nt, n, dt) = (self.nt(), self.n_dofs(), self.dt());
        (0..nt)
            .map(|k| trapezoid_weight(k, nt, dt) * self.mass_inner(&a[k * n..(k + 1) * n], &b[k * n..(k + 1) * n]))
            .sum()
    }

    /// Central-difference march from displacement `g` at rest, returning
    /// `steps + 1` time levels.
    pub fn march(&self, g: &[f64], steps: usize) -> Result<Vec<f64>> {
        let n = self.n_dofs();
        if g.len() != n {
            return Err(Error::invalid(format!("initial shape has {} values, expected {n}", g.len())));
        }
        let dt2 = self.dt() * self.dt();
        let mut u = Vec::with_capacity((steps + 1) * n);
        u.extend_from_slice(g);
        if steps == 0 {
            return Ok(u);
        }
        let mut ku = vec![0.0; n];
        self.stiffness.matvec_into(g, &mut ku);
        for i in 0..n {
            u.push(g[i] - 0.5 * dt2 * ku[i] / self.lumped[i]);
        }
        for k in 1..steps {
            self.stiffness.matvec_into(&u[k * n..(k + 1) * n], &mut ku);
            for i in 0..n {
                let next = 2.0 * u[k * n + i] - u[(k - 1) * n + i] - dt2 * ku[i] / self.lumped[i];
                u.push(next);
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Stability { step: steps, detail: "non-finite displacement".into() });
        }
        Ok(u)
    }

    /// All time levels of the solution from displacement `g` at rest.
    pub fn wave_step(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.march(g, self.nt() - 1)
    }

    /// Discrete energy `½ v̇ᵀ M_L v̇ + ½ vᵀ K v` at every time level, with the
    /// central-difference velocity (second-order backward at the last level,
    /// zero at the first).
    pub fn energy(&self, u: &[f64]) -> Vec<f64> {
        let (nt, n, dt) = (u.len() / self.n_dofs(), self.n_dofs(), self.dt());
        let level = |k: usize| &u[k * n..(k + 1) * n];
        (0..nt)
            .map(|k| {
                let vel: Vec<f64> = if k == 0 {
                    vec![0.0; n]
                } else if k == nt - 1 {
                    let (a, b, c) = (level(k), level(k - 1), level(k - 2));
                    (0..n).map(|i| (3.0 * a[i] - 4.0 * b[i] + c[i]) / (2.0 * dt)).collect()
                } else {
                    level(k + 1).iter().zip(level(k - 1)).map(|(a, b)| (a - b) / (2.0 * dt)).collect()
                };
                0.5 * self.mass_inner(&vel, &vel) + 0.5 * self.stiffness.bilinear(level(k), level(k))
            })
            .collect()
    }

    /// The energy exactly conserved by the scheme, between levels `k` and
    /// `k + 1`: `½ |u^{k+1} - u^k|²_M / dt² + ½ (u^{k+1})ᵀ K u^k`.
    pub fn staggered_energy(&self, u: &[f64]) -> Vec<f64> {
        let (nt, n, dt) = (u.len() / self.n_dofs(), self.n_dofs(), self.dt());
        let level = |k: usize| &u[k * n..(k + 1) * n];
        (0..nt.saturating_sub(1))
            .map(|k| {
                let vel: Vec<f64> = level(k + 1).iter().zip(level(k)).map(|(a, b)| (a - b) / dt).collect();
                0.5 * self.mass_inner(&vel, &vel) + 0.5 * self.stiffness.bilinear(level(k + 1), level(k))
            })
            .collect()
    }

    /// `(index, weight)` pairs of the functional `u ↦ u(x, y, t)`, with `t`
    /// snapped to the nearest time level.
    pub fn probe_functional(&self, x: f64, y: f64, t: f64) -> Result<Vec<(usize, f64)>> {
        if !(0.0..=self.config.t_len).contains(&t) {
            return Err(Error::invalid(format!("probe time {t} is outside [0, {}]", self.config.t_len)));
        }
        let k = (t / self.dt()).round() as usize;
        let n = self.n_dofs();
        Ok(self.disc.point_functional(x, y)?.into_iter().map(|(d, w)| (k * n + d, w)).collect())
    }

    pub fn adapter<'a>(&'a self, ensemble: &'a SampleEnsemble) -> Result<WaveAdapter<'a>> {
        if ensemble.dimension() < self.dimension() {
            return Err(Error::invalid(format!(
                "ensemble has {} variables but the initial shape needs {}",
                ensemble.dimension(),
                self.dimension()
            )));
        }
        Ok(WaveAdapter { problem: self, ensemble })
    }
}

/// Largest eigenvalue of `M⁻¹K` (diagonal `M`) by power iteration on the
/// symmetric form `M^{-½} K M^{-½}`.
fn max_eigenvalue(k: &SparseMatrix, m: &[f64]) -> f64 {
    let n = m.len();
    let scale: Vec<f64> = m.iter().map(|v| 1.0 / v.sqrt()).collect();
    // alternating signs start close to the highest-frequency mode
    let mut x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -0.7 }).collect();
    let mut y = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut rq = 0.0;
    for _ in 0..1000 {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        for i in 0..n {
            tmp[i] = x[i] * scale[i];
        }
        k.matvec_into(&tmp, &mut y);
        for i in 0..n {
            y[i] *= scale[i];
        }
        let next: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        std::mem::swap(&mut x, &mut y);
        if (next - rq).abs() <= 1e-10 * next {
            rq = next;
            break;
        }
        rq = next;
    }
    rq
}

/// Alternation steps for [`WaveProblem`].
pub struct WaveAdapter<'a> {
    problem: &'a WaveProblem,
    ensemble: &'a SampleEnsemble,
}

impl WaveAdapter<'_> {
    fn slice0<'b>(&self, d: &'b [f64]) -> &'b [f64] {
        &d[..self.problem.n_dofs()]
    }

    /// Projected initial shape `[E{λ u(·,0)} - Σ_i E{λ λ_i} d_i(·,0)] / E{λ²}`.
    pub fn projected_shape(&self, lambda: &[f64], current: &SeparatedSolution) -> Result<Vec<f64>> {
        let h = mean_product(lambda, lambda);
        if !(h > 0.0) {
            return Err(Error::DegenerateLambda(format!("E{{λ²}} = {h:e}")));
        }
        let w: Vec<f64> =
            (0..self.problem.dimension()).map(|j| mean_product(lambda, self.ensemble.column(j))).collect();
        let mut g = self.problem.initial_shape(&w);
        for i in 0..current.len() {
            let c = mean_product(lambda, current.lambda(i));
            for (v, d) in g.iter_mut().zip(self.slice0(current.mode(i))) {
                *v -= c * d;
            }
        }
        g.iter_mut().for_each(|v| *v /= h);
        Ok(g)
    }
}

impl ProblemAdapter for WaveAdapter<'_> {
    fn n_samples(&self) -> usize {
        self.ensemble.n_samples()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.problem.inner(a, b)
    }

    fn deterministic_update(
        &mut self,
        lambda: &RandomVariableSamples,
        current: &SeparatedSolution,
    ) -> Result<DeterministicField> {
        let g = self.projected_shape(lambda, current)?;
        Ok(self.problem.wave_step(&g)?.into())
    }

    fn stochastic_update(
        &mut self,
        d: &DeterministicField,
        _previous: Option<&RandomVariableSamples>,
        current: &SeparatedSolution,
    ) -> Result<RandomVariableSamples> {
        let p = self.problem;
        let d0 = self.slice0(d);
        let den = p.mass_inner(d0, d0);
        if !(den >= 1e-14) {
            return Err(Error::DegenerateLambda(format!("initial slice of the mode has squared norm {den:e}")));
        }
        let mut weights = vec![0.0; self.ensemble.dimension()];
        for (w, s) in weights.iter_mut().zip(&p.ic_basis) {
            *w = p.mass_inner(d0, s) / den;
        }
        let mut out = vec![0.0; self.n_samples()];
        self.ensemble.combine_columns(&weights, &mut out);
        for i in 0..current.len() {
            let q = p.mass_inner(d0, self.slice0(current.mode(i))) / den;
            for (o, l) in out.iter_mut().zip(current.lambda(i).iter()) {
                *o -= q * l;
            }
        }
        Ok(out.into())
    }
}
