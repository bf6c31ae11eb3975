//! Diffusion-reaction on the unit square with a random diffusion field
//!
//! `-∇·(c(x, y, θ)∇u) + 8u = 150`, `u = 0` on the boundary, with
//! `c = 50 + 0.3 Σ_j ξ_j ν_j c_j(x, y)` built from the KL modes of the
//! separable exponential kernel and `ξ_j ~ U(-0.5, 0.5)`.
//!
//! After FEM discretization the system is `(Σ_{j=0}^M ξ_j K_j) u = F` with
//! `ξ_0 ≡ 1`, and both alternation steps reduce to sums over the `K_j`.

use std::sync::Arc;

use crate::fem2d::{
    assemble_affine_operator, mesh_square, AffineCoefficient, Discretization, EnvelopeCholesky,
    SparseMatrix, StochasticOperator, TriMesh,
};
use crate::klexp::{exp_kernel_eigenpairs, KlBasis};
use crate::sampling::{mean, RandomVariableSamples, SampleEnsemble};
use crate::separated::{DeterministicField, ProblemAdapter, SeparatedSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticConfig {
    /// Number of KL terms `M`.
    pub m: usize,
    pub mesh_nodes: usize,
    pub coefficient: AffineCoefficient,
    pub reaction: f64,
    pub load: f64,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self { m: 100, mesh_nodes: 808, coefficient: AffineCoefficient::default(), reaction: 8.0, load: 150.0 }
    }
}

/// Discretized problem: mesh, KL basis, the affine operator family and the
/// mass matrix used as the L2 inner product.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    disc: Arc<Discretization>,
    kl: KlBasis,
    op: StochasticOperator,
    mass: SparseMatrix,
    config: EllipticConfig,
}

impl EllipticProblem {
    pub fn new(config: EllipticConfig) -> Result<Self> {
        Self::on_mesh(mesh_square(config.mesh_nodes)?, config)
    }

    /// Builds the problem on a given mesh of the unit square.
    pub fn on_mesh(mesh: TriMesh, config: EllipticConfig) -> Result<Self> {
        let disc = Arc::new(Discretization::new(Arc::new(mesh), true));
        if disc.n_dofs() == 0 {
            return Err(Error::invalid("mesh has no interior nodes"));
        }
        let n = disc.mesh().n_nodes();
        let kl = exp_kernel_eigenpairs(disc.mesh(), config.m)?;
        let op = assemble_affine_operator(
            &disc,
            &kl,
            config.coefficient,
            &vec![config.reaction; n],
            &vec![config.load; n],
        )?;
        let mass = disc.mass(&vec![1.0; n])?;
        Ok(Self { disc, kl, op, mass, config })
    }

    pub fn config(&self) -> &EllipticConfig {
        &self.config
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn kl(&self) -> &KlBasis {
        &self.kl
    }

    pub fn operator(&self) -> &StochasticOperator {
        &self.op
    }

    pub fn dimension(&self) -> usize {
        self.op.dimension()
    }

    pub fn n_dofs(&self) -> usize {
        self.disc.n_dofs()
    }

    /// `aᵀ M b` with the consistent mass matrix.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass.bilinear(a, b)
    }

    /// Direct solve of `A(ξ) u = F` for one realization.
    pub fn solve_realization(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let a = self.op.realize(&xi[..self.dimension()])?;
        EnvelopeCholesky::factor(&a)?.solve(&self.op.f)
    }

    /// `‖A(ξ) u - F‖ / ‖F‖` in the Euclidean norm.
    pub fn sample_residual(&self, u: &[f64], xi: &[f64]) -> Result<f64> {
        let a = self.op.realize(&xi[..self.dimension()])?;
        let au = a.matvec(u);
        let num: f64 = au.iter().zip(&self.op.f).map(|(x, f)| (x - f).powi(2)).sum();
        let den: f64 = self.op.f.iter().map(|f| f * f).sum();
        Ok((num / den).sqrt())
    }

    /// Per-sample relative residual of a separated solution.
    pub fn solution_residual(&self, u: &SeparatedSolution, ensemble: &SampleEnsemble, n: usize) -> Result<f64> {
        let field = u.evaluate_at_sample(n)?;
        let field = if field.is_empty() { vec![0.0; self.n_dofs()] } else { field.into_inner() };
        self.sample_residual(&field, &ensemble.row(n))
    }

    pub fn adapter<'a>(&'a self, ensemble: &'a SampleEnsemble) -> Result<EllipticAdapter<'a>> {
        EllipticAdapter::new(self, ensemble)
    }
}

/// Alternation steps for [`EllipticProblem`] over a fixed ensemble.
pub struct EllipticAdapter<'a> {
    problem: &'a EllipticProblem,
    ensemble: &'a SampleEnsemble,
    ktilde: SparseMatrix,
    chol: EnvelopeCholesky,
    /// `K_j d_i` for every accepted couple `i` and every `j = 0..=M`.
    kd: Vec<Vec<Vec<f64>>>,
    /// `d_iᵀ F` for every accepted couple.
    df: Vec<f64>,
}

impl<'a> EllipticAdapter<'a> {
    pub fn new(problem: &'a EllipticProblem, ensemble: &'a SampleEnsemble) -> Result<Self> {
        if ensemble.dimension() < problem.dimension() {
            return Err(Error::invalid(format!(
                "ensemble has {} variables but the operator needs {}",
                ensemble.dimension(),
                problem.dimension()
            )));
        }
        let pattern = problem.disc.pattern().clone();
        Ok(Self {
            problem,
            ensemble,
            ktilde: SparseMatrix::zeros(pattern.clone()),
            chol: EnvelopeCholesky::symbolic(pattern),
            kd: Vec::new(),
            df: Vec::new(),
        })
    }

    fn sync(&mut self, current: &SeparatedSolution) {
        while self.kd.len() < current.len() {
            let d = current.mode(self.kd.len());
            self.kd.push(self.problem.op.k.iter().map(|k| k.matvec(d)).collect());
            self.df.push(dot(d, &self.problem.op.f));
        }
    }

    /// `E{w_r ξ_j}` for `j = 0..=M` (`ξ_0 ≡ 1`) and every weight vector.
    fn moments(&self, ws: &[&[f64]]) -> Vec<Vec<f64>> {
        let m = self.problem.dimension();
        let tail = self.ensemble.column_moments(ws, m);
        ws.iter()
            .zip(tail)
            .map(|(w, t)| std::iter::once(mean(w)).chain(t).collect())
            .collect()
    }

    /// `Σ_j e_rj ξ_j(θ⁽ⁿ⁾)` for every sample and every coefficient list.
    fn combine(&self, es: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = self.problem.dimension();
        let padded: Vec<Vec<f64>> = es
            .iter()
            .map(|e| {
                let mut w = vec![0.0; self.ensemble.dimension()];
                w[..m].copy_from_slice(&e[1..]);
                w
            })
            .collect();
        let refs: Vec<&[f64]> = padded.iter().map(|w| w.as_slice()).collect();
        let mut outs = vec![Vec::new(); es.len()];
        self.ensemble.combine_columns_many(&refs, &mut outs);
        for (out, e) in outs.iter_mut().zip(es) {
            out.iter_mut().for_each(|v| *v += e[0]);
        }
        outs
    }

    /// Projected operator `K̃ = Σ_j E{λ² ξ_j} K_j`.
    pub fn projected_operator(&self, lambda: &[f64]) -> Result<SparseMatrix> {
        let w: Vec<f64> = lambda.iter().map(|l| l * l).collect();
        SparseMatrix::linear_combination(&self.moments(&[&w])[0], &self.problem.op.k)
    }
}

impl ProblemAdapter for EllipticAdapter<'_> {
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
        self.sync(current);
        // one sweep over the ensemble for E{λ² ξ_j} and every E{λ λ_i ξ_j}
        let mut ws: Vec<Vec<f64>> = vec![lambda.iter().map(|l| l * l).collect()];
        ws.extend((0..self.kd.len()).map(|i| lambda.iter().zip(current.lambda(i).iter()).map(|(a, b)| a * b).collect()));
        let refs: Vec<&[f64]> = ws.iter().map(|w| w.as_slice()).collect();
        let mut c = self.moments(&refs).into_iter();
        let ckk = c.next().unwrap();
        if !(ckk[0] > 0.0) {
            return Err(Error::DegenerateLambda(format!("E{{λ²}} = {:e}", ckk[0])));
        }
        self.ktilde.set_linear_combination(&ckk, &self.problem.op.k)?;
        if let Err(e) = self.chol.refactor(&self.ktilde) {
            return Err(match e {
                Error::NotPositiveDefinite { .. } => Error::DegenerateLambda(format!("projected operator: {e}")),
                other => other,
            });
        }
        let el = mean(lambda);
        let mut rhs: Vec<f64> = self.problem.op.f.iter().map(|f| el * f).collect();
        for (kd_i, cki) in self.kd.iter().zip(c) {
            for (c, kd) in cki.iter().zip(kd_i) {
                for (r, v) in rhs.iter_mut().zip(kd) {
                    *r -= c * v;
                }
            }
        }
        Ok(self.chol.solve(&rhs)?.into())
    }

    fn stochastic_update(
        &mut self,
        d: &DeterministicField,
        _previous: Option<&RandomVariableSamples>,
        current: &SeparatedSolution,
    ) -> Result<RandomVariableSamples> {
        self.sync(current);
        let ekk: Vec<f64> = self.problem.op.k.iter().map(|k| k.bilinear(d, d)).collect();
        let mut es = vec![ekk.clone()];
        es.extend(self.kd.iter().map(|kd_i| kd_i.iter().map(|kd| dot(d, kd)).collect::<Vec<f64>>()));
        let mut combined = self.combine(&es).into_iter();
        let b = combined.next().unwrap();
        let mut a = vec![dot(d, &self.problem.op.f); self.n_samples()];
        for (i, t) in combined.enumerate() {
            for ((a, t), l) in a.iter_mut().zip(&t).zip(current.lambda(i).iter()) {
                *a -= l * t;
            }
        }
        let floor = 1e-12 * ekk[0].abs();
        let mut out = Vec::with_capacity(a.len());
        for (n, (a, b)) in a.iter().zip(&b).enumerate() {
            if !(b.abs() >= floor) || *b == 0.0 {
                return Err(Error::SingularRealization {
                    sample: n,
                    detail: format!("dᵀA(θ)d = {b:e}"),
                });
            }
            out.push(a / b);
        }
        Ok(out.into())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
