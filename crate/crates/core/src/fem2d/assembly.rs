use std::sync::Arc;

use super::mesh::TriMesh;
use super::sparse::{CsrPattern, SparseMatrix};
use crate::klexp::KlBasis;
use crate::{Error, Result};

/// Per-triangle geometric data.
#[derive(Debug, Clone, Copy)]
struct Element {
    area: f64,
    /// `∇φ_a · ∇φ_b`
    grad_dot: [[f64; 3]; 3],
    /// Value positions of the 3×3 local block (`None` for Dirichlet rows or
    /// columns).
    pos: [[Option<usize>; 3]; 3],
    dofs: [Option<usize>; 3],
}

/// A mesh plus its degree-of-freedom numbering. With homogeneous Dirichlet
/// conditions the boundary nodes are eliminated from the unknowns.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Arc<TriMesh>,
    dof_of: Vec<Option<usize>>,
    node_of: Vec<usize>,
    pattern: Arc<CsrPattern>,
    elements: Vec<Element>,
}

impl Discretization {
    pub fn new(mesh: Arc<TriMesh>, dirichlet: bool) -> Self {
        let mut dof_of = vec![None; mesh.n_nodes()];
        let mut node_of = Vec::new();
        for (node, slot) in dof_of.iter_mut().enumerate() {
            if !(dirichlet && mesh.is_boundary(node)) {
                *slot = Some(node_of.len());
                node_of.push(node);
            }
        }
        let mut rows = vec![Vec::new(); node_of.len()];
        for tri in mesh.triangles() {
            for &a in tri {
                if let Some(da) = dof_of[a] {
                    rows[da].extend(tri.iter().filter_map(|&b| dof_of[b]));
                }
            }
        }
        let pattern = Arc::new(CsrPattern::from_rows(rows));

        let elements = mesh
            .triangles()
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let p = tri.map(|i| mesh.nodes()[i]);
                let area = mesh.signed_area(t);
                // ∇φ_a = (y_b - y_c, x_c - x_b) / 2A with (a, b, c) cyclic
                let grads: [[f64; 2]; 3] = std::array::from_fn(|a| {
                    let b = (a + 1) % 3;
                    let c = (a + 2) % 3;
                    [(p[b][1] - p[c][1]) / (2.0 * area), (p[c][0] - p[b][0]) / (2.0 * area)]
                });
                let grad_dot =
                    std::array::from_fn(|a| std::array::from_fn(|b| grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]));
                let dofs = tri.map(|i| dof_of[i]);
                let pos = std::array::from_fn(|a| {
                    std::array::from_fn(|b| match (dofs[a], dofs[b]) {
                        (Some(i), Some(j)) => pattern.position(i, j),
                        _ => None,
                    })
                });
                Element { area, grad_dot, pos, dofs }
            })
            .collect();
        Self { mesh, dof_of, node_of, pattern, elements }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.node_of.len()
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.dof_of[node]
    }

    pub fn node_of(&self, dof: usize) -> usize {
        self.node_of[dof]
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    /// Restriction of a nodal field to the unknowns.
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.node_of.iter().map(|&n| nodal[n]).collect()
    }

    /// Nodal field from unknowns, zero on eliminated nodes.
    pub fn extend(&self, dofs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.n_nodes()];
        for (d, &n) in self.node_of.iter().enumerate() {
            out[n] = dofs[d];
        }
        out
    }

    /// Sparse linear functional `u ↦ u(x, y)` as `(dof, weight)` pairs, using
    /// barycentric interpolation in the containing triangle.
    pub fn point_functional(&self, x: f64, y: f64) -> Result<Vec<(usize, f64)>> {
        let (t, bary) = self
            .mesh
            .locate(x, y)
            .ok_or_else(|| Error::invalid(format!("point ({x}, {y}) is outside the mesh")))?;
        let tri = self.mesh.triangles()[t];
        Ok((0..3)
            .filter_map(|k| self.dof_of[tri[k]].map(|d| (d, bary[k])))
            .filter(|&(_, w)| w != 0.0)
            .collect())
    }

    fn check_nodal(&self, field: &[f64], what: &str) -> Result<()> {
        if field.len() != self.mesh.n_nodes() {
            return Err(Error::invalid(format!(
                "{what} has {} values but the mesh has {} nodes",
                field.len(),
                self.mesh.n_nodes()
            )));
        }
        Ok(())
    }

    /// Stiffness values of `∫ c ∇u·∇v` into `out` (same pattern). The nodal
    /// coefficient is interpolated linearly, so its element mean is exact.
    pub fn stiffness_values_into(&self, coef: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (el, tri) in self.elements.iter().zip(self.mesh.triangles()) {
            let cbar = (coef[tri[0]] + coef[tri[1]] + coef[tri[2]]) / 3.0;
            let s = el.area * cbar;
            for a in 0..3 {
                for b in 0..3 {
                    if let Some(p) = el.pos[a][b] {
                        out[p] += s * el.grad_dot[a][b];
                    }
                }
            }
        }
    }

    pub fn stiffness(&self, coef: &[f64]) -> Result<SparseMatrix> {
        self.check_nodal(coef, "diffusion coefficient")?;
        let mut m = SparseMatrix::zeros(self.pattern.clone());
        self.stiffness_values_into(coef, m.values_mut());
        Ok(m)
    }

    /// `∫ a u v` with the three edge-midpoint quadrature rule.
    pub fn mass(&self, coef: &[f64]) -> Result<SparseMatrix> {
        self.check_nodal(coef, "reaction coefficient")?;
        let mut m = SparseMatrix::zeros(self.pattern.clone());
        let vals = m.values_mut();
        for (el, tri) in self.elements.iter().zip(self.mesh.triangles()) {
            for q in 0..3 {
                let (i, j) = (q, (q + 1) % 3);
                let aq = 0.5 * (coef[tri[i]] + coef[tri[j]]);
                let w = el.area / 3.0 * aq;
                // φ_i = φ_j = 1/2 at the midpoint of edge (i, j)
                for &a in &[i, j] {
                    for &b in &[i, j] {
                        if let Some(p) = el.pos[a][b] {
                            vals[p] += w * 0.25;
                        }
                    }
                }
            }
        }
        Ok(m)
    }

    /// Row-sum lumped mass on the unknowns.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        for el in &self.elements {
            for d in el.dofs.iter().flatten() {
                out[*d] += el.area / 3.0;
            }
        }
        out
    }

    /// `∫ f v` with the edge-midpoint rule.
    pub fn load(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_nodal(f, "load")?;
        let mut out = vec![0.0; self.n_dofs()];
        for (el, tri) in self.elements.iter().zip(self.mesh.triangles()) {
            for q in 0..3 {
                let (i, j) = (q, (q + 1) % 3);
                let fq = 0.5 * (f[tri[i]] + f[tri[j]]);
                for &a in &[i, j] {
                    if let Some(d) = el.dofs[a] {
                        out[d] += el.area / 3.0 * fq * 0.5;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Random diffusion coefficient `mean + scale Σ_j ξ_j ν_j c_j(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineCoefficient {
    pub mean: f64,
    pub scale: f64,
}

impl Default for AffineCoefficient {
    fn default() -> Self {
        Self { mean: 50.0, scale: 0.3 }
    }
}

/// Affine family `(Σ_j ξ_j K_j) u = F` with `ξ_0 ≡ 1`, Dirichlet nodes
/// eliminated. All `K_j` share one sparsity pattern.
#[derive(Debug, Clone)]
pub struct StochasticOperator {
    pub k: Vec<SparseMatrix>,
    pub f: Vec<f64>,
}

impl StochasticOperator {
    /// Number of random terms `M` (excluding `K_0`).
    pub fn dimension(&self) -> usize {
        self.k.len() - 1
    }

    /// `A(ξ) = K_0 + Σ_j ξ_j K_j` for one realization.
    pub fn realize(&self, xi: &[f64]) -> Result<SparseMatrix> {
        if xi.len() != self.dimension() {
            return Err(Error::invalid("realization length does not match the operator dimension"));
        }
        let coefs: Vec<f64> = std::iter::once(1.0).chain(xi.iter().copied()).collect();
        SparseMatrix::linear_combination(&coefs, &self.k)
    }
}

/// `K_0` from diffusion `coef.mean` plus reaction `a`, `K_j` from diffusion
/// `coef.scale ν_j c_j`, `F` from the load `f`.
pub fn assemble_affine_operator(
    disc: &Discretization,
    kl: &KlBasis,
    coef: AffineCoefficient,
    a: &[f64],
    f: &[f64],
) -> Result<StochasticOperator> {
    let n = disc.mesh().n_nodes();
    if kl.modes.iter().any(|m| m.len() != n) {
        return Err(Error::invalid("KL modes are not defined on this mesh"));
    }
    let mut k0 = disc.stiffness(&vec![coef.mean; n])?;
    let reaction = disc.mass(a)?;
    for (v, r) in k0.values_mut().iter_mut().zip(reaction.values()) {
        *v += r;
    }
    let mut k = Vec::with_capacity(kl.len() + 1);
    k.push(k0);
    for (mode, &nu) in kl.modes.iter().zip(&kl.nu) {
        let c: Vec<f64> = mode.iter().map(|v| coef.scale * nu * v).collect();
        k.push(disc.stiffness(&c)?);
    }
    Ok(StochasticOperator { k, f: disc.load(f)? })
}
