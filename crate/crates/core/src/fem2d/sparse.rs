use std::collections::VecDeque;
use std::sync::Arc;

use crate::{Error, Result};

/// Compressed-row sparsity pattern with sorted column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    /// Builds a pattern from per-row column lists (duplicates allowed).
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| vec![i]).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Position of `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

/// Square sparse matrix over a shared pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn from_values(pattern: Arc<CsrPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::invalid("value count does not match the pattern"));
        }
        Ok(Self { pattern, values })
    }

    pub fn identity(n: usize) -> Self {
        Self { pattern: Arc::new(CsrPattern::identity(n)), values: vec![1.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.pattern.row_range(i);
            *yi = self.pattern.col_idx[r.clone()]
                .iter()
                .zip(&self.values[r])
                .map(|(&j, &v)| v * x[j])
                .sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| {
                let r = self.pattern.row_range(i);
                let row: f64 = self.pattern.col_idx[r.clone()]
                    .iter()
                    .zip(&self.values[r])
                    .map(|(&j, &v)| v * y[j])
                    .sum();
                x[i] * row
            })
            .sum()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for p in self.pattern.row_range(i) {
                let j = self.pattern.col_idx[p];
                worst = worst.max((self.values[p] - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `Σ_k coefs[k] · mats[k]`; all matrices must share one pattern.
    pub fn linear_combination(coefs: &[f64], mats: &[SparseMatrix]) -> Result<Self> {
        let first = mats.first().ok_or_else(|| Error::invalid("empty linear combination"))?;
        if coefs.len() != mats.len() {
            return Err(Error::invalid("coefficient count does not match matrix count"));
        }
        let mut out = SparseMatrix::zeros(first.pattern.clone());
        out.set_linear_combination(coefs, mats)?;
        Ok(out)
    }

    /// Overwrites the values with `Σ_k coefs[k] · mats[k]`.
    pub fn set_linear_combination(&mut self, coefs: &[f64], mats: &[SparseMatrix]) -> Result<()> {
        if mats.iter().any(|m| !Arc::ptr_eq(&m.pattern, &self.pattern) && *m.pattern != *self.pattern) {
            return Err(Error::invalid("matrices do not share a sparsity pattern"));
        }
        self.values.fill(0.0);
        for (&c, m) in coefs.iter().zip(mats) {
            if c == 0.0 {
                continue;
            }
            for (o, &v) in self.values.iter_mut().zip(&m.values) {
                *o += c * v;
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for p in self.pattern.row_range(i) {
                row[self.pattern.col_idx[p]] = self.values[p];
            }
        }
        d
    }
}

/// Cholesky factorization stored over the envelope (profile) of a
/// reverse-Cuthill-McKee reordering. The symbolic part depends only on the
/// pattern and is reused by [`EnvelopeCholesky::refactor`].
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    pattern: Arc<CsrPattern>,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv[old] = new`
    inv: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    l: Vec<f64>,
    factored: bool,
}

impl EnvelopeCholesky {
    pub fn symbolic(pattern: Arc<CsrPattern>) -> Self {
        let n = pattern.n;
        let perm = reverse_cuthill_mckee(&pattern);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for &c in pattern.row(old) {
                let j = inv[c];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let l = vec![0.0; offsets[n]];
        Self { pattern, perm, inv, first, offsets, l, factored: false }
    }

    /// Symbolic analysis plus numeric factorization of `a`.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let mut f = Self::symbolic(a.pattern.clone());
        f.refactor(a)?;
        Ok(f)
    }

    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }

    /// Numeric factorization of a matrix with the analyzed pattern.
    pub fn refactor(&mut self, a: &SparseMatrix) -> Result<()> {
        if !Arc::ptr_eq(&a.pattern, &self.pattern) && *a.pattern != *self.pattern {
            return Err(Error::invalid("matrix pattern differs from the analyzed pattern"));
        }
        self.factored = false;
        let n = self.pattern.n;
        self.l.fill(0.0);
        let mut max_diag = 0.0f64;
        for old in 0..n {
            let i = self.inv[old];
            for p in self.pattern.row_range(old) {
                let j = self.inv[self.pattern.col_idx[p]];
                if j <= i {
                    let idx = self.offsets[i] + (j - self.first[i]);
                    self.l[idx] = a.values[p];
                    if j == i {
                        max_diag = max_diag.max(a.values[p].abs());
                    }
                }
            }
        }
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offsets[j];
                let k0 = fi.max(fj);
                let mut s = self.l[oi + (j - fi)];
                for k in k0..j {
                    s -= self.l[oi + (k - fi)] * self.l[oj + (k - fj)];
                }
                self.l[oi + (j - fi)] = s / self.l[oj + (j - fj)];
            }
            let diag_idx = oi + (i - fi);
            let mut d = self.l[diag_idx];
            for k in fi..i {
                let v = self.l[oi + (k - fi)];
                d -= v * v;
            }
            if !(d > 1e-13 * max_diag) {
                return Err(Error::NotPositiveDefinite { row: self.perm[i], pivot: d, max_diagonal: max_diag });
            }
            self.l[diag_idx] = d.sqrt();
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.pattern.n;
        if !self.factored {
            return Err(Error::Internal("solve called before a successful factorization".into()));
        }
        if rhs.len() != n {
            return Err(Error::invalid(format!("rhs length {} does not match dimension {n}", rhs.len())));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offsets[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.l[oi + (k - fi)] * y[k];
            }
            y[i] = s / self.l[oi + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let oi = self.offsets[i];
            let xi = y[i] / self.l[oi + (i - fi)];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.l[oi + (k - fi)] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

/// One-shot symmetric positive definite solve.
pub fn solve_sparse(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.dim() {
        return Err(Error::invalid(format!("rhs length {} does not match dimension {}", rhs.len(), a.dim())));
    }
    EnvelopeCholesky::factor(a)?.solve(rhs)
}

/// Reverse Cuthill-McKee ordering, one BFS per connected component, each
/// started from a pseudo-peripheral node.
fn reverse_cuthill_mckee(pattern: &CsrPattern) -> Vec<usize> {
    let n = pattern.n;
    let degree: Vec<usize> = (0..n).map(|i| pattern.row(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    // nodes on the last BFS level reachable from `start`
    let farthest = |start: usize, mask: &[bool]| -> Vec<usize> {
        let mut level = vec![usize::MAX; n];
        let mut seen = vec![start];
        let mut q = VecDeque::from([start]);
        level[start] = 0;
        while let Some(v) = q.pop_front() {
            for &w in pattern.row(v) {
                if !mask[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    seen.push(w);
                    q.push_back(w);
                }
            }
        }
        let deepest = seen.iter().map(|&v| level[v]).max().unwrap_or(0);
        seen.into_iter().filter(|&v| level[v] == deepest).collect()
    };

    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        // two sweeps towards the far end of the component
        let mut start = seed;
        for _ in 0..2 {
            let far = farthest(start, &visited);
            start = *far.iter().min_by_key(|&&i| (degree[i], i)).unwrap();
        }
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = pattern.row(v).iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}
