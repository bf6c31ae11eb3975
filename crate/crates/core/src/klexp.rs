//! Karhunen-Loève machinery.
//!
//! * Eigenpairs of the separable exponential kernel
//!   `k((x1,y1),(x2,y2)) = exp(-|x1-x2| - |y1-y2|)` on the unit square, built
//!   from the analytic 1D eigenpairs of `exp(-|x-x'|)` on `[0, 1]`.
//! * Closed-form series for a Brownian-motion force in time and for a radial
//!   random initial displacement on the unit disk.

use std::f64::consts::{PI, SQRT_2};

use crate::fem2d::TriMesh;
use crate::{Error, Result};

/// Standard deviation scale of the Brownian forcing.
pub const SIGMA_F: f64 = 0.2;

const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// One eigenpair of `exp(-|x - x'| / ℓ)` on `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Eigenpair1d {
    pub omega: f64,
    pub eigenvalue: f64,
    pub parity: Parity,
    norm: f64,
}

impl Eigenpair1d {
    /// L2-normalized eigenfunction on `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let s = x - 0.5;
        match self.parity {
            Parity::Even => (self.omega * s).cos() / self.norm,
            Parity::Odd => (self.omega * s).sin() / self.norm,
        }
    }
}

/// Exponential kernel with correlation length `ℓ` on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpKernel1d {
    pub correlation_length: f64,
}

impl Default for ExpKernel1d {
    fn default() -> Self {
        Self { correlation_length: 1.0 }
    }
}

impl ExpKernel1d {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (-(x - y).abs() / self.correlation_length).exp()
    }

    /// The `count` largest eigenpairs, ordered by decreasing eigenvalue.
    ///
    /// On `[-a, a]` with `c = 1/ℓ` the eigenvalues are `2c / (ω² + c²)` where
    /// `ω` solves `c cos(ωa) - ω sin(ωa) = 0` (even functions) or
    /// `ω cos(ωa) + c sin(ωa) = 0` (odd functions). Each root is bracketed
    /// between consecutive multiples of `π / 2a`.
    pub fn eigenpairs(&self, count: usize) -> Result<Vec<Eigenpair1d>> {
        let a = 0.5;
        let c = 1.0 / self.correlation_length;
        let mut out = Vec::with_capacity(count);
        for idx in 0..count {
            let i = (idx / 2) as f64;
            let (parity, lo, hi) = if idx % 2 == 0 {
                (Parity::Even, i * PI / a, (i + 0.5) * PI / a)
            } else {
                (Parity::Odd, (i + 0.5) * PI / a, (i + 1.0) * PI / a)
            };
            let f = move |w: f64| -> (f64, f64) {
                let (s, co) = (w * a).sin_cos();
                match parity {
                    Parity::Even => (c * co - w * s, -c * a * s - s - w * a * co),
                    Parity::Odd => (w * co + c * s, co - w * a * s + c * a * co),
                }
            };
            let omega = bracketed_root(f, lo, hi).ok_or_else(|| {
                Error::Internal(format!("could not bracket 1D eigenvalue root {idx}"))
            })?;
            let half = (2.0 * omega * a).sin() / (2.0 * omega);
            let norm = match parity {
                Parity::Even => (a + half).sqrt(),
                Parity::Odd => (a - half).sqrt(),
            };
            out.push(Eigenpair1d {
                omega,
                eigenvalue: 2.0 * c / (omega * omega + c * c),
                parity,
                norm,
            });
        }
        Ok(out)
    }
}

/// Bisection down to a coarse tolerance, then Newton steps kept inside the
/// bracket. Returns `None` when the endpoints do not straddle a root.
fn bracketed_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = f(lo).0;
    let fhi = f(hi).0;
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    while hi - lo > 1e-6 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid).0;
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let mut w = 0.5 * (lo + hi);
    for _ in 0..50 {
        let (v, dv) = f(w);
        if dv == 0.0 {
            break;
        }
        let next = (w - v / dv).clamp(lo, hi);
        let step = (next - w).abs();
        w = next;
        if step <= ROOT_TOL * w.max(1.0) {
            break;
        }
    }
    Some(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationModel {
    /// `exp(-|x1-x2|/ℓ - |y1-y2|/ℓ)` on the unit square.
    SeparableExponential { correlation_length: f64 },
}

/// Truncated KL basis of a 2D random field, with modes interpolated at the
/// nodes of a mesh.
#[derive(Debug, Clone)]
pub struct KlBasis {
    /// `ν_j`, so that `ν_j²` are the covariance eigenvalues (descending).
    pub nu: Vec<f64>,
    /// 1D indices `(p, q)` of each tensor mode `φ_p(x) φ_q(y)`.
    pub pairs: Vec<(usize, usize)>,
    pub one_d: Vec<Eigenpair1d>,
    /// Nodal values of each mode, sign-fixed so the first nonzero entry is
    /// positive.
    pub modes: Vec<Vec<f64>>,
    pub corr_model: CorrelationModel,
    signs: Vec<f64>,
}

impl KlBasis {
    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Analytic value of mode `j` at `(x, y)`, with the same sign as
    /// `modes[j]`.
    pub fn eval_mode(&self, j: usize, x: f64, y: f64) -> f64 {
        let (p, q) = self.pairs[j];
        self.signs[j] * self.one_d[p].eval(x) * self.one_d[q].eval(y)
    }
}

/// The `m` dominant 2D tensor-product eigenpairs sorted by decreasing
/// eigenvalue; ties are broken by the lexicographic order of `(p, q)`.
pub fn tensor_eigenvalues(one_d: &[Eigenpair1d], m: usize) -> Vec<(f64, (usize, usize))> {
    if m == 0 || one_d.is_empty() {
        return Vec::new();
    }
    // The m pairs (0, 0..m) already exceed this product, so no pair beyond it
    // can be among the m largest.
    let last = one_d.len().min(m) - 1;
    let floor = one_d[0].eigenvalue * one_d[last].eigenvalue;
    let mut cands = Vec::new();
    for (p, ep) in one_d.iter().enumerate().take(last + 1) {
        for (q, eq) in one_d.iter().enumerate().take(last + 1) {
            let v = ep.eigenvalue * eq.eigenvalue;
            if v < floor {
                break;
            }
            cands.push((v, (p, q)));
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    cands.truncate(m);
    cands
}

/// KL basis of the exponential kernel on the unit square, with `m` modes
/// evaluated at the nodes of `mesh`.
pub fn exp_kernel_eigenpairs(mesh: &TriMesh, m: usize) -> Result<KlBasis> {
    let kernel = ExpKernel1d::default();
    let one_d = kernel.eigenpairs(m)?;
    let top = tensor_eigenvalues(&one_d, m);
    let mut nu = Vec::with_capacity(m);
    let mut pairs = Vec::with_capacity(m);
    let mut modes = Vec::with_capacity(m);
    let mut signs = Vec::with_capacity(m);
    for &(lambda, (p, q)) in &top {
        let mut mode: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|&[x, y]| one_d[p].eval(x) * one_d[q].eval(y))
            .collect();
        let sign = match mode.iter().find(|v| v.abs() > 1e-14) {
            Some(v) if *v < 0.0 => -1.0,
            _ => 1.0,
        };
        if sign < 0.0 {
            mode.iter_mut().for_each(|v| *v = -*v);
        }
        nu.push(lambda.sqrt());
        pairs.push((p, q));
        modes.push(mode);
        signs.push(sign);
    }
    Ok(KlBasis {
        nu,
        pairs,
        one_d,
        modes,
        corr_model: CorrelationModel::SeparableExponential { correlation_length: kernel.correlation_length },
        signs,
    })
}

/// `φ_j(t) = √2 σ_f sin((j-½)πt) / ((j-½)π)` for `j = 1..=m`.
pub fn brownian_basis(m: usize, t: f64) -> Vec<f64> {
    (1..=m)
        .map(|j| {
            let w = (j as f64 - 0.5) * PI;
            SQRT_2 * SIGMA_F * (w * t).sin() / w
        })
        .collect()
}

/// Brownian-motion force at time `t` for one realization `xi`.
pub fn brownian_force_eval(xi: &[f64], t: f64) -> f64 {
    xi.iter()
        .zip(brownian_basis(xi.len(), t))
        .map(|(x, b)| x * b)
        .sum()
}

/// `s_j(r) = √2 sin(jπr)` for `j = 1..=m`.
pub fn wave_ic_basis(m: usize, r: f64) -> Vec<f64> {
    (1..=m).map(|j| SQRT_2 * (j as f64 * PI * r).sin()).collect()
}

/// Random initial displacement at polar radius `r` for one realization.
pub fn wave_ic_eval(xi: &[f64], r: f64) -> f64 {
    xi.iter()
        .enumerate()
        .map(|(j, x)| x * ((j + 1) as f64 * PI * r).sin())
        .sum::<f64>()
        * SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem2d::mesh_square;

    fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn one_d_eigenvalues_descend_and_are_orthonormal() {
        let eig = ExpKernel1d::default().eigenpairs(8).unwrap();
        for w in eig.windows(2) {
            assert!(w[0].eigenvalue > w[1].eigenvalue);
        }
        for a in &eig {
            for b in &eig {
                let ip = simpson(|x| a.eval(x) * b.eval(x), 4000);
                let expect = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8, "{ip}");
            }
        }
    }

    #[test]
    fn one_d_integral_equation_residual() {
        let k = ExpKernel1d::default();
        let eig = k.eigenpairs(6).unwrap();
        // midpoint Nyström quadrature on a fine grid
        let n = 4000;
        let h = 1.0 / n as f64;
        for e in &eig {
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in (0..n).step_by(97) {
                let x = (i as f64 + 0.5) * h;
                let integral: f64 = (0..n)
                    .map(|l| {
                        let s = (l as f64 + 0.5) * h;
                        k.eval(x, s) * e.eval(s) * h
                    })
                    .sum();
                num = num.max((integral - e.eigenvalue * e.eval(x)).abs());
                den = den.max(e.eval(x).abs());
            }
            assert!(num / (e.eigenvalue * den) < 1e-3, "residual {}", num / (e.eigenvalue * den));
        }
    }

    #[test]
    fn single_mode_is_product_of_largest_one_d_pair() {
        let mesh = mesh_square(100).unwrap();
        let kl = exp_kernel_eigenpairs(&mesh, 1).unwrap();
        let mu = kl.one_d[0].eigenvalue;
        assert!((kl.nu[0] * kl.nu[0] - mu * mu).abs() < 1e-15);
        assert_eq!(kl.pairs[0], (0, 0));
    }

    #[test]
    fn trace_bound_and_ordering() {
        let mesh = mesh_square(64).unwrap();
        let kl = exp_kernel_eigenpairs(&mesh, 300).unwrap();
        let trace: f64 = kl.nu.iter().map(|v| v * v).sum();
        assert!(trace <= 1.0, "{trace}");
        for w in kl.nu.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // ties in the tensor spectrum are broken lexicographically
        assert_eq!(kl.pairs[1], (0, 1));
        assert_eq!(kl.pairs[2], (1, 0));
    }

    #[test]
    fn tensor_modes_are_orthonormal() {
        let mesh = mesh_square(64).unwrap();
        let kl = exp_kernel_eigenpairs(&mesh, 6).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let (pa, qa) = kl.pairs[a];
                let (pb, qb) = kl.pairs[b];
                let ix = simpson(|x| kl.one_d[pa].eval(x) * kl.one_d[pb].eval(x), 4000);
                let iy = simpson(|y| kl.one_d[qa].eval(y) * kl.one_d[qb].eval(y), 4000);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ix * iy - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn nodal_modes_have_positive_leading_entry() {
        let mesh = mesh_square(100).unwrap();
        let kl = exp_kernel_eigenpairs(&mesh, 20).unwrap();
        for (j, mode) in kl.modes.iter().enumerate() {
            let first = mode.iter().find(|v| v.abs() > 1e-14).unwrap();
            assert!(*first > 0.0);
            let [x, y] = mesh.nodes()[7];
            assert!((kl.eval_mode(j, x, y) - mode[7]).abs() < 1e-14);
        }
    }

    #[test]
    fn brownian_force_values() {
        assert_eq!(brownian_force_eval(&[0.3, -1.2, 2.0], 0.0), 0.0);
        let v = brownian_force_eval(&[1.0, 0.0, 0.0], 1.0);
        assert!((v - 2.0 * SQRT_2 / (5.0 * PI)).abs() < 1e-15);
        assert!((v - 0.18006).abs() < 1e-5);
    }

    #[test]
    fn brownian_series_variance_matches_min_covariance() {
        // Σ_j φ_j(t1) φ_j(t2) → σ² min(t1, t2)
        let m = 20_000;
        for &(t1, t2) in &[(1.0, 1.0), (0.5, 1.0), (0.3, 0.7)] {
            let a = brownian_basis(m, t1);
            let b = brownian_basis(m, t2);
            let cov: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let expect = SIGMA_F * SIGMA_F * f64::min(t1, t2);
            assert!((cov - expect).abs() < 1e-4 * expect.max(1e-3) + 1e-6, "{cov} vs {expect}");
        }
    }

    #[test]
    fn wave_ic_values() {
        let xi = [0.7, -0.2, 1.3];
        assert!(wave_ic_eval(&xi, 0.0).abs() < 1e-15);
        assert!(wave_ic_eval(&xi, 1.0).abs() < 1e-14);
        assert!((wave_ic_eval(&[0.0, 1.0, 0.0], 0.25) - SQRT_2).abs() < 1e-15);
        let basis = wave_ic_basis(3, 0.4);
        let direct: f64 = xi.iter().zip(&basis).map(|(a, b)| a * b).sum();
        assert!((direct - wave_ic_eval(&xi, 0.4)).abs() < 1e-14);
    }
}
