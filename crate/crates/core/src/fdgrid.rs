//! Uniform space-time grids with second-order difference operators and
//! trapezoidal integration.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    pub nt: usize,
    pub nx: usize,
    pub x_len: f64,
    pub t_len: f64,
}

impl Default for SpaceTimeGrid {
    fn default() -> Self {
        Self { nt: 101, nx: 51, x_len: 2.0, t_len: 1.0 }
    }
}

impl SpaceTimeGrid {
    pub fn new(nt: usize, nx: usize, x_len: f64, t_len: f64) -> Result<Self> {
        if nt < 2 || nx < 3 {
            return Err(Error::invalid(format!("grid needs nt >= 2 and nx >= 3, got nt={nt}, nx={nx}")));
        }
        if !(x_len > 0.0 && t_len > 0.0) {
            return Err(Error::invalid("grid extents must be positive"));
        }
        Ok(Self { nt, nx, x_len, t_len })
    }

    pub fn dx(&self) -> f64 {
        self.x_len / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_len / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn len(&self) -> usize {
        self.nt * self.nx
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values on an `nt × nx` grid, stored row by row (one row per time level).
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for n in 0..grid.nt {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.t(n)));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> SpaceTimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.grid.nx + i]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.grid.nx..(n + 1) * self.grid.nx]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        let nx = self.grid.nx;
        &mut self.values[n * nx..(n + 1) * nx]
    }

    pub fn ddx(&self) -> Self {
        ddx_values(&self.values, self.grid).map(|values| Self { grid: self.grid, values }).unwrap()
    }

    pub fn ddt(&self) -> Self {
        ddt_values(&self.values, self.grid).map(|values| Self { grid: self.grid, values }).unwrap()
    }

    pub fn integrate(&self) -> f64 {
        integrate_values(&self.values, self.grid)
    }
}

/// Second-order one-sided difference at the first point of a line.
#[inline]
fn forward(v0: f64, v1: f64, v2: f64, h: f64) -> f64 {
    (-3.0 * v0 + 4.0 * v1 - v2) / (2.0 * h)
}

/// Central differences in `x` (one-sided second order at both edges).
pub fn ddx_values(values: &[f64], grid: SpaceTimeGrid) -> Result<Vec<f64>> {
    check(values, grid)?;
    let (nx, h) = (grid.nx, grid.dx());
    let mut out = vec![0.0; values.len()];
    for (src, dst) in values.chunks(nx).zip(out.chunks_mut(nx)) {
        dst[0] = forward(src[0], src[1], src[2], h);
        for i in 1..nx - 1 {
            dst[i] = (src[i + 1] - src[i - 1]) / (2.0 * h);
        }
        dst[nx - 1] = -forward(src[nx - 1], src[nx - 2], src[nx - 3], h);
    }
    Ok(out)
}

/// Central differences in `t` (one-sided second order at both ends; first
/// order when only two time levels exist).
pub fn ddt_values(values: &[f64], grid: SpaceTimeGrid) -> Result<Vec<f64>> {
    check(values, grid)?;
    let (nt, nx, h) = (grid.nt, grid.nx, grid.dt());
    let v = |n: usize, i: usize| values[n * nx + i];
    let mut out = vec![0.0; values.len()];
    for i in 0..nx {
        if nt == 2 {
            let d = (v(1, i) - v(0, i)) / h;
            out[i] = d;
            out[nx + i] = d;
            continue;
        }
        out[i] = forward(v(0, i), v(1, i), v(2, i), h);
        for n in 1..nt - 1 {
            out[n * nx + i] = (v(n + 1, i) - v(n - 1, i)) / (2.0 * h);
        }
        out[(nt - 1) * nx + i] = -forward(v(nt - 1, i), v(nt - 2, i), v(nt - 3, i), h);
    }
    Ok(out)
}

/// Trapezoidal weight of index `k` on a line of `n` points.
#[inline]
pub fn trapezoid_weight(k: usize, n: usize, h: f64) -> f64 {
    if k == 0 || k == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// `∫∫ f dx dt` by the trapezoidal rule in both directions.
pub fn integrate_values(values: &[f64], grid: SpaceTimeGrid) -> f64 {
    let (nt, nx, dt, dx) = (grid.nt, grid.nx, grid.dt(), grid.dx());
    let mut total = 0.0;
    for n in 0..nt {
        let row = &values[n * nx..(n + 1) * nx];
        let line: f64 = row.iter().enumerate().map(|(i, v)| trapezoid_weight(i, nx, dx) * v).sum();
        total += trapezoid_weight(n, nt, dt) * line;
    }
    total
}

/// `∫∫ a b dx dt` with the trapezoidal weights.
pub fn inner_values(a: &[f64], b: &[f64], grid: SpaceTimeGrid) -> f64 {
    let (nt, nx, dt, dx) = (grid.nt, grid.nx, grid.dt(), grid.dx());
    let mut total = 0.0;
    for n in 0..nt {
        let r = n * nx..(n + 1) * nx;
        let line: f64 = a[r.clone()]
            .iter()
            .zip(&b[r])
            .enumerate()
            .map(|(i, (x, y))| trapezoid_weight(i, nx, dx) * x * y)
            .sum();
        total += trapezoid_weight(n, nt, dt) * line;
    }
    total
}

pub fn integrate_xt(field: &SpaceTimeField) -> f64 {
    field.integrate()
}

fn check(values: &[f64], grid: SpaceTimeGrid) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::invalid(format!("expected {} values, got {}", grid.len(), values.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> SpaceTimeGrid {
        SpaceTimeGrid::default()
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let f = SpaceTimeField::from_fn(grid(), |_, _| 3.7);
        assert!(f.ddx().values().iter().all(|v| v.abs() < 1e-12));
        assert!(f.ddt().values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn linear_fields_are_differentiated_exactly() {
        let f = SpaceTimeField::from_fn(grid(), |x, t| x + 2.0 * t);
        assert!(f.ddx().values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(f.ddt().values().iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn sine_derivative_within_taylor_bound() {
        let g = grid();
        let f = SpaceTimeField::from_fn(g, |x, _| (PI * x).sin());
        let d = f.ddx();
        let dx = g.dx();
        // interior bound π³dx²/6; the one-sided edges carry π³dx²/3
        let mut worst_interior = 0.0f64;
        for n in 0..g.nt {
            for i in 1..g.nx - 1 {
                worst_interior = worst_interior.max((d.at(n, i) - PI * (PI * g.x(i)).cos()).abs());
            }
        }
        assert!(worst_interior <= PI.powi(3) * dx * dx / 6.0 + 1e-9, "{worst_interior}");
        let edge = (d.at(0, 0) - PI).abs();
        assert!(edge <= PI.powi(3) * dx * dx / 3.0 + 1e-9);
    }

    #[test]
    fn trapezoid_integrals() {
        let g = grid();
        assert!((SpaceTimeField::from_fn(g, |_, _| 1.0).integrate() - 2.0).abs() < 1e-12);
        assert!((SpaceTimeField::from_fn(g, |x, t| x * t).integrate() - 1.0).abs() < 1e-12);
        // ∫_0^2 sin(πx/2) dx ∫_0^1 sin(πt) dt = (4/π)(2/π)
        let f = SpaceTimeField::from_fn(g, |x, t| (0.5 * PI * x).sin() * (PI * t).sin());
        let exact = 8.0 / (PI * PI);
        let tol = exact * (PI * PI / 12.0) * (g.dx().powi(2) + g.dt().powi(2)) * 2.0;
        assert!((f.integrate() - exact).abs() <= tol);
    }

    #[test]
    fn derivative_integral_telescopes() {
        // F vanishes on both x edges: ∫∫ ∂F/∂x = 0
        let g = SpaceTimeGrid::new(201, 401, 2.0, 1.0).unwrap();
        let f = SpaceTimeField::from_fn(g, |x, t| (PI * x).sin().powi(2) * (1.0 + t * t));
        assert!(f.ddx().integrate().abs() <= 1e-6);
    }

    #[test]
    fn operators_are_linear() {
        let g = grid();
        let a = SpaceTimeField::from_fn(g, |x, t| (x * t).sin());
        let b = SpaceTimeField::from_fn(g, |x, t| x * x - t);
        let combo: Vec<f64> = a.values().iter().zip(b.values()).map(|(u, v)| 2.0 * u - 3.0 * v).collect();
        let c = SpaceTimeField::from_values(g, combo).unwrap();
        for (op_c, (op_a, op_b)) in c.ddx().values().iter().zip(a.ddx().values().iter().zip(b.ddx().values())) {
            assert!((op_c - (2.0 * op_a - 3.0 * op_b)).abs() < 1e-10);
        }
        for (op_c, (op_a, op_b)) in c.ddt().values().iter().zip(a.ddt().values().iter().zip(b.ddt().values())) {
            assert!((op_c - (2.0 * op_a - 3.0 * op_b)).abs() < 1e-10);
        }
        assert!((c.integrate() - (2.0 * a.integrate() - 3.0 * b.integrate())).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(SpaceTimeGrid::new(1, 10, 1.0, 1.0).is_err());
        assert!(SpaceTimeGrid::new(5, 2, 1.0, 1.0).is_err());
    }
}
