//! Moments, kernel density estimates and distances between densities.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::fdgrid::trapezoid_weight;
use crate::sampling::mean;
use crate::{Error, Result};

/// Fewest samples accepted by [`kde`].
pub const MIN_KDE_SAMPLES: usize = 100;

/// Default number of evaluation points of a density curve.
pub const DEFAULT_GRID_POINTS: usize = 512;

/// Kernel support, in bandwidths.
const CUTOFF: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` normalization).
    pub std: f64,
}

pub fn moments(samples: &[f64]) -> Result<Moments> {
    if samples.len() < 2 {
        return Err(Error::invalid("moments need at least two samples"));
    }
    let m = mean(samples);
    let var = samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (samples.len() - 1) as f64;
    Ok(Moments { mean: m, std: var.sqrt() })
}

/// Silverman's rule of thumb `0.9 min(σ, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let Moments { std, .. } = moments(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A density on a grid, or a point mass when the samples have no spread.
#[derive(Debug, Clone, PartialEq)]
pub struct PdfCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Location of a degenerate distribution. `density` is all zeros then.
    pub point_mass: Option<f64>,
}

impl PdfCurve {
    pub fn is_point_mass(&self) -> bool {
        self.point_mass.is_some()
    }

    /// Trapezoidal integral of the density (1 for a point mass).
    pub fn total_mass(&self) -> f64 {
        if self.point_mass.is_some() {
            return 1.0;
        }
        trapezoid(&self.grid, &self.density)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() || x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|&v| v <= x).clamp(1, g.len() - 1);
        let s = (x - g[i - 1]) / (g[i] - g[i - 1]);
        self.density[i - 1] + s * (self.density[i] - self.density[i - 1])
    }

    /// Two-column CSV `value,density`. A point mass is written as a single
    /// row with an infinite density.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,density\n");
        if let Some(v) = self.point_mass {
            writeln!(out, "{v:e},inf").unwrap();
            return out;
        }
        for (x, p) in self.grid.iter().zip(&self.density) {
            writeln!(out, "{x:e},{p:e}").unwrap();
        }
        out
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    (1..x.len()).map(|i| 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1])).sum()
}

/// Uniform grid of `points` values covering `mean ± 6 std` of every sample
/// set, widened to five bandwidths past the extreme samples, so that curves
/// estimated from different sets can be compared.
pub fn shared_grid(sets: &[&[f64]], points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::invalid("a grid needs at least two points"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in sets {
        let m = moments(s)?;
        lo = lo.min(m.mean - 6.0 * m.std);
        hi = hi.max(m.mean + 6.0 * m.std);
        if let Ok(h) = silverman_bandwidth(s) {
            let (min, max) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            lo = lo.min(min - 5.0 * h);
            hi = hi.max(max + 5.0 * h);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("no samples to size the grid"));
    }
    if hi - lo <= 0.0 {
        let pad = lo.abs().max(1.0) * 1e-6;
        lo -= pad;
        hi += pad;
    }
    let h = (hi - lo) / (points - 1) as f64;
    Ok((0..points).map(|i| lo + i as f64 * h).collect())
}

/// Gaussian kernel density estimate with Silverman's bandwidth.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<PdfCurve> {
    if samples.len() < MIN_KDE_SAMPLES {
        return Err(Error::invalid(format!(
            "density estimate needs at least {MIN_KDE_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("evaluation grid must be strictly increasing"));
    }
    let m = moments(samples)?;
    if m.std <= 1e-14 * m.mean.abs().max(f64::MIN_POSITIVE) {
        return Ok(PdfCurve { grid: grid.to_vec(), density: vec![0.0; grid.len()], point_mass: Some(m.mean) });
    }
    let h = silverman_bandwidth(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    let density = grid
        .par_iter()
        .map(|&x| {
            let a = sorted.partition_point(|&v| v < x - CUTOFF * h);
            let b = sorted.partition_point(|&v| v <= x + CUTOFF * h);
            sorted[a..b].iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm
        })
        .collect();
    Ok(PdfCurve { grid: grid.to_vec(), density, point_mass: None })
}

/// [`kde`] on [`shared_grid`] of the samples alone.
pub fn kde_auto(samples: &[f64]) -> Result<PdfCurve> {
    kde(samples, &shared_grid(&[samples], DEFAULT_GRID_POINTS)?)
}

/// `∫ |p_a - p_b|` by the trapezoidal rule on the shared grid.
///
/// A point mass is singular with respect to every density, so its distance
/// to a continuous curve or to a point mass elsewhere is 2.
pub fn pdf_l1_distance(a: &PdfCurve, b: &PdfCurve) -> Result<f64> {
    let same = a.grid.len() == b.grid.len()
        && a.grid.iter().zip(&b.grid).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0));
    if !same {
        return Err(Error::invalid("density curves are not on the same grid"));
    }
    match (a.point_mass, b.point_mass) {
        (Some(x), Some(y)) => Ok(if x == y { 0.0 } else { 2.0 }),
        (Some(_), None) | (None, Some(_)) => Ok(2.0),
        (None, None) => {
            let n = a.grid.len();
            if n < 2 {
                return Ok(0.0);
            }
            let h = (a.grid[n - 1] - a.grid[0]) / (n - 1) as f64;
            Ok((0..n).map(|i| trapezoid_weight(i, n, h) * (a.density[i] - b.density[i]).abs()).sum())
        }
    }
}

/// Estimates both densities on a common grid and returns their distance.
pub fn compare_samples(a: &[f64], b: &[f64]) -> Result<(PdfCurve, PdfCurve, f64)> {
    let grid = shared_grid(&[a, b], DEFAULT_GRID_POINTS)?;
    let pa = kde(a, &grid)?;
    let pb = kde(b, &grid)?;
    let d = pdf_l1_distance(&pa, &pb)?;
    Ok((pa, pb, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{Distribution, SampleEnsemble};
    use proptest::prelude::*;

    fn normal(n: usize, seed: u64) -> Vec<f64> {
        SampleEnsemble::generate(Distribution::StandardNormal, n, 1, seed).unwrap().column(0).to_vec()
    }

    #[test]
    fn normal_density_at_zero() {
        let s = normal(100_000, 1);
        let c = kde_auto(&s).unwrap();
        let p0 = c.value_at(0.0);
        assert!((p0 - 1.0 / (2.0 * PI).sqrt()).abs() <= 0.02, "{p0}");
        assert!((c.total_mass() - 1.0).abs() <= 1e-3);
        assert!(c.density.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn uniform_density_at_zero() {
        let s = SampleEnsemble::generate(Distribution::Uniform, 100_000, 1, 2).unwrap().column(0).to_vec();
        let c = kde_auto(&s).unwrap();
        assert!((c.value_at(0.0) - 1.0).abs() <= 0.05);
        assert!((c.total_mass() - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn constant_samples_are_a_point_mass() {
        let c = kde_auto(&vec![2.5; 500]).unwrap();
        assert_eq!(c.point_mass, Some(2.5));
        let d = kde(&vec![-1.0; 500], &c.grid).unwrap();
        assert_eq!(pdf_l1_distance(&c, &d).unwrap(), 2.0);
        assert_eq!(pdf_l1_distance(&c, &c).unwrap(), 0.0);
        assert!(c.to_csv().contains("inf"));
    }

    #[test]
    fn too_few_samples() {
        assert!(kde(&normal(50, 3), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn independent_draws_are_close() {
        let (a, b) = (normal(100_000, 4), normal(100_000, 5));
        let (_, _, d) = compare_samples(&a, &b).unwrap();
        assert!(d <= 0.02, "{d}");
    }

    #[test]
    fn separated_curves_are_far() {
        let a = normal(10_000, 6);
        let b: Vec<f64> = normal(10_000, 7).iter().map(|v| v + 20.0).collect();
        let (_, _, d) = compare_samples(&a, &b).unwrap();
        assert!((d - 2.0).abs() < 1e-3, "{d}");
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let s = normal(1000, 8);
        let a = kde(&s, &[0.0, 0.5, 1.0]).unwrap();
        let b = kde(&s, &[0.0, 0.6, 1.0]).unwrap();
        assert!(pdf_l1_distance(&a, &b).is_err());
    }

    #[test]
    fn csv_layout() {
        let c = kde(&normal(200, 9), &[-1.0, 0.0, 1.0]).unwrap();
        let csv = c.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next(), Some("value,density"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn distance_is_a_metric(s1 in 0u64..1000, shift in -2.0f64..2.0, scale in 0.3f64..3.0) {
            let a = normal(300, s1);
            let b: Vec<f64> = normal(300, s1 + 1).iter().map(|v| v * scale).collect();
            let c: Vec<f64> = normal(300, s1 + 2).iter().map(|v| v + shift).collect();
            let grid = shared_grid(&[&a, &b, &c], 256).unwrap();
            let (pa, pb, pc) = (kde(&a, &grid).unwrap(), kde(&b, &grid).unwrap(), kde(&c, &grid).unwrap());
            let ab = pdf_l1_distance(&pa, &pb).unwrap();
            let ba = pdf_l1_distance(&pb, &pa).unwrap();
            let ac = pdf_l1_distance(&pa, &pc).unwrap();
            let cb = pdf_l1_distance(&pc, &pb).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!((0.0..=2.0 + 1e-9).contains(&ab));
            prop_assert!(pa.density.iter().all(|&p| p >= 0.0));
            prop_assert!((pa.total_mass() - 1.0).abs() <= 1e-3);
        }
    }
}
