//! The three benchmark problems behind one trait, selected by name.
//!
//! ```no_run
//! let bench = stochsep::benchmarks::create("wave").unwrap();
//! let mut settings = bench.default_settings();
//! settings.m = 50;
//! let run = bench.run(&settings).unwrap();
//! println!("{} terms", run.solution.len());
//! ```

use std::time::{Duration, Instant};

use crate::burgers::{BurgersConfig, BurgersProblem, InitialProfile};
use crate::elliptic::{EllipticConfig, EllipticProblem};
use crate::fdgrid::SpaceTimeGrid;
use crate::mcoracle::{mc_burgers, mc_elliptic, mc_wave, MCResult};
use crate::sampling::{Distribution, SampleEnsemble};
use crate::separated::{enrich_until_converged, EnrichmentOptions, ProblemAdapter, SeparatedSolution};
use crate::wave::{WaveConfig, WaveProblem};
use crate::{Error, Result};

/// Everything a run needs. Start from [`Benchmark::default_settings`].
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Number of random variables `M`.
    pub m: usize,
    /// Ensemble size `N`.
    pub n: usize,
    pub seed: u64,
    pub eps_global: f64,
    pub eps_local: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Target node count of the mesh (elliptic, wave).
    pub mesh_nodes: usize,
    /// Space points of the grid (burgers).
    pub nx: usize,
    /// Time levels (burgers, wave).
    pub nt: usize,
    /// Probe point: `(x, y)`, `(x, t)` or `(x, y, t)`.
    pub probe: Vec<f64>,
    /// Amplitude of a `sin(πx/2)` initial profile (burgers; 0 means at rest).
    pub initial_amplitude: f64,
}

impl Settings {
    pub fn enrichment(&self) -> EnrichmentOptions {
        EnrichmentOptions {
            eps_global: self.eps_global,
            eps_local: self.eps_local,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
        }
    }

    pub fn validate(&self, probe_len: usize) -> Result<()> {
        self.enrichment().validate()?;
        if self.n < 2 {
            return Err(Error::invalid(format!("N must be at least 2, got {}", self.n)));
        }
        if self.probe.len() != probe_len {
            return Err(Error::invalid(format!("probe needs {probe_len} coordinates, got {}", self.probe.len())));
        }
        if self.probe.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("probe coordinates must be finite"));
        }
        Ok(())
    }
}

/// Outcome of one separated solve.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub benchmark: &'static str,
    pub settings: Settings,
    /// The converged expansion, or the partial one when `converged` is false.
    pub solution: SeparatedSolution,
    pub converged: bool,
    /// Solution at the probe point for every ensemble sample.
    pub probe_values: Vec<f64>,
    /// Names of the coordinates of a field entry, e.g. `["x", "y"]`.
    pub coordinate_labels: Vec<&'static str>,
    /// Coordinates of every entry of a deterministic mode.
    pub coordinates: Vec<Vec<f64>>,
    /// Extra `key = value` lines for reports.
    pub notes: Vec<(String, String)>,
    pub wall_time: Duration,
}

pub trait Benchmark: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn default_settings(&self) -> Settings;

    /// Number of probe coordinates.
    fn probe_len(&self) -> usize;

    fn run(&self, settings: &Settings) -> Result<BenchmarkRun>;

    /// Monte Carlo reference at the probe point.
    fn oracle(&self, settings: &Settings, n_mc: usize, seed: u64) -> Result<MCResult>;
}

/// Names accepted by [`create`].
pub fn names() -> &'static [&'static str] {
    &["elliptic", "burgers", "wave"]
}

pub fn create(name: &str) -> Result<Box<dyn Benchmark>> {
    match name {
        "elliptic" => Ok(Box::new(Elliptic)),
        "burgers" => Ok(Box::new(Burgers)),
        "wave" => Ok(Box::new(Wave)),
        other => Err(Error::invalid(format!("unknown problem '{other}', expected one of {}", names().join(", ")))),
    }
}

fn base_settings(m: usize, n: usize, eps_global: f64, probe: Vec<f64>) -> Settings {
    let e = EnrichmentOptions::default();
    Settings {
        m,
        n,
        seed: 1,
        eps_global,
        eps_local: e.eps_local,
        max_outer: e.max_outer,
        max_inner: e.max_inner,
        mesh_nodes: 0,
        nx: 0,
        nt: 0,
        probe,
        initial_amplitude: 0.0,
    }
}

/// Runs the enrichment and packages the result, keeping partial solutions.
fn solve<A: ProblemAdapter>(
    benchmark: &'static str,
    settings: &Settings,
    adapter: &mut A,
    probe: &[(usize, f64)],
    start: Instant,
) -> Result<BenchmarkRun> {
    let (solution, converged) = match enrich_until_converged(adapter, &settings.enrichment()) {
        Ok(s) => (s, true),
        Err(Error::NonConvergence { partial }) => (*partial, false),
        Err(e) => return Err(e),
    };
    let probe_values = if solution.is_empty() { vec![0.0; adapter.n_samples()] } else { solution.probe(probe) };
    Ok(BenchmarkRun {
        benchmark,
        settings: settings.clone(),
        solution,
        converged,
        probe_values,
        coordinate_labels: Vec::new(),
        coordinates: Vec::new(),
        notes: Vec::new(),
        wall_time: start.elapsed(),
    })
}

/// Diffusion-reaction on the unit square.
pub struct Elliptic;

impl Elliptic {
    pub fn problem(settings: &Settings) -> Result<EllipticProblem> {
        EllipticProblem::new(EllipticConfig { m: settings.m, mesh_nodes: settings.mesh_nodes, ..Default::default() })
    }
}

impl Benchmark for Elliptic {
    fn name(&self) -> &'static str {
        "elliptic"
    }

    fn description(&self) -> &'static str {
        "diffusion-reaction on the unit square with a KL diffusion field"
    }

    fn default_settings(&self) -> Settings {
        Settings { mesh_nodes: 808, ..base_settings(100, 100_000, 1e-6, vec![0.5, 0.5]) }
    }

    fn probe_len(&self) -> usize {
        2
    }

    fn run(&self, settings: &Settings) -> Result<BenchmarkRun> {
        settings.validate(self.probe_len())?;
        let start = Instant::now();
        let problem = Self::problem(settings)?;
        let ensemble = SampleEnsemble::generate(Distribution::Uniform, settings.n, settings.m.max(1), settings.seed)?;
        let probe = problem.discretization().point_functional(settings.probe[0], settings.probe[1])?;
        let mut adapter = problem.adapter(&ensemble)?;
        let mut run = solve(self.name(), settings, &mut adapter, &probe, start)?;
        let disc = problem.discretization();
        run.coordinate_labels = vec!["x", "y"];
        run.coordinates = (0..disc.n_dofs()).map(|d| disc.mesh().nodes()[disc.node_of(d)].to_vec()).collect();
        run.notes.push(("mesh_nodes".into(), disc.mesh().n_nodes().to_string()));
        run.notes.push(("dofs".into(), disc.n_dofs().to_string()));
        Ok(run)
    }

    fn oracle(&self, settings: &Settings, n_mc: usize, seed: u64) -> Result<MCResult> {
        settings.validate(self.probe_len())?;
        mc_elliptic(&Self::problem(settings)?, settings.probe[0], settings.probe[1], n_mc, seed)
    }
}

/// Inviscid Burgers equation with a Brownian force.
pub struct Burgers;

impl Burgers {
    pub fn problem(settings: &Settings) -> Result<BurgersProblem> {
        let d = SpaceTimeGrid::default();
        let grid = SpaceTimeGrid::new(settings.nt, settings.nx, d.x_len, d.t_len)?;
        let initial = if settings.initial_amplitude == 0.0 {
            InitialProfile::Zero
        } else {
            InitialProfile::Sine { amplitude: settings.initial_amplitude }
        };
        BurgersProblem::new(BurgersConfig { grid, m: settings.m, initial })
    }
}

impl Benchmark for Burgers {
    fn name(&self) -> &'static str {
        "burgers"
    }

    fn description(&self) -> &'static str {
        "inviscid Burgers equation driven by a Brownian force"
    }

    fn default_settings(&self) -> Settings {
        let g = SpaceTimeGrid::default();
        Settings { nx: g.nx, nt: g.nt, ..base_settings(1000, 10_000, 1e-2, vec![1.0, 0.5]) }
    }

    fn probe_len(&self) -> usize {
        2
    }

    fn run(&self, settings: &Settings) -> Result<BenchmarkRun> {
        settings.validate(self.probe_len())?;
        let start = Instant::now();
        let problem = Self::problem(settings)?;
        let ensemble = SampleEnsemble::generate(Distribution::StandardNormal, settings.n, settings.m, settings.seed)?;
        let probe = problem.probe_functional(settings.probe[0], settings.probe[1])?;
        let mut adapter = problem.adapter(&ensemble)?;
        let mut run = solve(self.name(), settings, &mut adapter, &probe, start)?;
        let g = problem.grid();
        run.coordinate_labels = vec!["x", "t"];
        run.coordinates = (0..g.nt).flat_map(|n| (0..g.nx).map(move |i| vec![g.x(i), g.t(n)])).collect();
        run.notes.push(("vertex_samples".into(), adapter.vertex_samples().to_string()));
        Ok(run)
    }

    fn oracle(&self, settings: &Settings, n_mc: usize, seed: u64) -> Result<MCResult> {
        settings.validate(self.probe_len())?;
        mc_burgers(&Self::problem(settings)?, settings.probe[0], settings.probe[1], n_mc, seed)
    }
}

/// Wave equation on the unit disk with a random initial shape.
pub struct Wave;

impl Wave {
    pub fn problem(settings: &Settings) -> Result<WaveProblem> {
        WaveProblem::new(WaveConfig {
            m: settings.m,
            mesh_nodes: settings.mesh_nodes,
            nt: settings.nt,
            ..Default::default()
        })
    }
}

impl Benchmark for Wave {
    fn name(&self) -> &'static str {
        "wave"
    }

    fn description(&self) -> &'static str {
        "wave equation on the unit disk with a random initial shape"
    }

    fn default_settings(&self) -> Settings {
        let d = WaveConfig::default();
        Settings { mesh_nodes: d.mesh_nodes, nt: d.nt, ..base_settings(1000, 10_000, 1e-2, vec![0.0, 0.0, 1.0]) }
    }

    fn probe_len(&self) -> usize {
        3
    }

    fn run(&self, settings: &Settings) -> Result<BenchmarkRun> {
        settings.validate(self.probe_len())?;
        let start = Instant::now();
        let problem = Self::problem(settings)?;
        let ensemble = SampleEnsemble::generate(Distribution::StandardNormal, settings.n, settings.m, settings.seed)?;
        let [x, y, t] = [settings.probe[0], settings.probe[1], settings.probe[2]];
        let probe = problem.probe_functional(x, y, t)?;
        let mut adapter = problem.adapter(&ensemble)?;
        let mut run = solve(self.name(), settings, &mut adapter, &probe, start)?;
        let disc = problem.discretization();
        let dt = problem.dt();
        run.coordinate_labels = vec!["x", "y", "t"];
        run.coordinates = (0..problem.nt())
            .flat_map(|k| {
                (0..disc.n_dofs()).map(move |d| {
                    let [x, y] = disc.mesh().nodes()[disc.node_of(d)];
                    vec![x, y, k as f64 * dt]
                })
            })
            .collect();
        run.notes.push(("mesh_nodes".into(), disc.mesh().n_nodes().to_string()));
        Ok(run)
    }

    fn oracle(&self, settings: &Settings, n_mc: usize, seed: u64) -> Result<MCResult> {
        settings.validate(self.probe_len())?;
        let p = &settings.probe;
        mc_wave(&Self::problem(settings)?, p[0], p[1], p[2], n_mc, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_every_name() {
        for &name in names() {
            let b = create(name).unwrap();
            assert_eq!(b.name(), name);
            let s = b.default_settings();
            assert_eq!(s.probe.len(), b.probe_len());
            s.validate(b.probe_len()).unwrap();
        }
        assert!(create("heat").is_err());
    }

    #[test]
    fn per_problem_tolerances() {
        assert_eq!(create("elliptic").unwrap().default_settings().eps_global, 1e-6);
        assert_eq!(create("burgers").unwrap().default_settings().eps_global, 1e-2);
        assert_eq!(create("wave").unwrap().default_settings().eps_global, 1e-2);
    }

    #[test]
    fn small_runs_through_the_trait() {
        for (name, m) in [("elliptic", 3), ("burgers", 20), ("wave", 4)] {
            let b = create(name).unwrap();
            let mut s = b.default_settings();
            s.m = m;
            s.n = 500;
            s.mesh_nodes = s.mesh_nodes.min(121);
            let run = b.run(&s).unwrap();
            assert!(run.converged);
            assert!(!run.solution.is_empty());
            assert_eq!(run.probe_values.len(), 500);
            assert_eq!(run.coordinates.len(), run.solution.mode(0).len());
            assert_eq!(run.coordinates[0].len(), run.coordinate_labels.len());
        }
    }

    #[test]
    fn partial_solution_is_kept() {
        let b = create("wave").unwrap();
        let mut s = b.default_settings();
        s.m = 20;
        s.n = 300;
        s.mesh_nodes = 127;
        s.eps_global = 1e-12;
        s.max_outer = 2;
        let run = b.run(&s).unwrap();
        assert!(!run.converged);
        assert_eq!(run.solution.len(), 2);
    }

    #[test]
    fn bad_probe_is_rejected() {
        let b = create("wave").unwrap();
        let mut s = b.default_settings();
        s.probe = vec![0.0, 0.0];
        assert!(b.run(&s).is_err());
    }
}
