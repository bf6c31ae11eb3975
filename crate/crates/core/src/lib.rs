//! Sample-based separated-representation solvers for stochastic PDEs.
//!
//! A stochastic solution is built as a sum of couples `λ_i(θ) d_i(x)`. Each
//! couple is found by alternating two Galerkin projections: a deterministic
//! PDE for `d_i` (solved with ordinary FEM or finite differences) and a
//! scalar algebraic equation for `λ_i` that is solved independently at every
//! sample of a fixed ensemble. The cost of the stochastic step is linear in
//! the number of random dimensions.
//!
//! Three benchmark problems are provided behind the [`benchmarks::Benchmark`]
//! trait and can be selected by name through [`benchmarks::create`]:
//!
//! * `elliptic`: diffusion-reaction on the unit square with a Karhunen-Loève
//!   coefficient field,
//! * `burgers`: inviscid Burgers equation driven by a Brownian force,
//! * `wave`: wave equation on the unit disk with a random initial shape.
//!
//! A brute-force Monte Carlo oracle ([`mcoracle`]) and density estimation
//! ([`stats`]) are included for validation.

pub mod benchmarks;
pub mod burgers;
pub mod elliptic;
mod error;
pub mod fdgrid;
pub mod fem2d;
pub mod klexp;
pub mod mcoracle;
pub mod sampling;
pub mod separated;
pub mod stats;
pub mod wave;

pub use error::{Error, Result};
pub use sampling::{Distribution, RandomVariableSamples, SampleEnsemble};
pub use separated::{
    enrich_until_converged, DeterministicField, EnrichmentOptions, ProblemAdapter,
    SeparatedSolution,
};
