//! Linear triangular finite elements on the unit square and the unit disk.

mod assembly;
mod mesh;
mod sparse;

pub use assembly::{
    assemble_affine_operator, AffineCoefficient, Discretization, StochasticOperator,
};
pub use mesh::{mesh_disk, mesh_square, TriMesh};
pub use sparse::{solve_sparse, CsrPattern, EnvelopeCholesky, SparseMatrix};
