//! Minimal P1 finite-element kernel: structured graded triangulations,
//! variable-coefficient assembly with periodic folding, and Jacobi
//! preconditioned conjugate gradients on CSR matrices.

pub mod assembly;
pub mod mesh;
pub mod sparse;

pub use assembly::{
    assemble, assemble_form, element_matrices, shape_gradients, AssembledSystem, ClosureForm,
    DofMap, ElementMatrices, FemField, WeakForm,
};
pub use mesh::{build_cell_mesh, graded_mesh, graded_mesh_on, rectangle_mesh, BoundaryTag, TopBoundary, TriMesh2D};
pub use sparse::{solve_cg, solve_direct, CgSolution, SparseMatrixCSR};
