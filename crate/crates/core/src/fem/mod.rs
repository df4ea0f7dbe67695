//! P1 finite elements on structured simplicial meshes of the unit square and cube.

mod assembly;
mod mesh;
mod problem;

pub use assembly::{assemble_laplacian, assemble_mass, assemble_stiffness};
pub use mesh::{build_mesh, interpolate, prolongate_nodal, MeshP1};
pub(crate) use mesh::coarse_parents;
pub use problem::{
    adjoint_hessian, nonlinear_residual, objective, objective_gradient, state_jacobian,
    ProblemInstance, ProblemParams,
};
