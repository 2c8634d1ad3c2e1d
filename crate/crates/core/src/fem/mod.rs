//! P1 finite-element solvers for the first eigenvalue and the p-torsion.

pub mod energy;
pub mod fem1d;
pub mod mesh;
pub mod solver;
pub mod sparse;

pub use energy::{Density, P1Space};
pub use mesh::{triangulate, TriMesh};
pub use solver::{
    estimate_discretization_error, linear_principal_eigen, observed_order, solve_eigen,
    solve_torsion, EigenResult, EpsLadder, ErrorEstimate, SolverOptions, TorsionResult,
};
