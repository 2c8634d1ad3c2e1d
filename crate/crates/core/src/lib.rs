//! Numerical toolkit for first eigenvalues and torsional rigidity of the
//! anisotropic p-Laplacian on convex planar domains.
//!
//! The crate provides anisotropic norms and Wulff shapes ([`anisotropy`]),
//! p-circular functions ([`ptrig`]), convex polygon geometry with inner
//! parallel bodies ([`geometry`]), radial solvers on Wulff shapes
//! ([`radial`]), the closed-form and web-function bounds ([`bounds`]),
//! finite-element solvers ([`fem`]) and experiment suites ([`report`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anisotropy;
pub mod bounds;
pub mod error;
pub mod fem;
pub mod fmt;
pub mod geometry;
pub mod ptrig;
pub mod quadrature;
pub mod radial;
pub mod report;
pub mod vec2;

pub use anisotropy::{Norm, NormSpec, WulffShape};
pub use bounds::{BoundsOptions, BoundsReport};
pub use error::{Error, Result};
pub use fem::{EigenResult, SolverOptions, TorsionResult, TriMesh};
pub use geometry::{ConvexPolygon, InnerParallelProfile, ShapeSpec};
pub use ptrig::PTrigContext;
pub use report::{run_suite, ExperimentSuite, RunConfig, SuiteOutcome};
pub use vec2::{Sym2, Vec2};
