//! Higher-order cubical differential forms built from small cubes.
//!
//! The crate covers the reference-cube side (small cubes, basis forms, exact
//! integration of basis forms over small cubes, unisolvence) and the mesh side
//! (parallelotope meshes, the kth order refinement, the de Rham map and the
//! interpolation operator from cochains to piecewise cubical forms).

pub mod combinatorics;
pub mod convergence;
pub mod dof;
pub mod error;
pub mod exec;
pub mod forms;
pub mod interp;
pub mod linalg;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod smallcubes;

pub use error::{Error, Result};
