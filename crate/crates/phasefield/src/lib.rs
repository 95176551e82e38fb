//! Finite-element phase-field solvers for the Allen-Cahn and Cahn-Hilliard
//! gradient flows.
//!
//! The crate provides P1 assembly on triangulated rectangles, the classical
//! first- and second-order time discretizations (fully implicit, convex
//! splitting, semi-implicit, Crank-Nicolson and their mass-lumped and
//! energy-minimization forms), the exact time-step rescalings that identify
//! the splitting schemes with fully implicit ones, a discrete maximum
//! principle for the lumped schemes on Delaunay meshes, and a
//! shifted-Laplacian preconditioner with a uniform condition-number bound.
//!
//! The `phasefield` binary drives experiments from flat key = value
//! configuration files; see the repository README.

pub mod analysis;
pub mod config;
pub mod energies;
pub mod error;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod potentials;
pub mod quadrature;
pub mod solvers;
pub mod sparse;
pub mod steppers;

pub use error::{Error, Result};
pub use fem::{assemble, FemSpace, Field};
pub use mesh::{check_delaunay, generate_uniform, Mesh, Rect};
