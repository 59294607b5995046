//! Space-time boundary element solver and adjoint shape optimization for
//! recovering a moving zero-temperature void inside a 2D conductor from
//! temperature and heat-flux measurements on the outer boundary.
//!
//! The layers, bottom-up:
//!
//! - [`geometry`]: Fourier × Legendre star-shaped void and the space-time mesh.
//! - [`potentials`]: thermal layer potentials and singularity-corrected time rules.
//! - [`solver`]: Nyström time marching for the state, adjoint, and synthetic data.
//! - [`inverse`]: tracking functional, shape gradient, and quasi-Newton loop.
//! - [`resample`]: transfer of boundary data between grids.
//! - [`validation`]: manufactured solutions and gradient oracles.
//! - [`config`], [`io`], [`workflow`]: run configuration, files, and commands.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod conventions;
pub mod error;
pub mod geometry;
pub mod inverse;
pub mod io;
pub mod potentials;
pub mod resample;
pub mod solver;
pub mod validation;
pub mod workflow;

pub use conventions::Conventions;
pub use error::{Error, Result};
pub use geometry::{build_mesh, ShapeCoefficients, SpaceTimeMesh};
