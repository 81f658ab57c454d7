//! Allen-Cahn action functional toolkit.
//!
//! The crate is `no_std` with `alloc`. It contains the double-well potential,
//! finite-difference grids, the diffuse energies and the space-time action,
//! Allen-Cahn integrators, a minimum-action path optimizer, diffuse-interface
//! observables and the sharp-interface reduced action. File formats and the
//! command line front-end live in the `ac-action-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;

pub mod diagnostics;
pub mod dynamics;
pub mod functionals;
pub mod mesh;
pub mod minimizer;
pub mod potential;
pub mod reduced;

pub use error::{Error, Result};
pub use functionals::{ActionBreakdown, Epsilon, SpaceTimePath};
pub use mesh::{Boundary, Grid, ScalarField};
pub use potential::SURFACE_TENSION;
