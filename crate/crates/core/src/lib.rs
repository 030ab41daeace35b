//! Discrete elastic ribbon simulation.
//!
//! A ribbon is a centerline of `M` nodes with a twist angle per edge. Five
//! bending–twisting energies are available; equilibria are traced with
//! adaptive implicit Euler steps whose Newton systems are banded and solved with
//! a regularised LU. Scenario drivers reproduce compression, shear, twist and
//! width-homotopy benchmarks and locate the force extrema marking transitions.

// Index loops mirror the stencil algebra; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod jet;
pub mod kinematics;
pub mod strain_derivatives;
pub mod energy;
pub mod banded;
pub mod assembly;
pub mod integrator;
pub mod scenarios;
pub mod cli_io;
pub mod checks;
mod par;

pub use par::PARALLEL;
pub use error::{Result, RibError};
