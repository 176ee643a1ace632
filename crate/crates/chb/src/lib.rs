//! Solver and adjoint-based optimal-control engine for the 2D nonlocal
//! Cahn-Hilliard-Brinkman system with a regular double-well potential.
//!
//! The crate simulates phase separation of a binary fluid in a porous
//! medium, evaluates tracking-type costs, computes reduced gradients via
//! tangent/adjoint sweeps, and finds box-constrained optimal controls by
//! projected gradient descent.

// Validation guards are written as `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod assumptions;
pub mod brinkman;
pub mod cli;
pub mod config;
pub mod configfile;
pub mod control;
pub mod conv;
pub mod error;
pub mod forward;
pub mod manifest;
pub mod optimize;
pub mod pgm;
pub mod snapshot;
pub mod tangent;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod operators;
pub mod potential;
pub mod presets;
pub mod transforms;

pub use error::{ChbError, Hypothesis, Result};
pub use field::{ScalarField, VelocityField};
pub use grid::{BoundaryMode, GridSpec};
pub use kernel::{Kernel, KernelKind};
pub use potential::{Potential, PotentialKind};
