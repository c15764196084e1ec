//! Simulation and verification toolkit for the averaged five-dimensional
//! spherical pendulum / limited-power motor system.

// `!(x <= bound)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod integrator;
pub mod invariants;
pub mod linalg;
pub mod model;
pub mod reduction;
pub mod system;
