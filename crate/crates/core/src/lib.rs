//! Numerical laboratory for the energy-method stability of steady planar
//! Navier-Stokes flows in the exterior of the unit disk.
//!
//! Modules, bottom-up:
//! - [`geometry`]: polar grids, quadrature, dyadic shells, improper integrals
//! - [`steady_flows`]: the Hamel family and weighted suprema
//! - [`functionals`]: norms, trilinear form, stability quotient, Hardy quotients
//! - [`counterexample`]: the rotating-flow counterexample family
//! - [`evolution`]: Galerkin time integration and semigroup diagnostics
//! - [`kernel_analysis`]: the `(s - tau)^{-1/2}` averaging functional
//! - [`runner`]: configuration and the experiment commands used by the CLI

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexample;
pub mod error;
pub mod evolution;
pub mod frame;
pub mod functionals;
pub mod geometry;
pub mod io;
pub mod kernel_analysis;
pub mod runner;
pub mod steady_flows;

pub use error::{Error, Result};
pub use frame::Tensor2;
pub use functionals::{StreamField, VelocityFieldPolar};
pub use geometry::{build_polar_grid, PolarGrid, Stretch};
pub use steady_flows::{classify_decay, DecayClass, SteadyFlowParams};
