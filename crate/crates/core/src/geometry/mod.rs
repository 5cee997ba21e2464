//! Polar grids, quadrature and shell decompositions on the exterior of the
//! closed unit disk.

mod grid;
mod quadrature;
mod shells;

pub use grid::{build_polar_grid, PolarGrid, QuadratureRule, Stretch, DEFAULT_PANEL_ORDER};
pub use quadrature::{
    adaptive_integral, adaptive_integral_with_breaks, compensated_sum, gauss_legendre,
    gauss_legendre_integral, improper_radial_integral, legendre_jet, CompensatedSum, Integral,
};
pub use shells::{shell_poincare_constants, shell_quotient, ShellDecomposition};
