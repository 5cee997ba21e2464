//! Spectral Galerkin integration of the perturbation equations
//! `v_t - Delta v + ubar . grad v + v . grad ubar + v . grad v + grad q = 0`
//! on the truncated annulus `1 <= r <= r_max` with no-slip at both radii,
//! and the linear semigroup diagnostics.

mod basis;
mod semigroup;
mod simulate;
mod stepper;
mod system;

pub use basis::{restrict_central, BasisSpec, GalerkinBasis, ModeLabel, Symmetry};
pub use semigroup::{
    gradient_decay, l2_inner, log_uniform_datum, loglog_slope, measure_nonlinear_bound, semigroup_apply,
    NonlinearBound, NonlinearSample, Semigroup, Which,
};
pub use simulate::{cesaro_average, simulate, simulate_coefficients, EnergyTrace, SimOptions};
pub use stepper::{Integrator, Scheme, SpectralState, StepReport, MAX_NONLINEAR_ITERATIONS};
pub use system::{assemble_system, GalerkinSystem};
