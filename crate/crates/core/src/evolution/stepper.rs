//! Time integration of `M xi' + (A + C) xi + N(xi) = 0`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

use super::system::GalerkinSystem;

/// Fixed-point iterations allowed per implicit-midpoint step.
pub const MAX_NONLINEAR_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Crank-Nicolson diffusion with second-order Adams-Bashforth advection.
    ImexCnAb2,
    /// Fully implicit midpoint rule; reproduces the continuous energy balance.
    #[default]
    ImplicitMidpoint,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::ImexCnAb2 => "imex_cn_ab2",
            Scheme::ImplicitMidpoint => "implicit_midpoint",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex_cn_ab2" => Ok(Scheme::ImexCnAb2),
            "implicit_midpoint" => Ok(Scheme::ImplicitMidpoint),
            other => Err(Error::Parse(format!(
                "unknown scheme '{other}', expected imex_cn_ab2 or implicit_midpoint"
            ))),
        }
    }
}

/// Coefficients `xi` of `v = sum xi_i phi_i` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub xi: DVector<f64>,
    pub t: f64,
}

impl SpectralState {
    pub fn new(xi: DVector<f64>) -> Self {
        Self { xi, t: 0.0 }
    }
}

/// Diagnostics of one step, evaluated at the midpoint `(xi_n + xi_{n+1}) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub grad_energy_mid: f64,
    /// `(v . grad v, v)` at the midpoint.
    pub cancellation: f64,
    pub iterations: usize,
}

/// Integrator bound to one system, step size and scheme.
#[derive(Debug)]
pub struct Integrator<'a> {
    sys: &'a GalerkinSystem,
    dt: f64,
    scheme: Scheme,
    lu: LU<f64, Dyn, Dyn>,
    /// IMEX right-hand operator `M/dt - A/2`.
    explicit: DMatrix<f64>,
    advection: DMatrix<f64>,
    previous: Option<DVector<f64>>,
}

impl<'a> Integrator<'a> {
    pub fn new(sys: &'a GalerkinSystem, dt: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let m = sys.mass() / dt;
        let l = sys.l_matrix();
        let (lhs, explicit) = match scheme {
            Scheme::ImplicitMidpoint => (2.0 * &m + &l, DMatrix::zeros(0, 0)),
            Scheme::ImexCnAb2 => (&m + 0.5 * sys.stiffness(), &m - 0.5 * sys.stiffness()),
        };
        let lu = lhs.lu();
        if !lu.is_invertible() {
            return Err(Error::LinearAlgebra("step matrix is singular".into()));
        }
        Ok(Self { sys, dt, scheme, lu, explicit, advection: sys.advection(), previous: None })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&mut self, state: &SpectralState) -> Result<(SpectralState, StepReport)> {
        let (xi, report) = match self.scheme {
            Scheme::ImplicitMidpoint => self.midpoint(state)?,
            Scheme::ImexCnAb2 => self.imex(state)?,
        };
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::StepFailed { t: state.t, reason: "non-finite state".into() });
        }
        Ok((SpectralState { xi, t: state.t + self.dt }, report))
    }

    /// Solves `(2M/dt + L) y = 2M xi_n/dt - N(y)` for the midpoint `y` by
    /// fixed-point iteration on the frozen linear part.
    fn midpoint(&self, state: &SpectralState) -> Result<(DVector<f64>, StepReport)> {
        let base = self.sys.mass() * &state.xi * (2.0 / self.dt);
        let mut y = self.lu.solve(&base).ok_or_else(|| Error::LinearAlgebra("LU solve failed".into()))?;
        let mut n_y = self.sys.nonlinear(&y);
        for it in 1..=MAX_NONLINEAR_ITERATIONS {
            let next = self
                .lu
                .solve(&(&base - &n_y))
                .ok_or_else(|| Error::LinearAlgebra("LU solve failed".into()))?;
            let change = (&next - &y).norm();
            y = next;
            n_y = self.sys.nonlinear(&y);
            if change <= 1e-14 * y.norm() || y.norm() == 0.0 {
                let report = StepReport {
                    grad_energy_mid: self.sys.grad_energy(&y),
                    cancellation: y.dot(&n_y),
                    iterations: it,
                };
                return Ok((2.0 * &y - &state.xi, report));
            }
        }
        Err(Error::StepFailed {
            t: state.t,
            reason: format!("midpoint iteration did not converge in {MAX_NONLINEAR_ITERATIONS} iterations"),
        })
    }

    fn imex(&mut self, state: &SpectralState) -> Result<(DVector<f64>, StepReport)> {
        let f_now = &self.advection * &state.xi + self.sys.nonlinear(&state.xi);
        let extrapolated = match &self.previous {
            Some(f_prev) => 1.5 * &f_now - 0.5 * f_prev,
            None => f_now.clone(),
        };
        let rhs = &self.explicit * &state.xi - extrapolated;
        let xi = self.lu.solve(&rhs).ok_or_else(|| Error::LinearAlgebra("LU solve failed".into()))?;
        self.previous = Some(f_now);
        let mid = 0.5 * (&xi + &state.xi);
        let report = StepReport {
            grad_energy_mid: self.sys.grad_energy(&mid),
            cancellation: mid.dot(&self.sys.nonlinear(&mid)),
            iterations: 1,
        };
        Ok((xi, report))
    }
}
