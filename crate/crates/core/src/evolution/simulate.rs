//! Full nonlinear runs with energy bookkeeping.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::{antipodal_defect, StreamField};
use crate::io::CsvTable;

use super::stepper::{Integrator, Scheme, SpectralState};
use super::system::GalerkinSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub scheme: Scheme,
    /// Check the antipodal defect at every recorded sample.
    pub track_symmetry: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: 0.01, horizon: 1.0, scheme: Scheme::ImplicitMidpoint, track_symmetry: false }
    }
}

/// Samples of one run. Index 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// `||v(t)||_2^2`.
    pub energy: Vec<f64>,
    /// Cumulative `int_0^t ||grad v||_2^2`, midpoint rule per step.
    pub dissipation: Vec<f64>,
    /// `||grad v(t)||_2^2` at each sample.
    pub grad_energy: Vec<f64>,
    /// Per-step slack `||v_{n+1}||^2 - ||v_n||^2 + (1 - delta) dt ||grad v_{n+1/2}||^2`.
    pub residuals: Vec<f64>,
    /// Largest `|(v . grad v, v)| / ||grad v||^2` over all steps.
    pub max_cancellation: f64,
    /// Largest antipodal defect relative to `max |v|`, when tracked.
    pub max_antipodal_defect: Option<f64>,
    /// Constant used in the bookkeeping; `None` labels a run without theory.
    pub delta_hat: Option<f64>,
    pub final_state: SpectralState,
    /// Coefficients at every sample.
    pub states: Vec<DVector<f64>>,
}

impl EnergyTrace {
    pub fn has_theory(&self) -> bool {
        self.delta_hat.is_some_and(|d| d < 1.0)
    }

    /// `"no-theory"` for backgrounds outside every stability guarantee.
    pub fn label(&self) -> &'static str {
        if self.has_theory() {
            "energy-inequality"
        } else {
            "no-theory"
        }
    }

    pub fn initial_energy(&self) -> f64 {
        self.energy[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy.last().expect("trace holds the initial state")
    }

    /// Largest value of `||v(t)||^2 + (1 - delta) D(t) - ||v0||^2`, relative to `||v0||^2`.
    pub fn bookkeeping_excess(&self) -> f64 {
        let d = self.delta_hat.unwrap_or(0.0);
        let e0 = self.initial_energy();
        if e0 == 0.0 {
            return self.energy.iter().cloned().fold(0.0, f64::max);
        }
        self.energy
            .iter()
            .zip(&self.dissipation)
            .map(|(e, q)| (e + (1.0 - d) * q - e0) / e0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest per-step residual relative to the energy before the step.
    pub fn max_step_residual(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.energy)
            .map(|(r, e)| if *e > 0.0 { r / e } else { *r })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether `||v(t)||_2` never increases beyond relative rounding `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(self.label(), &["t", "energy", "dissipation", "residual"]);
        for k in 0..self.times.len() {
            let res = if k == 0 { 0.0 } else { self.residuals[k - 1] };
            t.push_floats(&[self.times[k], self.energy[k], self.dissipation[k], res]);
        }
        t
    }
}

/// Runs the Galerkin flow from coefficients `xi0` up to `opts.horizon`.
pub fn simulate_coefficients(sys: &GalerkinSystem, xi0: DVector<f64>, opts: &SimOptions) -> Result<EnergyTrace> {
    if xi0.len() != sys.dim() {
        return Err(invalid(format!("initial state has {} coefficients, basis has {}", xi0.len(), sys.dim())));
    }
    if !(opts.horizon >= 0.0) || !opts.horizon.is_finite() {
        return Err(invalid(format!("horizon must be non-negative, got {}", opts.horizon)));
    }
    let steps = (opts.horizon / opts.dt).round() as usize;
    let mut int = Integrator::new(sys, opts.dt, opts.scheme)?;
    let delta = sys.delta_hat().filter(|d| *d < 1.0);
    let factor = 1.0 - delta.unwrap_or(0.0);
    let mut state = SpectralState::new(xi0);
    let mut e = sys.energy(&state.xi);
    let mut trace = EnergyTrace {
        times: vec![0.0],
        energy: vec![e],
        dissipation: vec![0.0],
        grad_energy: vec![sys.grad_energy(&state.xi)],
        residuals: Vec::with_capacity(steps),
        max_cancellation: 0.0,
        max_antipodal_defect: None,
        delta_hat: delta,
        final_state: state.clone(),
        states: vec![state.xi.clone()],
    };
    let symmetry = |xi: &DVector<f64>| -> Result<f64> {
        let v = sys.to_velocity(xi)?;
        let m = v.max_abs();
        Ok(if m > 0.0 { antipodal_defect(&v) / m } else { 0.0 })
    };
    if opts.track_symmetry {
        trace.max_antipodal_defect = Some(symmetry(&state.xi)?);
    }
    for _ in 0..steps {
        let (next, rep) = int.step(&state).map_err(|err| match err {
            Error::StepFailed { .. } => err,
            other => Error::StepFailed { t: state.t, reason: other.to_string() },
        })?;
        let e_next = sys.energy(&next.xi);
        let dissipated = opts.dt * rep.grad_energy_mid;
        trace.residuals.push(e_next - e + factor * dissipated);
        if rep.grad_energy_mid > 0.0 {
            trace.max_cancellation = trace.max_cancellation.max(rep.cancellation.abs() / rep.grad_energy_mid);
        }
        trace.times.push(next.t);
        trace.energy.push(e_next);
        trace.grad_energy.push(sys.grad_energy(&next.xi));
        trace.states.push(next.xi.clone());
        trace.dissipation.push(trace.dissipation.last().unwrap() + dissipated);
        if opts.track_symmetry {
            let d = symmetry(&next.xi)?;
            trace.max_antipodal_defect = trace.max_antipodal_defect.map(|m| m.max(d));
        }
        e = e_next;
        state = next;
    }
    trace.final_state = state;
    Ok(trace)
}

/// Projects `v0` onto the basis and runs the Galerkin flow.
pub fn simulate(sys: &GalerkinSystem, v0: &StreamField, opts: &SimOptions) -> Result<EnergyTrace> {
    let xi0 = sys.project(v0)?;
    simulate_coefficients(sys, xi0, opts)
}

/// Running average `(1/t) int_0^t f(s) ds` of samples `f(times[k])`, by the
/// trapezoid rule. The value at `t = 0` is `f(0)`.
pub fn cesaro_average(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if times.len() != values.len() || times.is_empty() {
        return Err(invalid("times and values must be non-empty and of equal length"));
    }
    if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times must start at 0 and increase"));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(values[0]);
    for k in 1..times.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc / times[k]);
    }
    Ok(out)
}
