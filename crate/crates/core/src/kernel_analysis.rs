//! The averaging functional
//! `I(t) = (1/t) int_0^t int_0^s (s - tau)^{-1/2} f(tau) dtau ds`
//! with its interchanged form `(2/t) int_0^t (t - tau)^{1/2} f(tau) dtau`,
//! the pairing `||chi_t f||_1` with `chi_t = t^{-1/2} 1_[0,t]`, and the
//! numerical version of the Duhamel decay chain for a computed run.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolution::{cesaro_average, measure_nonlinear_bound, EnergyTrace, GalerkinSystem, NonlinearBound, Semigroup, Which};
use crate::geometry::adaptive_integral_with_breaks;
use crate::io::CsvTable;

/// Relative agreement required between the two forms of `I(t)`.
pub const FUBINI_TOLERANCE: f64 = 1e-8;

const INNER_TOL: f64 = 1e-12;
const OUTER_TOL: f64 = 1e-10;

/// Non-negative function on `[0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeFunction {
    Zero,
    /// Indicator of `[a, b]`.
    Indicator { a: f64, b: f64 },
    /// `(1 + tau)^{-p}`.
    PowerDecay { p: f64 },
    /// `amplitude * exp(-rate * tau)`.
    Exponential { amplitude: f64, rate: f64 },
    /// Piecewise-linear interpolant of samples, zero outside `[times[0], times[last]]`.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl ProbeFunction {
    fn validate(&self) -> Result<()> {
        match self {
            ProbeFunction::Zero => Ok(()),
            ProbeFunction::Indicator { a, b } => {
                if !(*a >= 0.0 && b > a) || !b.is_finite() {
                    return Err(invalid(format!("indicator needs 0 <= a < b, got [{a}, {b}]")));
                }
                Ok(())
            }
            ProbeFunction::PowerDecay { p } => {
                if !(*p > 0.0) {
                    return Err(invalid(format!("decay exponent must be positive, got {p}")));
                }
                Ok(())
            }
            ProbeFunction::Exponential { amplitude, rate } => {
                if !(*amplitude >= 0.0 && *rate > 0.0) {
                    return Err(invalid("exponential probe needs amplitude >= 0 and rate > 0"));
                }
                Ok(())
            }
            ProbeFunction::Sampled { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return Err(invalid("sampled probe needs at least two (time, value) pairs"));
                }
                if !(times[0] >= 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("sample times must be non-negative and increasing"));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(invalid("probe values must be finite and non-negative"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            ProbeFunction::Zero => 0.0,
            ProbeFunction::Indicator { a, b } => {
                if tau >= *a && tau <= *b {
                    1.0
                } else {
                    0.0
                }
            }
            ProbeFunction::PowerDecay { p } => (1.0 + tau).powf(-p),
            ProbeFunction::Exponential { amplitude, rate } => amplitude * (-rate * tau).exp(),
            ProbeFunction::Sampled { times, values } => {
                let n = times.len();
                if tau < times[0] || tau > times[n - 1] {
                    return 0.0;
                }
                let k = times.partition_point(|&x| x <= tau).clamp(1, n - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (tau - t0) / (t1 - t0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }

    /// Points where `f` or its derivative may jump.
    fn knots(&self) -> Vec<f64> {
        match self {
            ProbeFunction::Indicator { a, b } => vec![*a, *b],
            ProbeFunction::Sampled { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }

    /// `||f||_2`, or `None` when `f` is not square integrable.
    pub fn l2_norm(&self) -> Option<f64> {
        match self {
            ProbeFunction::Zero => Some(0.0),
            ProbeFunction::Indicator { a, b } => Some((b - a).sqrt()),
            ProbeFunction::PowerDecay { p } => (*p > 0.5).then(|| (1.0 / (2.0 * p - 1.0)).sqrt()),
            ProbeFunction::Exponential { amplitude, rate } => Some(amplitude / (2.0 * rate).sqrt()),
            ProbeFunction::Sampled { times, values } => {
                // exact for the linear interpolant
                let s: f64 = times
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(t, v)| (t[1] - t[0]) * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]) / 3.0)
                    .sum();
                Some(s.sqrt())
            }
        }
    }

    /// `int_0^t f`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            ProbeFunction::Zero => 0.0,
            ProbeFunction::Indicator { a, b } => (t.min(*b) - a).max(0.0),
            ProbeFunction::PowerDecay { p } => {
                if (p - 1.0).abs() < 1e-15 {
                    t.ln_1p()
                } else {
                    ((1.0 + t).powf(1.0 - p) - 1.0) / (1.0 - p)
                }
            }
            ProbeFunction::Exponential { amplitude, rate } => amplitude * (-(-rate * t).exp_m1()) / rate,
            ProbeFunction::Sampled { times, values } => {
                let mut acc = 0.0;
                for (tw, vw) in times.windows(2).zip(values.windows(2)) {
                    if tw[0] >= t {
                        break;
                    }
                    let hi = tw[1].min(t);
                    let f_hi = self.eval(hi);
                    acc += 0.5 * (hi - tw[0]) * (vw[0] + f_hi);
                }
                acc
            }
        }
    }
}

/// A probe function together with the times at which `I(t)` is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProbe {
    pub f: ProbeFunction,
    pub t_grid: Vec<f64>,
}

impl KernelProbe {
    pub fn new(f: ProbeFunction, t_grid: Vec<f64>) -> Result<Self> {
        f.validate()?;
        if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(invalid("evaluation times must be positive"));
        }
        Ok(Self { f, t_grid })
    }

    /// `n` log-spaced times on `[t_min, t_max]`.
    pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
        if n < 2 {
            return vec![t_min];
        }
        (0..n).map(|k| t_min * (t_max / t_min).powf(k as f64 / (n - 1) as f64)).collect()
    }

    pub fn is_l2(&self) -> bool {
        self.f.l2_norm().is_some()
    }
}

/// `int_0^s (s - tau)^{-1/2} f(tau) dtau`.
fn memory_integral(f: &ProbeFunction, s: f64) -> Result<f64> {
    if s <= 0.0 {
        return Ok(0.0);
    }
    match f {
        ProbeFunction::Zero => Ok(0.0),
        ProbeFunction::Sampled { times, values } => Ok(linear_moments(times, values, s, Moment::InvSqrt)),
        _ => {
            // tau = s - u^2 removes the endpoint singularity
            let breaks = u_breaks(f, s);
            Ok(2.0 * adaptive_integral_with_breaks(|u| f.eval(s - u * u), &breaks, 0.0, INNER_TOL)?.value)
        }
    }
}

/// `int_0^t (t - tau)^{1/2} f(tau) dtau`.
fn sqrt_moment(f: &ProbeFunction, t: f64) -> Result<f64> {
    match f {
        ProbeFunction::Zero => Ok(0.0),
        ProbeFunction::Sampled { times, values } => Ok(linear_moments(times, values, t, Moment::Sqrt)),
        _ => {
            let breaks = u_breaks(f, t);
            Ok(2.0 * adaptive_integral_with_breaks(|u| u * u * f.eval(t - u * u), &breaks, 0.0, INNER_TOL)?.value)
        }
    }
}

/// Breakpoints in `u = sqrt(s - tau)` for the knots of `f` inside `(0, s)`.
fn u_breaks(f: &ProbeFunction, s: f64) -> Vec<f64> {
    let mut b = vec![0.0, s.sqrt()];
    // dyadic tau-scales keep panels matched to the decay of f near tau = 0
    let dyadic = (-8..=60).map(|k| 2f64.powi(k));
    b.extend(f.knots().into_iter().chain(dyadic).filter(|k| *k > 0.0 && *k < s).map(|k| (s - k).sqrt()));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `[0, h]` split at `h 2^{-k}` so long ranges start with reasonable panels.
fn geometric_breaks(h: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let levels = (h.max(1.0).log2().ceil() as i32).min(40);
    b.extend((0..=levels).rev().map(|k| h * 0.5f64.powi(k)));
    b
}

#[derive(Clone, Copy)]
enum Moment {
    InvSqrt,
    Sqrt,
}

/// Exact `int (s - tau)^{+-1/2} f(tau) dtau` over `[0, s]` for the linear interpolant.
///
/// On a piece `[a, b]` put `p = sqrt(s - a)`, `q = sqrt(s - b)`; the moments
/// against the two hat functions are written with `p - q = h / (p + q)` so no
/// cancellation occurs when `s` is far from the piece.
fn linear_moments(times: &[f64], values: &[f64], s: f64, kind: Moment) -> f64 {
    let mut acc = 0.0;
    for (tw, vw) in times.windows(2).zip(values.windows(2)) {
        let a = tw[0];
        if a >= s {
            break;
        }
        let b = tw[1].min(s);
        let fb = vw[0] + (vw[1] - vw[0]) * (b - a) / (tw[1] - tw[0]);
        let h = b - a;
        let (p, q) = ((s - a).sqrt(), (s - b).sqrt());
        let pq = p + q;
        // weights of f(a) (left hat) and f(b) (right hat)
        let (wl, wr) = match kind {
            Moment::InvSqrt => (2.0 * h * (p + 2.0 * q) / (3.0 * pq * pq), 2.0 * h * (2.0 * p + q) / (3.0 * pq * pq)),
            Moment::Sqrt => (
                2.0 * h * (3.0 * p * p * p + 6.0 * p * p * q + 4.0 * p * q * q + 2.0 * q * q * q) / (15.0 * pq * pq),
                2.0 * h * (2.0 * p * p * p + 4.0 * p * p * q + 6.0 * p * q * q + 3.0 * q * q * q) / (15.0 * pq * pq),
            ),
        };
        acc += wl * vw[0] + wr * fb;
    }
    acc
}

/// Both forms of `I(t)` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub t: f64,
    /// `(1/t) int_0^t int_0^s (s - tau)^{-1/2} f dtau ds`.
    pub double: f64,
    /// `(2/t) int_0^t (t - tau)^{1/2} f dtau`.
    pub single: f64,
}

pub fn kernel_forms(probe: &KernelProbe, t: f64) -> Result<KernelValue> {
    if !(t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    let f = &probe.f;
    let single = 2.0 / t * sqrt_moment(f, t)?;
    // the memory integral behaves like sqrt(s - knot) after every knot
    let mut knots: Vec<f64> = std::iter::once(0.0)
        .chain(f.knots().into_iter().filter(|k| *k > 0.0 && *k < t))
        .chain(std::iter::once(t))
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut outer = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let g = |x: f64| {
            let s = a + x * x;
            2.0 * x * memory_integral(f, s).unwrap_or(f64::NAN)
        };
        let piece = adaptive_integral_with_breaks(g, &geometric_breaks((b - a).sqrt()), 0.0, OUTER_TOL)?.value;
        if !piece.is_finite() {
            return Err(Error::NonConvergent(format!("memory integral failed on [{a}, {b}]")));
        }
        outer += piece;
    }
    Ok(KernelValue { t, double: outer / t, single })
}

/// `I(t)` by the single-integral form, checked against the double integral.
pub fn kernel_average(probe: &KernelProbe, t: f64) -> Result<f64> {
    let v = kernel_forms(probe, t)?;
    let scale = v.single.abs().max(v.double.abs());
    if (v.single - v.double).abs() > FUBINI_TOLERANCE * scale {
        return Err(Error::Inconsistent(format!(
            "forms of I({t}) disagree: double {:e}, single {:e}",
            v.double, v.single
        )));
    }
    Ok(v.single)
}

/// `||chi_t f||_1 = t^{-1/2} int_0^t f`.
pub fn chi_pairing(probe: &KernelProbe, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    Ok(probe.f.integral(t) / t.sqrt())
}

/// One row per grid time: `t, I_double, I_single, chi_pairing, bound_2norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub t: f64,
    pub double: f64,
    pub single: f64,
    pub chi: f64,
    /// `||f||_2`, infinite when `f` is not square integrable.
    pub bound: f64,
}

pub fn kernel_scan(probe: &KernelProbe) -> Result<Vec<KernelRow>> {
    let bound = probe.f.l2_norm().unwrap_or(f64::INFINITY);
    probe
        .t_grid
        .par_iter()
        .map(|&t| {
            let v = kernel_forms(probe, t)?;
            Ok(KernelRow { t, double: v.double, single: v.single, chi: chi_pairing(probe, t)?, bound })
        })
        .collect()
}

pub fn kernel_table(rows: &[KernelRow]) -> CsvTable {
    let mut t = CsvTable::new("kernel-average", &["t", "I_double", "I_single", "chi_pairing", "bound_2norm"]);
    for r in rows {
        t.push_floats(&[r.t, r.double, r.single, r.chi, r.bound]);
    }
    t
}

/// Terms of `||v(s)|| <= ||e^{-sL} v0|| + C ||v0|| int_0^s (s-tau)^{-1/2} ||grad v(tau)|| dtau`
/// along a run, and their running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCertificate {
    pub times: Vec<f64>,
    /// `||v(s)||_2`.
    pub norm: Vec<f64>,
    /// `||e^{-sL} v0||_2`.
    pub linear: Vec<f64>,
    /// `C ||v0|| int_0^s (s - tau)^{-1/2} ||grad v(tau)|| dtau`.
    pub memory: Vec<f64>,
    pub constant: f64,
    /// Running average of `||v(s)||_2`.
    pub cesaro_norm: Vec<f64>,
    /// Running average of the right-hand side.
    pub cesaro_rhs: Vec<f64>,
}

impl DecayCertificate {
    /// Whether the right-hand side dominates `||v(s)||` at every sample.
    pub fn dominated(&self) -> bool {
        self.norm
            .iter()
            .zip(self.linear.iter().zip(&self.memory))
            .all(|(n, (l, m))| *n <= (l + m) * (1.0 + 1e-10) + 1e-300)
    }

    /// Cesaro average of `||v||` at the horizon over its value at a tenth of it.
    pub fn decay_ratio(&self) -> f64 {
        let t_end = *self.times.last().expect("non-empty");
        let k = self.times.partition_point(|&t| t < 0.1 * t_end - 1e-12).min(self.times.len() - 1);
        let (early, late) = (self.cesaro_norm[k], *self.cesaro_norm.last().unwrap());
        if early == 0.0 {
            0.0
        } else {
            late / early
        }
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            "duhamel-decay-chain",
            &["t", "norm", "linear", "memory", "cesaro_norm", "cesaro_rhs"],
        );
        for k in 0..self.times.len() {
            t.push_floats(&[
                self.times[k],
                self.norm[k],
                self.linear[k],
                self.memory[k],
                self.cesaro_norm[k],
                self.cesaro_rhs[k],
            ]);
        }
        t
    }
}

/// Assembles the decay chain for a run, given `||e^{-sL} v0||` at the trace
/// times and the constant `C` of the nonlinear smoothing estimate.
pub fn decay_certificate(trace: &EnergyTrace, linear: &[f64], constant: f64) -> Result<DecayCertificate> {
    let n = trace.times.len();
    if trace.grad_energy.len() != n {
        return Err(invalid("trace has no gradient channel (||grad v|| per sample)"));
    }
    if linear.len() != n {
        return Err(invalid("linear semigroup norms must match the trace times"));
    }
    if !(constant >= 0.0) {
        return Err(invalid(format!("constant must be non-negative, got {constant}")));
    }
    let norm: Vec<f64> = trace.energy.iter().map(|e| e.max(0.0).sqrt()).collect();
    let grad: Vec<f64> = trace.grad_energy.iter().map(|e| e.max(0.0).sqrt()).collect();
    let v0 = norm[0];
    let (times, values) = (trace.times.clone(), grad);
    let memory: Vec<f64> = if n < 2 {
        vec![0.0; n]
    } else {
        trace
            .times
            .par_iter()
            .map(|&s| constant * v0 * linear_moments(&times, &values, s, Moment::InvSqrt))
            .collect()
    };
    let rhs: Vec<f64> = linear.iter().zip(&memory).map(|(a, b)| a + b).collect();
    let cesaro_norm = cesaro_average(&trace.times, &norm)?;
    let cesaro_rhs = cesaro_average(&trace.times, &rhs)?;
    Ok(DecayCertificate {
        times: trace.times.clone(),
        norm,
        linear: linear.to_vec(),
        memory,
        constant,
        cesaro_norm,
        cesaro_rhs,
    })
}

/// The decay chain of a computed run. `C` is measured on `n_pairs` sample
/// times of the trajectory: each `v(tau)` is paired against the later states
/// `v(s)` over the lag `s - tau`, and against `n_pairs` seeded random
/// directions over the same lags. The linear term uses `e^{-sL}` on the
/// trace time grid.
pub fn duhamel_certificate(
    sys: &GalerkinSystem,
    trace: &EnergyTrace,
    n_pairs: usize,
    seed: u64,
) -> Result<(DecayCertificate, NonlinearBound)> {
    let n = trace.times.len();
    if trace.states.len() != n || n < 2 {
        return Err(invalid("trace must carry at least two recorded states"));
    }
    let dt = trace.times[1] - trace.times[0];
    let uniform = trace.times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1.0));
    let sg = Semigroup::new(sys, Which::L)?;
    let orbit = if uniform {
        sg.orbit(&trace.states[0], dt, n - 1)?
    } else {
        trace.times.iter().map(|&t| sg.apply(&trace.states[0], t)).collect::<Result<Vec<_>>>()?
    };
    let linear: Vec<f64> = orbit.iter().map(|xi| sys.energy(xi).max(0.0).sqrt()).collect();
    let picks: Vec<usize> = if n_pairs < 2 {
        Vec::new()
    } else {
        let mut p: Vec<usize> = (0..n_pairs).map(|j| j * (n - 1) / (n_pairs - 1)).collect();
        p.dedup();
        p
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = sys.dim();
    let mut samples = Vec::new();
    for (a, &k) in picks.iter().enumerate() {
        for &j in &picks[a + 1..] {
            let lag = trace.times[j] - trace.times[k];
            samples.push((trace.states[k].clone(), trace.states[j].clone(), lag));
            let phi = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
            samples.push((trace.states[k].clone(), phi, lag));
        }
    }
    let bound = measure_nonlinear_bound(sys, &samples)?;
    let cert = decay_certificate(trace, &linear, bound.constant)?;
    Ok((cert, bound))
}
