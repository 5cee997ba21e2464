//! The rotating-flow counterexample: the spiral stream functions
//! `psi_alpha = r^{cos a} cos(theta - sin a log r)`, their double-log
//! truncation, and the scan showing that the stability quotient against
//! `u_{0,mu,0}` is unbounded as `a -> 0`.
//!
//! Everything is computed in the logarithmic radius `s = log r`. The cutoff
//! radius `K = exp(log(k)^2)` overflows for small `alpha`, while `s` never does.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::frame::{advect_dot, frobenius_sq};
use crate::functionals::{
    stream_to_velocity, PolarJet, StreamField, StreamFunction, Support, VelocityFieldPolar, Witness,
};
use crate::geometry::{adaptive_integral_with_breaks, improper_radial_integral, PolarGrid};
use crate::io::CsvTable;

/// Inner collar: the truncated field vanishes for `r <= COLLAR_INNER` and the
/// inner cutoff reaches 1 at `COLLAR_OUTER`.
pub const COLLAR_INNER: f64 = 1.2;
pub const COLLAR_OUTER: f64 = 2.0;

/// Default scan set.
pub const DEFAULT_ALPHAS: [f64; 8] = [0.8, 0.4, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005];

const QUAD_TOL: f64 = 1e-13;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5 * PI) {
        return Err(invalid(format!("alpha must lie in (0, pi/2], got {alpha}")));
    }
    Ok(())
}

/// `1 - cos(alpha)` without cancellation.
fn one_minus_cos(alpha: f64) -> f64 {
    2.0 * (0.5 * alpha).sin().powi(2)
}

pub fn psi_alpha(alpha: f64, r: f64, theta: f64) -> f64 {
    r.powf(alpha.cos()) * (theta - alpha.sin() * r.ln()).cos()
}

/// `psi_alpha` as a closed-form stream function on `r >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStream {
    pub alpha: f64,
}

impl StreamFunction for AlphaStream {
    fn jet(&self, r: f64, theta: f64) -> PolarJet {
        let (c, s) = (self.alpha.cos(), self.alpha.sin());
        let phi = theta - s * r.ln();
        let (sp, cp) = phi.sin_cos();
        let rc = r.powf(c);
        // d/dr of cos(phi) is (s/r) sin(phi); of sin(phi) is -(s/r) cos(phi).
        let dr = rc / r * (c * cp + s * sp);
        let drr = rc / (r * r) * ((c * (c - 1.0) - s * s) * cp + (2.0 * c - 1.0) * s * sp);
        PolarJet {
            psi: rc * cp,
            dr,
            dt: -rc * sp,
            drr,
            drt: rc / r * (-c * sp + s * cp),
            dtt: -rc * cp,
        }
    }

    fn support(&self) -> Support {
        Support::Unbounded { velocity_exponent: self.alpha.cos() - 1.0 }
    }
}

/// Coefficients `(A, B)` of `A cos(phi) + B sin(phi)`, `phi = theta - sin(a) s`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Trig(f64, f64);

impl Trig {
    fn add(self, o: Trig) -> Trig {
        Trig(self.0 + o.0, self.1 + o.1)
    }
    fn sub(self, o: Trig) -> Trig {
        Trig(self.0 - o.0, self.1 - o.1)
    }
    /// `(1/pi) int_0^{2pi} self * o dtheta`.
    fn dot(self, o: Trig) -> f64 {
        self.0 * o.0 + self.1 * o.1
    }
}

/// Radial cutoff in `s`: value and first two `s`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RadialJet {
    e0: f64,
    e1: f64,
    e2: f64,
}

const PLATEAU: RadialJet = RadialJet { e0: 1.0, e1: 0.0, e2: 0.0 };

/// Angular averages, divided by `pi`, of `|grad v|^2` and of
/// `(v . grad v) . e_theta / r` for `v = curl(E(s) psi_alpha)`, with the
/// common factor `exp((2c - 2) s)` removed. The area element `r dr dtheta`
/// is included.
fn scaled_densities(alpha: f64, e: RadialJet) -> (f64, f64) {
    let (c, s) = (alpha.cos(), alpha.sin());
    let RadialJet { e0, e1, e2 } = e;
    let p_s = Trig(e1 + e0 * c, e0 * s);
    let p_t = Trig(0.0, -e0);
    let p_tt = Trig(-e0, 0.0);
    let p_st = Trig(e0 * s, -e1 - e0 * c);
    let p_ss = Trig(e2 + 2.0 * e1 * c + e0 * (c * c - s * s), 2.0 * s * (e1 + e0 * c));
    let h_rr = p_ss.sub(p_s);
    let h_rt = p_st.sub(p_t);
    let h_tt = p_s.add(p_tt);
    let (w_r, w_t) = (p_t, Trig(-p_s.0, -p_s.1));
    let grad = h_rr.dot(h_rr) + 2.0 * h_rt.dot(h_rt) + h_tt.dot(h_tt);
    // (v . grad v)_theta = -(H_rr v_r + H_rt v_theta)
    let pair = -(h_rr.dot(w_r) + h_rt.dot(w_t));
    (grad, pair)
}

/// Pointwise `|grad u_alpha|^2` of the untruncated field.
pub fn grad_energy_density(alpha: f64, r: f64, theta: f64) -> f64 {
    let (c, s) = (alpha.cos(), alpha.sin());
    let phi = theta - s * r.ln();
    let (sp, cp) = phi.sin_cos();
    let at = |t: Trig| t.0 * cp + t.1 * sp;
    let h_rr = Trig((2.0 * c + 1.0) * (c - 1.0), s * (2.0 * c - 1.0));
    let h_rt = Trig(s, 1.0 - c);
    let h_tt = Trig(c - 1.0, s);
    r.powf(2.0 * c - 4.0) * (at(h_rr).powi(2) + 2.0 * at(h_rt).powi(2) + at(h_tt).powi(2))
}

/// Angular integral of a node function by the 8-point trapezoid rule, which
/// is exact for the degree-2 trigonometric integrands arising here.
fn angular_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
    let n = 8;
    let h = 2.0 * PI / n as f64;
    (0..n).map(|j| f(j as f64 * h)).sum::<f64>() * h
}

/// `int_{r >= 1} |grad u_alpha|^2`, by quadrature of the closed-form
/// gradient of `psi_alpha` over `[1, inf)`.
pub fn grad_energy_ualpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let psi = AlphaStream { alpha };
    let f = |r: f64| {
        r * angular_integral(|t| frobenius_sq(&psi.jet(r, t).velocity_gradient(r)))
    };
    Ok(improper_radial_integral(f, 1.0, 2.0 * alpha.cos() - 3.0)?.value)
}

/// `int_{r >= 1} (u_alpha . grad u_alpha) . u_{0,mu,0}`.
pub fn pairing_ualpha(alpha: f64, mu: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if mu == 0.0 {
        return Ok(0.0);
    }
    let psi = AlphaStream { alpha };
    let f = |r: f64| {
        let ubar = [0.0, mu / (2.0 * PI * r)];
        r * angular_integral(|t| {
            let j = psi.jet(r, t);
            let v = j.velocity(r);
            advect_dot(v, &j.velocity_gradient(r), ubar)
        })
    };
    Ok(improper_radial_integral(f, 1.0, 2.0 * alpha.cos() - 3.0)?.value)
}

/// `pi sin(2 alpha) / (2 - 2 cos(alpha))`.
pub fn pairing_closed_form(alpha: f64) -> f64 {
    PI * (2.0 * alpha).sin() / (2.0 * one_minus_cos(alpha))
}

/// `log k_alpha = log 2 / (2 (1 - cos alpha))`.
pub fn log_k_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(std::f64::consts::LN_2 / (2.0 * one_minus_cos(alpha)))
}

/// Threshold radius `k_alpha = 2^{1 / (2 (1 - cos alpha))}`.
pub fn k_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(2f64.powf(1.0 / (2.0 * one_minus_cos(alpha))))
}

/// C^2 monotone step on `[0, 1]`: the integral of the quadratic B-spline with
/// knots `0, 1/3, 2/3, 1`. Returns `(S, S', S'')`.
pub fn smooth_step(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    // unit-spacing spline on [0, 3], rescaled by h = 1/3
    let y = 3.0 * x;
    let (b_int, b, db) = if y < 1.0 {
        (y * y * y / 6.0, 0.5 * y * y, y)
    } else if y < 2.0 {
        (
            1.0 / 6.0 + (-y * y * y / 3.0 + 1.5 * y * y - 1.5 * y + 1.0 / 3.0),
            0.5 * (-2.0 * y * y + 6.0 * y - 3.0),
            -2.0 * y + 3.0,
        )
    } else {
        let z = 3.0 - y;
        (1.0 - z * z * z / 6.0, 0.5 * z * z, -z)
    };
    (b_int, 3.0 * b, 9.0 * db)
}

/// Outer profile: 1 for `w <= 1`, 0 for `w >= 2`.
fn eta_profile(w: f64) -> (f64, f64, f64) {
    let (s, ds, dds) = smooth_step(w - 1.0);
    (1.0 - s, -ds, -dds)
}

/// Inner profile: 0 for `r <= 1.2`, 1 for `r >= 2`.
fn chi_profile(r: f64) -> (f64, f64, f64) {
    let h = COLLAR_OUTER - COLLAR_INNER;
    let (s, ds, dds) = smooth_step((r - COLLAR_INNER) / h);
    (s, ds / h, dds / (h * h))
}

/// Radii where the inner profile changes polynomial piece.
pub fn collar_knots() -> [f64; 4] {
    let h = COLLAR_OUTER - COLLAR_INNER;
    [COLLAR_INNER, COLLAR_INNER + h / 3.0, COLLAR_INNER + 2.0 * h / 3.0, COLLAR_OUTER]
}

/// `eta_k` in the variable `s = log r`, for a cutoff with `log k = log_k`.
fn cutoff_in_s(log_k: f64, s: f64) -> RadialJet {
    let lambda = log_k.ln();
    if s < COLLAR_OUTER.ln() {
        let r = s.exp();
        let (x, dx, ddx) = chi_profile(r);
        return RadialJet { e0: x, e1: r * dx, e2: r * dx + r * r * ddx };
    }
    if s <= log_k {
        return PLATEAU;
    }
    let w = s.ln() / lambda;
    let (e, de, dde) = eta_profile(w);
    let ls = lambda * s;
    RadialJet { e0: e, e1: de / ls, e2: dde / (ls * ls) - de / (lambda * s * s) }
}

fn check_log_k(log_k: f64) -> Result<()> {
    if !(log_k > 1.0) || !log_k.is_finite() {
        return Err(invalid(format!(
            "cutoff scale too small: need k > e so that log log k > 0, got log k = {log_k}"
        )));
    }
    Ok(())
}

/// Value and radial derivatives of `eta_k(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffJet {
    pub value: f64,
    pub dr: f64,
    pub drr: f64,
}

/// `eta_k(x) = chi(x) eta(log log |x| / log log k)` and its radial derivatives.
pub fn cutoff_eta(k: f64, r: f64) -> Result<CutoffJet> {
    check_log_k(k.ln())?;
    if !(r >= 1.0) {
        return Err(invalid(format!("radius must be >= 1, got {r}")));
    }
    let s = r.ln();
    let e = cutoff_in_s(k.ln(), s);
    Ok(CutoffJet { value: e.e0, dr: e.e1 / r, drr: (e.e2 - e.e1) / (r * r) })
}

/// Measured `C_eta`: the supremum over the outer shell `k <= r <= K` of
/// `log log k (|grad eta_k| + |x| |grad^2 eta_k|) |x| log|x|`.
pub fn cutoff_constant_log(log_k: f64) -> Result<f64> {
    check_log_k(log_k)?;
    let lambda = log_k.ln();
    let n = 4000;
    let mut best = 0.0f64;
    for i in 0..=n {
        let w = 1.0 + i as f64 / n as f64;
        let s = (lambda * w).exp();
        let e = cutoff_in_s(log_k, s);
        // In s: |grad eta| r = |E_s|, r^2 |grad^2 eta| = |(E_ss - E_s, E_s)|.
        let first = e.e1.abs();
        let second = (e.e2 - e.e1).hypot(e.e1);
        best = best.max(lambda * (first + second) * s);
    }
    Ok(best)
}

pub fn cutoff_constant(k: f64) -> Result<f64> {
    cutoff_constant_log(k.ln())
}

/// Truncated counterexample field `u_{alpha,k} = curl(eta_k psi_alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaField {
    pub alpha: f64,
    pub log_k: f64,
    /// `log K = (log k)^2`.
    pub log_big_k: f64,
    pub c_eta: f64,
}

/// Integrals of one truncated field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaIntegrals {
    /// `||grad u_{alpha,k}||^2`
    pub grad_energy: f64,
    /// Pairing with `u_{0,2pi,0}` over `r < 2`.
    pub i1: f64,
    /// Pairing with `u_{0,2pi,0}` over `r >= 2`.
    pub i2: f64,
}

impl AlphaField {
    pub fn new(alpha: f64, log_k: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_log_k(log_k)?;
        Ok(Self { alpha, log_k, log_big_k: log_k * log_k, c_eta: cutoff_constant_log(log_k)? })
    }

    /// `k`, possibly infinite in floating point.
    pub fn k(&self) -> f64 {
        self.log_k.exp()
    }

    /// `K = exp(log(k)^2)`, possibly infinite in floating point.
    pub fn big_k(&self) -> f64 {
        self.log_big_k.exp()
    }

    /// Stream function of the truncated field, for sampling on grids.
    pub fn stream(&self) -> TruncatedAlpha {
        TruncatedAlpha { field: *self }
    }

    /// Samples the truncated field on a grid with its exact gradient.
    pub fn sample(&self, grid: &PolarGrid) -> Result<VelocityFieldPolar> {
        stream_to_velocity(&StreamField::analytic(self.stream()), grid)
    }

    fn weight(&self) -> f64 {
        2.0 * alpha_decay_rate(self.alpha)
    }

    /// Collar, plateau and shell contributions to `(grad energy, pairing)`.
    fn region_integrals(&self) -> Result<([f64; 3], [f64; 3])> {
        let a = self.alpha;
        let q = -self.weight();
        let dens = |s: f64| {
            let (g, p) = scaled_densities(a, cutoff_in_s(self.log_k, s));
            let e = (q * s).exp();
            (PI * e * g, PI * e * p)
        };
        // collar: s in [log 1.2, log 2]
        let collar = collar_knots().map(f64::ln);
        let s1 = collar[3];
        let collar_g = adaptive_integral_with_breaks(|s| dens(s).0, &collar, 0.0, QUAD_TOL)?.value;
        let collar_p = adaptive_integral_with_breaks(|s| dens(s).1, &collar, 0.0, QUAD_TOL)?.value;
        // plateau: constant densities times exp(q s), integrated exactly
        let (g0, p0) = scaled_densities(a, PLATEAU);
        let plateau_int = ((q * self.log_k).exp() - (q * s1).exp()) / q;
        let plateau = (PI * g0 * plateau_int, PI * p0 * plateau_int);
        // shell: s = exp(lambda w), w in [1, 2], ds = lambda s dw
        let lambda = self.log_k.ln();
        let in_w = |w: f64, pick: usize| {
            let s = (lambda * w).exp();
            let d = dens(s);
            lambda * s * if pick == 0 { d.0 } else { d.1 }
        };
        let breaks = [1.0, 4.0 / 3.0, 5.0 / 3.0, 2.0];
        let shell_g = adaptive_integral_with_breaks(|w| in_w(w, 0), &breaks, 0.0, QUAD_TOL)?.value;
        let shell_p = adaptive_integral_with_breaks(|w| in_w(w, 1), &breaks, 0.0, QUAD_TOL)?.value;
        Ok(([collar_g, plateau.0, shell_g], [collar_p, plateau.1, shell_p]))
    }

    pub fn integrals(&self) -> Result<AlphaIntegrals> {
        let (g, p) = self.region_integrals()?;
        Ok(AlphaIntegrals { grad_energy: g.iter().sum(), i1: p[0], i2: p[1] + p[2] })
    }

    /// `B(u_{alpha,k})` against `u_{0,mu,0}`; linear in `mu`.
    pub fn ratio(&self, mu: f64) -> Result<f64> {
        let ints = self.integrals()?;
        Ok(mu / (2.0 * PI) * (ints.i1 + ints.i2) / ints.grad_energy)
    }
}

/// `1 - cos(alpha)`, the decay rate of the densities in `s` (halved).
fn alpha_decay_rate(alpha: f64) -> f64 {
    one_minus_cos(alpha)
}

/// The truncated field at `k = k_alpha`.
pub fn build_valpha(alpha: f64) -> Result<AlphaField> {
    AlphaField::new(alpha, log_k_alpha(alpha)?)
}

/// Stream function `eta_k psi_alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedAlpha {
    field: AlphaField,
}

impl StreamFunction for TruncatedAlpha {
    fn jet(&self, r: f64, theta: f64) -> PolarJet {
        let s = r.ln();
        if r <= COLLAR_INNER || s >= self.field.log_big_k {
            return PolarJet::default();
        }
        let e = cutoff_in_s(self.field.log_k, s);
        let base = AlphaStream { alpha: self.field.alpha }.jet(r, theta);
        if e == PLATEAU {
            return base;
        }
        // eta depends on r only: product rule with eta_r, eta_rr
        let (er, err) = (e.e1 / r, (e.e2 - e.e1) / (r * r));
        PolarJet {
            psi: e.e0 * base.psi,
            dr: er * base.psi + e.e0 * base.dr,
            dt: e.e0 * base.dt,
            drr: err * base.psi + 2.0 * er * base.dr + e.e0 * base.drr,
            drt: er * base.dt + e.e0 * base.drt,
            dtt: e.e0 * base.dtt,
        }
    }

    fn support(&self) -> Support {
        Support::Compact { inner: COLLAR_INNER, outer: self.field.big_k() }
    }
}

/// One row of the ratio scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub alpha: f64,
    pub k_alpha: f64,
    /// `B(v_alpha)` against `u_{0,mu,0}`.
    pub b: f64,
    pub i1: f64,
    pub i2: f64,
    /// `||grad u_alpha||^2` of the untruncated field (should be `4 pi`).
    pub grad_energy: f64,
    /// `closed - |I1| - max(0, closed - I2)`, the measured form of the
    /// `closed - C1 - C2` bound.
    pub lower_bound: f64,
    /// Per-row failure, with the numeric fields set to NaN.
    pub error: Option<String>,
}

fn scan_row(alpha: f64, mu: f64) -> Result<ScanRow> {
    let field = build_valpha(alpha)?;
    let ints = field.integrals()?;
    let scale = mu / (2.0 * PI);
    let closed = scale * pairing_closed_form(alpha);
    let (i1, i2) = (scale * ints.i1, scale * ints.i2);
    Ok(ScanRow {
        alpha,
        k_alpha: k_alpha(alpha)?,
        b: (i1 + i2) / ints.grad_energy,
        i1,
        i2,
        grad_energy: grad_energy_ualpha(alpha)?,
        lower_bound: closed - i1.abs() - (closed - i2).max(0.0),
        error: None,
    })
}

/// `B(v_alpha)` and the bound terms for each `alpha`, against `u_{0,mu,0}`.
pub fn ratio_scan(alphas: &[f64], mu: f64) -> Result<Vec<ScanRow>> {
    if alphas.is_empty() {
        return Err(invalid("empty alpha list"));
    }
    for &a in alphas {
        check_alpha(a)?;
    }
    Ok(alphas
        .par_iter()
        .map(|&a| {
            scan_row(a, mu).unwrap_or_else(|e| ScanRow {
                alpha: a,
                k_alpha: f64::NAN,
                b: f64::NAN,
                i1: f64::NAN,
                i2: f64::NAN,
                grad_energy: f64::NAN,
                lower_bound: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect())
}

pub fn scan_table(rows: &[ScanRow]) -> CsvTable {
    let mut t = CsvTable::new(
        "rotating-counterexample ualpha-grad-energy ualpha-pairing",
        &["alpha", "k_alpha", "B", "I1", "I2", "grad_energy", "lower_bound"],
    );
    for r in rows {
        t.push_floats(&[r.alpha, r.k_alpha, r.b, r.i1, r.i2, r.grad_energy, r.lower_bound]);
    }
    t
}

/// Quotients of the truncated fields against `u_{0,mu,0}`, usable as
/// witnesses in the `delta*` search.
pub fn rotation_witnesses(mu: f64, alphas: &[f64]) -> Result<Vec<Witness>> {
    alphas
        .iter()
        .map(|&a| {
            let ratio = build_valpha(a)?.ratio(mu)?;
            Ok(Witness { label: format!("alpha={a}"), ratio })
        })
        .collect()
}
