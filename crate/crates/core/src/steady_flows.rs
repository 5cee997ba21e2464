//! Hamel's explicit steady solutions in the exterior of the unit disk,
//! their decay classification, and the weighted suprema used as sufficient
//! stability criteria.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{tensor_to_cartesian, Tensor2};
use crate::geometry::PolarGrid;

const TWO_PI: f64 = 2.0 * PI;

/// Flux `phi`, rotation `mu` and amplitude `amp` of a Hamel solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteadyFlowParams {
    pub phi: f64,
    pub mu: f64,
    pub amp: f64,
}

impl SteadyFlowParams {
    pub fn new(phi: f64, mu: f64, amp: f64) -> Self {
        Self { phi, mu, amp }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn flux_carrier(phi: f64) -> Self {
        Self::new(phi, 0.0, 0.0)
    }

    pub fn rotation(mu: f64) -> Self {
        Self::new(0.0, mu, 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.phi == 0.0 && self.mu == 0.0 && self.amp == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.mu.is_finite() && self.amp.is_finite()
    }

    fn special_flux(&self) -> bool {
        (self.phi + 2.0 * TWO_PI).abs() <= 1e-12 * 2.0 * TWO_PI
    }

    /// Exponent of `gamma(r) = r^{1 + phi/2pi}` (ignored at the special flux).
    pub fn gamma_exponent(&self) -> f64 {
        1.0 + self.phi / TWO_PI
    }

    /// `gamma(r)` and `gamma'(r)`.
    pub fn gamma(&self, r: f64) -> (f64, f64) {
        if self.special_flux() {
            let l = r.ln();
            (l / r, (1.0 - l) / (r * r))
        } else {
            let e = self.gamma_exponent();
            let g = r.powf(e);
            (g, e * g / r)
        }
    }
}

/// Decay class at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayClass {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for DecayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DecayClass::Subcritical => "subcritical",
            DecayClass::Critical => "critical",
            DecayClass::Supercritical => "supercritical",
        };
        f.write_str(s)
    }
}

/// Asymptotic bound `|u| <~ r^exponent (log r)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    Zero,
    Power { exponent: f64, log_power: f64 },
}

impl Decay {
    /// Leading (slowest) of two decay laws.
    pub fn dominant(self, other: Decay) -> Decay {
        match (self, other) {
            (Decay::Zero, d) | (d, Decay::Zero) => d,
            (
                Decay::Power { exponent: e1, log_power: l1 },
                Decay::Power { exponent: e2, log_power: l2 },
            ) => {
                if e1 > e2 || (e1 == e2 && l1 >= l2) {
                    self
                } else {
                    other
                }
            }
        }
    }
}

/// A steady velocity field on `r >= 1`, in polar components.
pub trait SteadyField: Send + Sync + fmt::Debug {
    /// `(u_r, u_theta)`.
    fn velocity(&self, r: f64, theta: f64) -> [f64; 2];
    /// Velocity gradient in the polar frame, `G[i][j] = e_i . (grad u) e_j`.
    fn gradient(&self, r: f64, theta: f64) -> Tensor2;
    fn decay(&self) -> Decay;
}

/// The Hamel solution for given parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamelFlow(pub SteadyFlowParams);

impl SteadyField for HamelFlow {
    fn velocity(&self, r: f64, _theta: f64) -> [f64; 2] {
        let p = &self.0;
        let (g, _) = p.gamma(r);
        [p.phi / (TWO_PI * r), p.mu / (TWO_PI * r) + p.amp * g]
    }

    fn gradient(&self, r: f64, _theta: f64) -> Tensor2 {
        let p = &self.0;
        let (g, dg) = p.gamma(r);
        let ur = p.phi / (TWO_PI * r);
        let ut = p.mu / (TWO_PI * r) + p.amp * g;
        let dur = -ur / r;
        let dut = -p.mu / (TWO_PI * r * r) + p.amp * dg;
        [[dur, -ut / r], [dut, ur / r]]
    }

    fn decay(&self) -> Decay {
        let d = self.decay_without_flux();
        if self.0.phi != 0.0 {
            d.dominant(Decay::Power { exponent: -1.0, log_power: 0.0 })
        } else {
            d
        }
    }
}

/// The Hamel solution with its flux term removed: `(0, mu/(2pi r) + A gamma(r))`.
///
/// Splitting `u = u_flux + swirl` lets the flux part be bounded by its own
/// sharp constant while the swirl part goes through the weighted suprema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamelSwirl(pub SteadyFlowParams);

impl SteadyField for HamelSwirl {
    fn velocity(&self, r: f64, theta: f64) -> [f64; 2] {
        [0.0, HamelFlow(self.0).velocity(r, theta)[1]]
    }

    fn gradient(&self, r: f64, theta: f64) -> Tensor2 {
        let g = HamelFlow(self.0).gradient(r, theta);
        [[0.0, g[0][1]], [g[1][0], 0.0]]
    }

    fn decay(&self) -> Decay {
        HamelFlow(self.0).decay_without_flux()
    }
}

impl HamelFlow {
    fn decay_without_flux(&self) -> Decay {
        let p = &self.0;
        let mut d = Decay::Zero;
        if p.mu != 0.0 {
            d = d.dominant(Decay::Power { exponent: -1.0, log_power: 0.0 });
        }
        if p.amp != 0.0 {
            let a = if p.special_flux() {
                Decay::Power { exponent: -1.0, log_power: 1.0 }
            } else {
                Decay::Power { exponent: p.gamma_exponent(), log_power: 0.0 }
            };
            d = d.dominant(a);
        }
        d
    }
}

/// Synthetic radial field `amplitude * r^exponent e_r` (not solenoidal unless
/// `exponent = -1`); used to exercise the weighted suprema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawField {
    pub amplitude: f64,
    pub exponent: f64,
}

impl SteadyField for PowerLawField {
    fn velocity(&self, r: f64, _theta: f64) -> [f64; 2] {
        [self.amplitude * r.powf(self.exponent), 0.0]
    }

    fn gradient(&self, r: f64, _theta: f64) -> Tensor2 {
        let u = self.amplitude * r.powf(self.exponent);
        [[self.exponent * u / r, 0.0], [0.0, u / r]]
    }

    fn decay(&self) -> Decay {
        if self.amplitude == 0.0 {
            Decay::Zero
        } else {
            Decay::Power { exponent: self.exponent, log_power: 0.0 }
        }
    }
}

/// Polar components of the Hamel velocity.
pub fn hamel_velocity(p: &SteadyFlowParams, r: f64, theta: f64) -> [f64; 2] {
    HamelFlow(*p).velocity(r, theta)
}

/// Cartesian velocity gradient `d_j u_i` of the Hamel solution.
pub fn hamel_gradient(p: &SteadyFlowParams, r: f64, theta: f64) -> Tensor2 {
    tensor_to_cartesian(&HamelFlow(*p).gradient(r, theta), theta)
}

/// Decay classification of the Hamel solution: supercritical for `A != 0`
/// and `-4pi <= phi < -2pi`, subcritical only for the zero field, critical
/// otherwise.
pub fn classify_decay(p: &SteadyFlowParams) -> DecayClass {
    if p.is_zero() {
        return DecayClass::Subcritical;
    }
    let four_pi = 2.0 * TWO_PI;
    if p.amp != 0.0 && (p.phi >= -four_pi || p.special_flux()) && p.phi < -TWO_PI {
        DecayClass::Supercritical
    } else {
        DecayClass::Critical
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Weight {
    /// `|x|`
    Critical,
    /// `|x| log|x|`
    Subcritical,
}

impl Weight {
    fn at(self, r: f64) -> f64 {
        match self {
            Weight::Critical => r,
            Weight::Subcritical => r * r.ln(),
        }
    }

    fn log_power(self) -> f64 {
        match self {
            Weight::Critical => 0.0,
            Weight::Subcritical => 1.0,
        }
    }
}

/// `sup_{r >= 1} (|x| log|x| |u|)`; twice this value is the constant `delta`
/// of the logarithmic Hardy criterion.
pub fn weighted_sup_subcritical(u: &dyn SteadyField, grid: &PolarGrid) -> Result<f64> {
    weighted_sup(u, grid, Weight::Subcritical)
}

/// `sup_{r >= 1} (|x| |u|)`.
pub fn weighted_sup_critical(u: &dyn SteadyField, grid: &PolarGrid) -> Result<f64> {
    weighted_sup(u, grid, Weight::Critical)
}

fn ring_max(u: &dyn SteadyField, grid: &PolarGrid, weight: Weight, r: f64) -> f64 {
    let w = weight.at(r);
    (0..grid.n_theta())
        .map(|j| {
            let v = u.velocity(r, grid.theta(j));
            w * v[0].hypot(v[1])
        })
        .fold(0.0, f64::max)
}

fn weighted_sup(u: &dyn SteadyField, grid: &PolarGrid, weight: Weight) -> Result<f64> {
    let decay = u.decay();
    let r_out = grid.r_outer();

    // Tail bound from the analytic decay law.
    let tail = match decay {
        Decay::Zero => 0.0,
        Decay::Power { exponent, log_power } => {
            let a = 1.0 + exponent;
            let b = log_power + weight.log_power();
            if a > 0.0 || (a == 0.0 && b > 0.0) {
                return Err(Error::Divergent(format!(
                    "weighted field grows like r^{a} (log r)^{b}"
                )));
            }
            let l_out = r_out.ln();
            let amp_out = ring_max(u, grid, Weight::Critical, r_out) / r_out;
            let c = amp_out / (r_out.powf(exponent) * l_out.powf(log_power));
            let profile = |s: f64| c * weight_free(s, a, b);
            if a < 0.0 && b > 0.0 {
                let s_star = -b / a;
                profile(s_star.max(l_out))
            } else {
                profile(l_out)
            }
        }
    };

    // Grid maximum with a golden-section polish around the best ring.
    let rs = grid.r_nodes();
    let ring_vals: Vec<f64> = rs.iter().map(|&r| ring_max(u, grid, weight, r)).collect();
    let (best, &best_val) = ring_vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let lo = if best == 0 { grid.r_inner() } else { rs[best - 1] };
    let hi = if best + 1 == rs.len() { r_out } else { rs[best + 1] };
    let polished = golden_max(|r| ring_max(u, grid, weight, r), lo, hi, 200);
    let edge = ring_max(u, grid, weight, grid.r_inner()).max(ring_max(u, grid, weight, r_out));
    Ok(best_val.max(polished).max(edge).max(tail))
}

/// `exp(a s) s^b` at `s = log r`.
fn weight_free(s: f64, a: f64, b: f64) -> f64 {
    (a * s).exp() * if b == 0.0 { 1.0 } else { s.powf(b) }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * b.abs() {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_polar_grid, Stretch};
    use std::f64::consts::E;

    fn grid() -> PolarGrid {
        build_polar_grid(40.0, 128, 8, Stretch::Geometric).unwrap()
    }

    #[test]
    fn velocity_examples() {
        let v = hamel_velocity(&SteadyFlowParams::new(TWO_PI, 0.0, 0.0), 2.0, 0.3);
        assert!((v[0] - 0.5).abs() < 1e-15 && v[1] == 0.0);
        let v = hamel_velocity(&SteadyFlowParams::new(-2.0 * TWO_PI, 0.0, 1.0), E, 1.0);
        assert!((v[0] + 2.0 / E).abs() < 1e-15);
        assert!((v[1] - 1.0 / E).abs() < 1e-15);
        let v = hamel_velocity(&SteadyFlowParams::new(0.0, TWO_PI, 0.0), 4.0, 0.0);
        assert!(v[0] == 0.0 && (v[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradient_zero_and_trace_free() {
        let z = hamel_gradient(&SteadyFlowParams::zero(), 2.0, 1.0);
        assert_eq!(z, [[0.0; 2]; 2]);
        for &(r, t) in &[(1.0, 0.0), (1.7, 2.0), (9.0, 4.4)] {
            let g = hamel_gradient(&SteadyFlowParams::new(TWO_PI, 0.0, 0.0), r, t);
            assert!((g[0][0] + g[1][1]).abs() < 1e-15);
            let g = hamel_gradient(&SteadyFlowParams::new(-1.3, 2.2, 0.7), r, t);
            assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        }
    }

    fn cartesian_velocity(p: &SteadyFlowParams, x: f64, y: f64) -> [f64; 2] {
        let r = x.hypot(y);
        let t = y.atan2(x);
        crate::frame::vector_to_cartesian(hamel_velocity(p, r, t), t)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let h = 1e-5;
        for p in [
            SteadyFlowParams::new(1.3, -0.4, 0.8),
            SteadyFlowParams::new(-2.0 * TWO_PI, 1.0, 1.0),
            SteadyFlowParams::new(-3.0 * PI, 0.2, -0.5),
        ] {
            for t in [0.2, 1.9, 4.0] {
                let (x, y) = (3.0 * f64::cos(t), 3.0 * f64::sin(t));
                let g = hamel_gradient(&p, 3.0, t);
                let dx = {
                    let a = cartesian_velocity(&p, x + h, y);
                    let b = cartesian_velocity(&p, x - h, y);
                    [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
                };
                let dy = {
                    let a = cartesian_velocity(&p, x, y + h);
                    let b = cartesian_velocity(&p, x, y - h);
                    [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
                };
                for i in 0..2 {
                    assert!((g[i][0] - dx[i]).abs() < 1e-8, "{p:?}");
                    assert!((g[i][1] - dy[i]).abs() < 1e-8, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn analytic_divergence_vanishes() {
        // (1/r) d_r (r u_r) + (1/r) d_theta u_theta; u_theta is theta-independent.
        for p in [SteadyFlowParams::new(2.0, 3.0, 0.0), SteadyFlowParams::new(-5.0, 1.0, 2.0)] {
            for r in [1.0, 2.5, 100.0] {
                let g = HamelFlow(p).gradient(r, 0.0);
                let v = hamel_velocity(&p, r, 0.0);
                let div = g[0][0] + v[0] / r;
                assert!(div.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classification_examples_and_truth_table() {
        assert_eq!(classify_decay(&SteadyFlowParams::new(-3.0 * PI, 0.0, 1.0)), DecayClass::Supercritical);
        assert_eq!(classify_decay(&SteadyFlowParams::new(PI, 1.0, 0.0)), DecayClass::Critical);
        assert_eq!(classify_decay(&SteadyFlowParams::zero()), DecayClass::Subcritical);
        let table = [
            (-2.0 * TWO_PI, 0.0, DecayClass::Critical),
            (-2.0 * TWO_PI, 1.0, DecayClass::Supercritical),
            (-TWO_PI, 0.0, DecayClass::Critical),
            (-TWO_PI, 1.0, DecayClass::Critical),
            (0.0, 0.0, DecayClass::Subcritical),
            (0.0, 1.0, DecayClass::Critical),
            (TWO_PI, 0.0, DecayClass::Critical),
            (TWO_PI, 1.0, DecayClass::Critical),
        ];
        for (phi, amp, expected) in table {
            for mu in [0.0, 0.7, -0.7] {
                if phi == 0.0 && amp == 0.0 && mu != 0.0 {
                    assert_eq!(classify_decay(&SteadyFlowParams::new(phi, mu, amp)), DecayClass::Critical);
                    continue;
                }
                assert_eq!(classify_decay(&SteadyFlowParams::new(phi, mu, amp)), expected, "{phi} {mu} {amp}");
            }
        }
    }

    #[test]
    fn weighted_sup_examples() {
        let g = grid();
        let flux = HamelFlow(SteadyFlowParams::flux_carrier(1.7));
        assert!(matches!(weighted_sup_subcritical(&flux, &g), Err(Error::Divergent(_))));
        let zero = HamelFlow(SteadyFlowParams::zero());
        assert_eq!(weighted_sup_subcritical(&zero, &g).unwrap(), 0.0);
        assert_eq!(weighted_sup_critical(&zero, &g).unwrap(), 0.0);
        let synth = PowerLawField { amplitude: 1.0, exponent: -2.0 };
        let s = weighted_sup_subcritical(&synth, &g).unwrap();
        assert!((s - 1.0 / E).abs() < 1e-12, "{s}");
        let grow = HamelFlow(SteadyFlowParams::new(TWO_PI, 0.0, 1.0));
        assert!(matches!(weighted_sup_critical(&grow, &g), Err(Error::Divergent(_))));
    }

    #[test]
    fn weighted_sup_critical_of_harmonic_part() {
        let g = grid();
        for (phi, mu) in [(1.0, 0.0), (0.0, -2.0), (3.0, 4.0), (-PI, 0.5)] {
            let s = weighted_sup_critical(&HamelFlow(SteadyFlowParams::new(phi, mu, 0.0)), &g).unwrap();
            let exact = f64::hypot(phi, mu) / TWO_PI;
            assert!((s - exact).abs() < 1e-12 * exact.max(1.0));
        }
    }

    #[test]
    fn subcritical_tail_peak_beyond_grid() {
        // r^{-2} log r weighted by r: peak of log(r)/r at e lies inside; with
        // exponent -1.1 the peak of r^{-0.1} log r sits at r = e^{10}, beyond the grid.
        let g = grid();
        let f = PowerLawField { amplitude: 1.0, exponent: -2.1 };
        let s = weighted_sup_subcritical(&f, &g).unwrap();
        let exact = (-1.0_f64).exp() / 1.1;
        assert!((s - exact).abs() < 1e-10, "{s} vs {exact}");
        let f = PowerLawField { amplitude: 1.0, exponent: -1.1 };
        let s = weighted_sup_subcritical(&f, &g).unwrap();
        let exact = 10.0 * (-1.0_f64).exp();
        assert!((s - exact).abs() < 1e-9 * exact, "{s} vs {exact}");
    }
}
