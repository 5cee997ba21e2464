//! Stream functions: the single source of divergence-free test fields.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::frame::Tensor2;
use crate::geometry::{gauss_legendre, legendre_jet, PolarGrid};

/// Value and derivatives of a stream function in `(r, theta)` up to order two.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarJet {
    pub psi: f64,
    pub dr: f64,
    pub dt: f64,
    pub drr: f64,
    pub drt: f64,
    pub dtt: f64,
}

impl std::ops::Add for PolarJet {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            psi: self.psi + o.psi,
            dr: self.dr + o.dr,
            dt: self.dt + o.dt,
            drr: self.drr + o.drr,
            drt: self.drt + o.drt,
            dtt: self.dtt + o.dtt,
        }
    }
}

impl PolarJet {
    pub fn scaled(self, c: f64) -> Self {
        Self {
            psi: c * self.psi,
            dr: c * self.dr,
            dt: c * self.dt,
            drr: c * self.drr,
            drt: c * self.drt,
            dtt: c * self.dtt,
        }
    }

    /// `v = (psi_theta / r, -psi_r)` in polar components.
    pub fn velocity(&self, r: f64) -> [f64; 2] {
        [self.dt / r, -self.dr]
    }

    /// Hessian of `psi` in the orthonormal polar frame: `(H_rr, H_rt, H_tt)`.
    pub fn hessian(&self, r: f64) -> (f64, f64, f64) {
        let hrr = self.drr;
        let hrt = self.drt / r - self.dt / (r * r);
        let htt = self.dr / r + self.dtt / (r * r);
        (hrr, hrt, htt)
    }

    /// Velocity gradient in the polar frame. With `v = J grad psi`,
    /// `grad v = J Hess psi`.
    pub fn velocity_gradient(&self, r: f64) -> Tensor2 {
        let (hrr, hrt, htt) = self.hessian(r);
        [[hrt, htt], [-hrr, -hrt]]
    }
}

/// Where the induced velocity lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Support {
    /// Velocity vanishes outside `[inner, outer]`.
    Compact { inner: f64, outer: f64 },
    /// Velocity decays like `r^velocity_exponent` at infinity.
    Unbounded { velocity_exponent: f64 },
}

/// A stream function with closed-form derivatives.
pub trait StreamFunction: Send + Sync + fmt::Debug {
    fn jet(&self, r: f64, theta: f64) -> PolarJet;
    fn support(&self) -> Support;
}

/// A stream function either in closed form or sampled on a grid.
#[derive(Debug, Clone)]
pub enum StreamField {
    Analytic(Arc<dyn StreamFunction>),
    Sampled(SampledStream),
}

impl StreamField {
    pub fn analytic<S: StreamFunction + 'static>(s: S) -> Self {
        StreamField::Analytic(Arc::new(s))
    }

    pub fn support(&self) -> Support {
        match self {
            StreamField::Analytic(s) => s.support(),
            StreamField::Sampled(s) => s.support,
        }
    }

    /// Closed-form evaluator, if any.
    pub fn as_function(&self) -> Option<&Arc<dyn StreamFunction>> {
        match self {
            StreamField::Analytic(s) => Some(s),
            StreamField::Sampled(_) => None,
        }
    }
}

/// Stream-function samples at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledStream {
    pub grid: Arc<PolarGrid>,
    pub values: Vec<f64>,
    pub support: Support,
}

impl SampledStream {
    pub fn new(grid: Arc<PolarGrid>, values: Vec<f64>, support: Support) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, support })
    }

    pub fn from_function(f: &dyn StreamFunction, grid: Arc<PolarGrid>) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (r, t) = grid.node(k);
                f.jet(r, t).psi
            })
            .collect();
        Self { grid, values, support: f.support() }
    }
}

impl From<SampledStream> for StreamField {
    fn from(s: SampledStream) -> Self {
        StreamField::Sampled(s)
    }
}

/// `psi = log r`, velocity `(0, -1/r)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogRadius;

impl StreamFunction for LogRadius {
    fn jet(&self, r: f64, _theta: f64) -> PolarJet {
        PolarJet { psi: r.ln(), dr: 1.0 / r, drr: -1.0 / (r * r), ..PolarJet::default() }
    }

    fn support(&self) -> Support {
        Support::Unbounded { velocity_exponent: -1.0 }
    }
}

/// `psi = r sin(theta)`, the uniform flow `e_x`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UniformFlow;

impl StreamFunction for UniformFlow {
    fn jet(&self, r: f64, theta: f64) -> PolarJet {
        let (s, c) = theta.sin_cos();
        PolarJet { psi: r * s, dr: s, dt: r * c, drr: 0.0, drt: c, dtt: -r * s }
    }

    fn support(&self) -> Support {
        Support::Unbounded { velocity_exponent: 0.0 }
    }
}

/// `psi'(r, theta) = amplitude * psi(lambda r, theta)`.
///
/// With `amplitude = 1` the velocity is `lambda v(lambda x)`; with
/// `amplitude = 1/lambda` it is the pure dilation `v(lambda x)`.
#[derive(Debug, Clone)]
pub struct Rescaled {
    inner: Arc<dyn StreamFunction>,
    lambda: f64,
    amplitude: f64,
}

impl Rescaled {
    pub fn new<S: StreamFunction + 'static>(inner: S, lambda: f64, amplitude: f64) -> Self {
        Self { inner: Arc::new(inner), lambda, amplitude }
    }

    pub fn from_arc(inner: Arc<dyn StreamFunction>, lambda: f64, amplitude: f64) -> Self {
        Self { inner, lambda, amplitude }
    }
}

impl StreamFunction for Rescaled {
    fn jet(&self, r: f64, theta: f64) -> PolarJet {
        let l = self.lambda;
        let j = self.inner.jet(l * r, theta);
        PolarJet {
            psi: j.psi,
            dr: l * j.dr,
            dt: j.dt,
            drr: l * l * j.drr,
            drt: l * j.drt,
            dtt: j.dtt,
        }
        .scaled(self.amplitude)
    }

    fn support(&self) -> Support {
        match self.inner.support() {
            Support::Compact { inner, outer } => Support::Compact {
                inner: inner / self.lambda,
                outer: outer / self.lambda,
            },
            s => s,
        }
    }
}

/// Even part `(psi(x) + psi(-x)) / 2`, whose velocity is the odd part of `v`.
#[derive(Debug, Clone)]
pub struct CentralProjected(pub Arc<dyn StreamFunction>);

impl StreamFunction for CentralProjected {
    fn jet(&self, r: f64, theta: f64) -> PolarJet {
        (self.0.jet(r, theta) + self.0.jet(r, theta + PI)).scaled(0.5)
    }

    fn support(&self) -> Support {
        self.0.support()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

/// Radial profile family of a stream mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// `psi = rho^2 (1-rho)^2 P_n(2 rho - 1)`: value and slope vanish at both ends.
    Clamped,
    /// Axisymmetric swirl with `v_theta = rho (1-rho) P_n(2 rho - 1)`; the
    /// stream function may take different constants on the two sides.
    Swirl,
}

/// One Fourier-in-angle, Legendre-in-radius stream mode on `[inner, outer]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamMode {
    pub m: u32,
    pub phase: Phase,
    pub degree: usize,
    pub shape: Shape,
    pub inner: f64,
    pub outer: f64,
    pub coef: f64,
}

impl StreamMode {
    pub fn clamped(m: u32, phase: Phase, degree: usize, inner: f64, outer: f64) -> Self {
        Self { m, phase, degree, shape: Shape::Clamped, inner, outer, coef: 1.0 }
    }

    pub fn swirl(degree: usize, inner: f64, outer: f64) -> Self {
        Self { m: 0, phase: Phase::Cos, degree, shape: Shape::Swirl, inner, outer, coef: 1.0 }
    }

    pub fn with_coef(mut self, coef: f64) -> Self {
        self.coef = coef;
        self
    }

    /// `(c, c', c'')` of the angular factor.
    fn angular(&self, theta: f64) -> (f64, f64, f64) {
        let m = self.m as f64;
        let (s, c) = (m * theta).sin_cos();
        match self.phase {
            Phase::Cos => (c, -m * s, -m * m * c),
            Phase::Sin => (s, m * c, -m * m * s),
        }
    }

    /// `(g, g', g'')` of the radial factor, derivatives in `r`.
    pub fn radial(&self, r: f64) -> (f64, f64, f64) {
        let h = self.outer - self.inner;
        let rho = (r - self.inner) / h;
        match self.shape {
            Shape::Clamped => {
                if !(0.0..=1.0).contains(&rho) {
                    return (0.0, 0.0, 0.0);
                }
                let (p, dp, ddp) = legendre_jet(self.degree, 2.0 * rho - 1.0);
                let (p, dp, ddp) = (p, 2.0 * dp, 4.0 * ddp);
                let u = rho * (1.0 - rho);
                let du = 1.0 - 2.0 * rho;
                let w = u * u;
                let dw = 2.0 * u * du;
                let ddw = 2.0 * (du * du - 2.0 * u);
                let g = w * p;
                let dg = dw * p + w * dp;
                let ddg = ddw * p + 2.0 * dw * dp + w * ddp;
                (g, dg / h, ddg / (h * h))
            }
            Shape::Swirl => {
                if rho <= 0.0 {
                    return (0.0, 0.0, 0.0);
                }
                let rho_c = rho.min(1.0);
                let psi = -h * self.swirl_antiderivative(rho_c);
                if rho >= 1.0 {
                    return (psi, 0.0, 0.0);
                }
                let (p, dp, _) = legendre_jet(self.degree, 2.0 * rho - 1.0);
                let u = rho * (1.0 - rho);
                let q = u * p;
                let dq = (1.0 - 2.0 * rho) * p + u * 2.0 * dp;
                (psi, -q, -dq / h)
            }
        }
    }

    /// `int_0^rho s (1-s) P_n(2s-1) ds`, exact by Gauss-Legendre.
    fn swirl_antiderivative(&self, rho: f64) -> f64 {
        let (x, w) = gauss_legendre(self.degree / 2 + 3);
        let half = 0.5 * rho;
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let s = half * (xi + 1.0);
                wi * half * s * (1.0 - s) * legendre_jet(self.degree, 2.0 * s - 1.0).0
            })
            .sum()
    }

    pub fn jet(&self, r: f64, theta: f64) -> PolarJet {
        let (g, dg, ddg) = self.radial(r);
        if g == 0.0 && dg == 0.0 && ddg == 0.0 {
            return PolarJet::default();
        }
        let (c, dc, ddc) = self.angular(theta);
        PolarJet { psi: g * c, dr: dg * c, dt: g * dc, drr: ddg * c, drt: dg * dc, dtt: g * ddc }
            .scaled(self.coef)
    }
}

/// Finite sum of stream modes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModalStream {
    pub modes: Vec<StreamMode>,
}

impl ModalStream {
    pub fn new(modes: Vec<StreamMode>) -> Self {
        Self { modes }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Random band-limited field supported in `[inner, outer]`.
    ///
    /// Uses swirl modes for `m = 0` and clamped modes in both phases for
    /// `1 <= m <= max_m` (only even orders when `symmetric`, which makes the
    /// velocity odd under `x -> -x`), Legendre degrees `0..=max_degree`, with coefficients
    /// uniform in `[-1, 1]` damped by `1 / (1 + m + n)`.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        inner: f64,
        outer: f64,
        max_m: u32,
        max_degree: usize,
        symmetric: bool,
    ) -> Self {
        let mut modes = Vec::new();
        for m in 0..=max_m {
            if symmetric && m % 2 == 1 {
                continue;
            }
            for n in 0..=max_degree {
                let damp = 1.0 / (1.0 + m as f64 + n as f64);
                if m == 0 {
                    let c = rng.random_range(-1.0..=1.0) * damp;
                    modes.push(StreamMode::swirl(n, inner, outer).with_coef(c));
                } else {
                    for phase in [Phase::Cos, Phase::Sin] {
                        let c = rng.random_range(-1.0..=1.0) * damp;
                        modes.push(StreamMode::clamped(m, phase, n, inner, outer).with_coef(c));
                    }
                }
            }
        }
        Self { modes }
    }

    /// Keeps the even angular orders: the centrally symmetric part.
    pub fn central_part(&self) -> Self {
        Self { modes: self.modes.iter().copied().filter(|m| m.m % 2 == 0).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.coef == 0.0)
    }
}

impl StreamFunction for ModalStream {
    fn jet(&self, r: f64, theta: f64) -> PolarJet {
        self.modes.iter().fold(PolarJet::default(), |acc, m| acc + m.jet(r, theta))
    }

    fn support(&self) -> Support {
        if self.modes.is_empty() {
            return Support::Compact { inner: 1.0, outer: 1.0 };
        }
        let inner = self.modes.iter().map(|m| m.inner).fold(f64::INFINITY, f64::min);
        let outer = self.modes.iter().map(|m| m.outer).fold(f64::NEG_INFINITY, f64::max);
        Support::Compact { inner, outer }
    }
}
