//! One-dimensional quadrature: Gauss-Legendre rules, adaptive Gauss-Kronrod
//! integration, compensated summation and semi-infinite radial integrals.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Legendre polynomial P_n(x) with its first and second derivatives.
pub fn legendre_jet(n: usize, x: f64) -> (f64, f64, f64) {
    // Recurrences for P, P', P'' valid including the endpoints.
    let (mut p0, mut d0, mut s0) = (1.0, 0.0, 0.0);
    if n == 0 {
        return (p0, d0, s0);
    }
    let (mut p1, mut d1, mut s1) = (x, 1.0, 0.0);
    for k in 2..=n {
        let kf = k as f64;
        let a = (2.0 * kf - 1.0) / kf;
        let b = (kf - 1.0) / kf;
        let p2 = a * x * p1 - b * p0;
        let d2 = a * (p1 + x * d1) - b * d0;
        let s2 = a * (2.0 * d1 + x * s1) - b * s0;
        p0 = p1;
        d0 = d1;
        s0 = s1;
        p1 = p2;
        d1 = d2;
        s1 = s2;
    }
    (p1, d1, s1)
}

/// Fixed Gauss-Legendre rule on [a, b].
pub fn gauss_legendre_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = CompensatedSum::new();
    for (xi, wi) in x.iter().zip(&w) {
        acc.add(wi * f(mid + half * xi));
    }
    half * acc.value()
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss-Kronrod 7/15 panel: (kronrod value, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// Subdivides the panel with the largest error estimate until the summed
/// estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn adaptive_integral<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    adaptive_integral_with_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// Same as [`adaptive_integral`] with the initial panels split at `breaks`
/// (sorted, first and last are the integration limits).
pub fn adaptive_integral_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    const MAX_PANELS: usize = 20_000;
    if breaks.len() < 2 {
        return Ok(Integral { value: 0.0, abs_err: 0.0 });
    }
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, err) = gk15(&f, w[0], w[1]);
            heap.push(Panel { a: w[0], b: w[1], value, err });
        }
    }
    loop {
        let (total, err) = heap.iter().fold((CompensatedSum::new(), 0.0), |(mut s, e), p| {
            s.add(p.value);
            (s, e + p.err)
        });
        let total = total.value();
        if !total.is_finite() {
            return Err(Error::NonConvergent("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(Integral { value: total, abs_err: err });
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::NonConvergent(format!(
                "panel budget exhausted (value {total:e}, error {err:e})"
            )));
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Ok(Integral { value: total, abs_err: err });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
}

/// Integral of `f` over `[r0, inf)` for an integrand with power-law decay
/// `f(r) ~ c r^p`, `p = decay_exponent_hint`.
///
/// The half-line is cut into dyadic panels `[r0 2^k, r0 2^{k+1}]`, each
/// integrated adaptively; after every panel the remaining tail is closed
/// with the power-law antiderivative `-f(b) b / (p + 1)`, and the sequence of
/// tail-corrected totals is Aitken-extrapolated until it settles.
pub fn improper_radial_integral<F: Fn(f64) -> f64>(
    f: F,
    r0: f64,
    decay_exponent_hint: f64,
) -> Result<Integral> {
    const REL_TOL: f64 = 1e-13;
    const MAX_DYADIC: usize = 1000;
    let p = decay_exponent_hint;
    if !(r0 > 0.0) {
        return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
    }
    if p >= -1.0 {
        return Err(Error::Divergent(format!(
            "tail exponent {p} >= -1: integral over [r0, inf) diverges"
        )));
    }
    let mut partial = CompensatedSum::new();
    let mut partial_err = 0.0;
    let mut totals: Vec<f64> = Vec::new();
    let mut a = r0;
    for k in 0..MAX_DYADIC {
        let b = 2.0 * a;
        let seg = adaptive_integral(&f, a, b, 1e-300, 1e-14)?;
        partial.add(seg.value);
        partial_err += seg.abs_err;
        let fb = f(b);
        let tail = -fb * b / (p + 1.0);
        let total = partial.value() + tail;
        if !total.is_finite() {
            return Err(Error::NonConvergent("non-finite tail estimate".into()));
        }
        totals.push(total);

        // Measured local exponent; reject integrands decaying slower than the hint allows.
        if k >= 3 {
            let fa = f(a);
            if fa != 0.0 && fb != 0.0 && fa.signum() == fb.signum() {
                let local = (fb / fa).abs().ln() / std::f64::consts::LN_2;
                if local >= -1.0 + 1e-3 && (b > 1e6 * r0) {
                    return Err(Error::Divergent(format!(
                        "measured tail exponent {local:.4} >= -1"
                    )));
                }
            }
        }

        let n = totals.len();
        if n >= 3 {
            let (t0, t1, t2) = (totals[n - 3], totals[n - 2], totals[n - 1]);
            let d1 = t1 - t0;
            let d2 = t2 - t1;
            let scale = t2.abs().max(1e-300);
            if d2.abs() <= REL_TOL * scale && d1.abs() <= 10.0 * REL_TOL * scale {
                return Ok(Integral { value: t2, abs_err: d2.abs() + partial_err });
            }
            let denom = d2 - d1;
            if denom != 0.0 && n >= 6 {
                let aitken = t2 - d2 * d2 / denom;
                let prev_aitken = {
                    let (s0, s1, s2) = (totals[n - 4], totals[n - 3], totals[n - 2]);
                    let dd = (s2 - s1) - (s1 - s0);
                    if dd != 0.0 {
                        s2 - (s2 - s1) * (s2 - s1) / dd
                    } else {
                        s2
                    }
                };
                if (aitken - prev_aitken).abs() <= REL_TOL * aitken.abs().max(1e-300)
                    && d2.abs() <= 1e-6 * scale
                {
                    return Ok(Integral {
                        value: aitken,
                        abs_err: (aitken - prev_aitken).abs() + partial_err,
                    });
                }
            }
        }
        a = b;
        if !a.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergent("tail extrapolation did not settle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // Degree 15 is the maximal exact degree for 8 nodes.
        let val: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert!((val - 2.0 / 15.0).abs() < 1e-14);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_jet_matches_closed_form() {
        // P_3 = (5x^3 - 3x)/2
        let x = 0.37;
        let (p, d, s) = legendre_jet(3, x);
        assert!((p - 0.5 * (5.0 * x * x * x - 3.0 * x)).abs() < 1e-15);
        assert!((d - 0.5 * (15.0 * x * x - 3.0)).abs() < 1e-14);
        assert!((s - 15.0 * x).abs() < 1e-14);
        let (p1, d1, _) = legendre_jet(5, 1.0);
        assert!((p1 - 1.0).abs() < 1e-15);
        assert!((d1 - 15.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive_integral(|x: f64| x.sqrt(), 0.0, 1.0, 1e-14, 1e-13).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn improper_power_laws() {
        for p in [1.5_f64, 2.0, 3.0, 4.0] {
            let r = improper_radial_integral(|x: f64| x.powf(-p), 1.0, -p).unwrap();
            let exact = 1.0 / (p - 1.0);
            assert!(((r.value - exact) / exact).abs() < 1e-9, "p={p}: {}", r.value);
        }
    }

    #[test]
    fn improper_rejects_harmonic_tail() {
        let r = improper_radial_integral(|x: f64| 1.0 / x, 1.0, -1.0);
        assert!(matches!(r, Err(Error::Divergent(_))));
    }

    #[test]
    fn improper_with_subleading_correction() {
        // 1/(r^2 (1 + 1/r)) = 1/(r(r+1)); integral from 1 is ln 2.
        let r = improper_radial_integral(|x: f64| 1.0 / (x * (x + 1.0)), 1.0, -2.0).unwrap();
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn compensated_sum_is_order_independent() {
        let vals: Vec<f64> = (0..10_000).map(|i| ((i as f64) * 0.731).sin() * 10f64.powi(i % 7)).collect();
        let fwd = compensated_sum(vals.iter().copied());
        let rev = compensated_sum(vals.iter().rev().copied());
        assert!(((fwd - rev) / fwd).abs() < 1e-13);
    }
}
