use std::f64::consts::PI;

use super::stream::StreamField;
use super::velocity::{stream_to_velocity, Tail, VelocityFieldPolar};
use crate::error::{invalid, Error, Result};
use crate::frame::{advect_dot, frobenius_sq};
use crate::geometry::{CompensatedSum, PolarGrid};
use crate::steady_flows::SteadyField;

/// Inner collar `[1, HARDY_COLLAR]` on which fields entering the
/// log-weighted Hardy quotient must vanish.
pub const HARDY_COLLAR: f64 = 1.05;

/// `int_{R}^{inf} 2pi m (r / r_last)^e r dr`, the power-law continuation of
/// a ring average `m` measured at the last node `r_last`; infinite if the
/// continuation is not integrable.
fn power_tail(grid: &PolarGrid, ring_mean: f64, exponent: f64) -> f64 {
    if ring_mean == 0.0 {
        return 0.0;
    }
    let e2 = exponent + 2.0;
    if e2 >= 0.0 {
        return f64::INFINITY * ring_mean.signum();
    }
    let r_last = *grid.r_nodes().last().expect("non-empty grid");
    let big_r = grid.r_outer();
    2.0 * PI * ring_mean * r_last.powf(-exponent) * big_r.powf(e2) / (-e2)
}

fn last_ring_mean<F: Fn(usize) -> f64>(grid: &PolarGrid, f: F) -> f64 {
    let i = grid.n_r() - 1;
    let mut acc = CompensatedSum::new();
    for j in 0..grid.n_theta() {
        acc.add(f(grid.index(i, j)));
    }
    acc.value() / grid.n_theta() as f64
}

/// `||v||_2` over the grid plus the analytic tail; infinite when the tail is
/// not square integrable.
pub fn l2_norm(v: &VelocityFieldPolar) -> f64 {
    let grid = v.grid();
    let (vr, vt) = (v.vr(), v.vt());
    let sq = |k: usize| vr[k] * vr[k] + vt[k] * vt[k];
    let body = grid.integrate_fn(|k, _, _| sq(k));
    let tail = match v.tail() {
        Tail::Power { exponent, .. } => power_tail(grid, last_ring_mean(grid, sq), 2.0 * exponent),
        _ => 0.0,
    };
    (body + tail).sqrt()
}

/// `||grad v||_2` over the grid plus the analytic tail.
pub fn h1_seminorm(v: &VelocityFieldPolar) -> f64 {
    let grid = v.grid();
    let g = v.gradient();
    let sq = |k: usize| frobenius_sq(&g[k]);
    let body = grid.integrate_fn(|k, _, _| sq(k));
    let tail = match v.tail() {
        Tail::Power { exponent, .. } => power_tail(grid, last_ring_mean(grid, sq), 2.0 * exponent - 2.0),
        _ => 0.0,
    };
    (body + tail).sqrt()
}

/// `int (a . grad b) . c` over the exterior domain.
///
/// Fields must share a grid. If none of them vanishes beyond the grid the
/// integrand is continued with the combined power law, and a
/// non-integrable combination is reported as divergent.
pub fn trilinear(a: &VelocityFieldPolar, b: &VelocityFieldPolar, c: &VelocityFieldPolar) -> Result<f64> {
    if !a.same_grid(b) || !a.same_grid(c) {
        return Err(Error::GridMismatch("trilinear form needs a common grid".into()));
    }
    let grid = a.grid();
    let gb = b.gradient();
    let integrand = |k: usize| advect_dot(a.velocity(k), &gb[k], c.velocity(k));
    let body = grid.integrate_fn(|k, _, _| integrand(k));
    let tail = match (a.tail(), b.tail(), c.tail()) {
        (
            Tail::Power { exponent: pa, log_power: la },
            Tail::Power { exponent: pb, log_power: lb },
            Tail::Power { exponent: pc, log_power: lc },
        ) => {
            let e = pa + pb - 1.0 + pc;
            if e + 2.0 > 0.0 || (e + 2.0 == 0.0 && la + lb + lc >= -1.0) {
                return Err(Error::Divergent(format!(
                    "trilinear integrand decays like r^{e}; not integrable over the exterior domain"
                )));
            }
            power_tail(grid, last_ring_mean(grid, integrand), e)
        }
        _ => 0.0,
    };
    Ok(body + tail)
}

/// `B(v) = (v . grad v, u) / ||grad v||^2`.
pub fn hypothesis_ratio(v: &StreamField, ubar: &dyn SteadyField, grid: &PolarGrid) -> Result<f64> {
    let vel = stream_to_velocity(v, grid)?;
    hypothesis_ratio_velocity(&vel, ubar)
}

/// [`hypothesis_ratio`] for a field already on a grid.
pub fn hypothesis_ratio_velocity(v: &VelocityFieldPolar, ubar: &dyn SteadyField) -> Result<f64> {
    let den = h1_seminorm(v).powi(2);
    if den == 0.0 {
        return Err(Error::Degenerate("hypothesis quotient of a field with zero gradient".into()));
    }
    if !den.is_finite() {
        return Err(Error::Divergent("field has infinite Dirichlet energy".into()));
    }
    let u = VelocityFieldPolar::from_steady(ubar, v.grid());
    Ok(trilinear(v, v, &u)? / den)
}

fn weighted_quotient<W: Fn(f64) -> f64>(v: &VelocityFieldPolar, weight: W, tail_exponent_shift: f64) -> Result<f64> {
    let grid = v.grid();
    let den = h1_seminorm(v);
    if den == 0.0 {
        return Err(Error::Degenerate("Hardy quotient of a field with zero gradient".into()));
    }
    let (vr, vt) = (v.vr(), v.vt());
    let sq = |k: usize| {
        let r = grid.node(k).0;
        let w = weight(r);
        if w == 0.0 { 0.0 } else { (vr[k] * vr[k] + vt[k] * vt[k]) / (w * w) }
    };
    let body = grid.integrate_fn(|k, _, _| sq(k));
    let tail = match v.tail() {
        Tail::Power { exponent, .. } => {
            power_tail(grid, last_ring_mean(grid, sq), 2.0 * exponent + tail_exponent_shift)
        }
        _ => 0.0,
    };
    Ok((body + tail).sqrt() / den)
}

/// `||v / (|x| log|x|)||_2 / ||grad v||_2` for fields vanishing on the collar
/// `1 <= r <= 1.05`.
pub fn hardy_quotient_log(v: &VelocityFieldPolar) -> Result<f64> {
    let grid = v.grid();
    let scale = v.max_abs();
    for k in 0..grid.len() {
        let r = grid.node(k).0;
        if r < HARDY_COLLAR {
            let m = v.vr()[k].hypot(v.vt()[k]);
            if m > 1e-13 * scale {
                return Err(invalid(format!(
                    "field does not vanish on the collar: |v| = {m:e} at r = {r}"
                )));
            }
        }
    }
    weighted_quotient(v, |r| if r < HARDY_COLLAR { 0.0 } else { r * r.ln() }, -2.0)
}

/// `||v / |x|||_2 / ||grad v||_2`.
pub fn hardy_quotient_central(v: &VelocityFieldPolar) -> Result<f64> {
    weighted_quotient(v, |r| r, -2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{LogRadius, ModalStream, Rescaled, StreamMode, Phase};
    use crate::geometry::{build_polar_grid, Stretch};
    use crate::steady_flows::{HamelFlow, SteadyFlowParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(r_max: f64) -> PolarGrid {
        build_polar_grid(r_max, 256, 32, Stretch::Geometric).unwrap()
    }

    fn vel(f: ModalStream, g: &PolarGrid) -> VelocityFieldPolar {
        stream_to_velocity(&StreamField::analytic(f), g).unwrap()
    }

    #[test]
    fn zero_field_norms() {
        let g = grid(4.0);
        let v = vel(ModalStream::zero(), &g);
        assert_eq!(l2_norm(&v), 0.0);
        assert_eq!(h1_seminorm(&v), 0.0);
        assert!(matches!(hardy_quotient_log(&v), Err(Error::Degenerate(_))));
        assert!(matches!(hardy_quotient_central(&v), Err(Error::Degenerate(_))));
    }

    #[test]
    fn log_radius_tails() {
        // v = -e_theta / r: L2 norm diverges logarithmically, grad energy is
        // 2pi int 2/r^4 r dr = 2pi on [1, inf).
        let g = grid(16.0);
        let v = stream_to_velocity(&StreamField::analytic(LogRadius), &g).unwrap();
        assert!(l2_norm(&v).is_infinite());
        assert!((h1_seminorm(&v).powi(2) - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn analytic_and_spectral_gradients_agree() {
        let g = build_polar_grid(4.0, 128, 32, Stretch::Uniform).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = vel(ModalStream::random(&mut rng, 1.0, 4.0, 4, 4, false), &g);
        let a = h1_seminorm(&v);
        let b = h1_seminorm(&v.clone().without_gradient());
        assert!(((a - b) / a).abs() < 1e-8);
    }

    #[test]
    fn skew_symmetry_and_flux_bound() {
        let g = grid(6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let flux = VelocityFieldPolar::from_steady(&HamelFlow(SteadyFlowParams::flux_carrier(PI)), &g);
        for _ in 0..20 {
            let v = vel(ModalStream::random(&mut rng, 1.0, 6.0, 3, 3, false), &g);
            let w = vel(ModalStream::random(&mut rng, 1.0, 6.0, 3, 3, false), &g);
            let h = h1_seminorm(&w).powi(2);
            assert!(trilinear(&v, &w, &w).unwrap().abs() <= 1e-9 * h);
            let hv = h1_seminorm(&v).powi(2);
            let b = trilinear(&v, &v, &flux).unwrap();
            assert!(b.abs() <= 0.5 * (1.0 + 1e-6) * hv);
        }
    }

    #[test]
    fn ratio_scale_invariant_for_critical_background() {
        // panel breakpoints at every power of 2^(1/8) keep the support edges
        // of all dilations on panel boundaries
        let breaks: Vec<f64> = (0..=48).map(|j| 2f64.powf(j as f64 / 8.0)).collect();
        let g = PolarGrid::from_breakpoints(breaks, 8, 16).unwrap();
        let ubar = HamelFlow(SteadyFlowParams::new(1.0, 2.0, 0.0));
        let f = ModalStream::new(vec![
            StreamMode::clamped(1, Phase::Cos, 2, 4.0, 16.0).with_coef(1.0),
            StreamMode::clamped(1, Phase::Sin, 1, 4.0, 16.0).with_coef(0.4),
            StreamMode::swirl(1, 4.0, 16.0).with_coef(0.3),
        ]);
        let b = hypothesis_ratio(&StreamField::analytic(f.clone()), &ubar, &g).unwrap();
        for lambda in [2.0, 0.5, 0.25] {
            let s = StreamField::analytic(Rescaled::new(f.clone(), lambda, 1.0));
            let bl = hypothesis_ratio(&s, &ubar, &g).unwrap();
            assert!((bl - b).abs() < 1e-8 * b.abs().max(1.0), "{bl} vs {b}");
        }
        assert_eq!(hypothesis_ratio(&StreamField::analytic(f), &HamelFlow(SteadyFlowParams::zero()), &g).unwrap(), 0.0);
    }

    #[test]
    fn log_hardy_collar_enforced() {
        let g = grid(8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bad = vel(ModalStream::random(&mut rng, 1.0, 8.0, 2, 2, false), &g);
        assert!(hardy_quotient_log(&bad).is_err());
        let collar_grid = PolarGrid::annulus(HARDY_COLLAR, 8.0, 32, 8, 32, Stretch::Geometric).unwrap();
        let good = vel(ModalStream::random(&mut rng, HARDY_COLLAR, 8.0, 2, 2, false), &collar_grid);
        let q = hardy_quotient_log(&good).unwrap();
        assert!(q > 0.0 && q <= 2.0);
    }

    #[test]
    fn divergent_trilinear_flagged() {
        let g = grid(8.0);
        let u = VelocityFieldPolar::from_steady(&HamelFlow(SteadyFlowParams::new(0.0, 1.0, 0.0)), &g);
        let w = stream_to_velocity(&StreamField::analytic(crate::functionals::UniformFlow), &g).unwrap();
        assert!(matches!(trilinear(&w, &u, &w), Err(Error::Divergent(_))));
    }
}
