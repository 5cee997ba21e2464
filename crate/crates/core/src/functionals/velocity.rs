use std::sync::Arc;

use rayon::prelude::*;

use super::spectral::{resolution_defect, SpectralOps};
use super::stream::{PolarJet, StreamField, Support};
use crate::error::{invalid, Error, Result};
use crate::frame::Tensor2;
use crate::geometry::PolarGrid;
use crate::steady_flows::{Decay, SteadyField};

/// Largest tolerated unresolved spectral content of sampled stream functions.
pub const NYQUIST_TOLERANCE: f64 = 1e-6;

/// Behaviour of a grid field beyond the outer grid radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// Zero beyond the grid.
    Compact,
    /// `|v| ~ r^exponent (log r)^log_power` beyond the grid.
    Power { exponent: f64, log_power: f64 },
    /// Nonzero beyond the grid but only the gridded part is considered.
    Truncated,
}

/// Polar velocity components on a grid, with an optional exact gradient.
#[derive(Debug, Clone)]
pub struct VelocityFieldPolar {
    grid: Arc<PolarGrid>,
    vr: Vec<f64>,
    vt: Vec<f64>,
    grad: Option<Vec<Tensor2>>,
    tail: Tail,
}

impl VelocityFieldPolar {
    pub fn new(
        grid: Arc<PolarGrid>,
        vr: Vec<f64>,
        vt: Vec<f64>,
        grad: Option<Vec<Tensor2>>,
        tail: Tail,
    ) -> Result<Self> {
        let n = grid.len();
        if vr.len() != n || vt.len() != n || grad.as_ref().is_some_and(|g| g.len() != n) {
            return Err(Error::GridMismatch(format!("field arrays do not match the {n} grid nodes")));
        }
        Ok(Self { grid, vr, vt, grad, tail })
    }

    pub fn zero(grid: Arc<PolarGrid>) -> Self {
        let n = grid.len();
        Self { grid, vr: vec![0.0; n], vt: vec![0.0; n], grad: Some(vec![[[0.0; 2]; 2]; n]), tail: Tail::Compact }
    }

    /// Samples a steady field with its analytic gradient and decay law.
    pub fn from_steady(u: &dyn SteadyField, grid: &PolarGrid) -> Self {
        let grid = Arc::new(grid.clone());
        let samples: Vec<([f64; 2], Tensor2)> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (r, t) = grid.node(k);
                (u.velocity(r, t), u.gradient(r, t))
            })
            .collect();
        let tail = match u.decay() {
            Decay::Zero => Tail::Compact,
            Decay::Power { exponent, log_power } => Tail::Power { exponent, log_power },
        };
        let (vr, vt) = samples.iter().map(|(v, _)| (v[0], v[1])).unzip();
        let grad = samples.into_iter().map(|(_, g)| g).collect();
        Self { grid, vr, vt, grad: Some(grad), tail }
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<PolarGrid> {
        &self.grid
    }

    pub fn vr(&self) -> &[f64] {
        &self.vr
    }

    pub fn vt(&self) -> &[f64] {
        &self.vt
    }

    pub fn velocity(&self, k: usize) -> [f64; 2] {
        [self.vr[k], self.vt[k]]
    }

    pub fn analytic_gradient(&self) -> Option<&[Tensor2]> {
        self.grad.as_deref()
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// Gradient from the analytic channel when present, otherwise by
    /// spectral differentiation of the samples.
    pub fn gradient(&self) -> Vec<Tensor2> {
        match &self.grad {
            Some(g) => g.clone(),
            None => spectral_gradient(&self.grid, &self.vr, &self.vt),
        }
    }

    /// Drops the analytic gradient channel.
    pub fn without_gradient(mut self) -> Self {
        self.grad = None;
        self
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn max_abs(&self) -> f64 {
        self.vr.iter().chain(&self.vt).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn map_components<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid.clone(),
            vr: self.vr.iter().map(|v| f(*v)).collect(),
            vt: self.vt.iter().map(|v| f(*v)).collect(),
            grad: self.grad.as_ref().map(|g| {
                g.iter().map(|t| [[f(t[0][0]), f(t[0][1])], [f(t[1][0]), f(t[1][1])]]).collect()
            }),
            tail: self.tail,
        }
    }
}

/// Velocity gradient in the polar frame from polar velocity samples:
/// `[[d_r v_r, (d_t v_r - v_t)/r], [d_r v_t, (d_t v_t + v_r)/r]]`.
pub fn spectral_gradient(grid: &PolarGrid, vr: &[f64], vt: &[f64]) -> Vec<Tensor2> {
    let ops = SpectralOps::new(grid);
    let (drr, drt) = (ops.d_r(vr), ops.d_r(vt));
    let (dtr, dtt) = (ops.d_theta(vr), ops.d_theta(vt));
    (0..grid.len())
        .map(|k| {
            let r = grid.node(k).0;
            [[drr[k], (dtr[k] - vt[k]) / r], [drt[k], (dtt[k] + vr[k]) / r]]
        })
        .collect()
}

fn tail_of(support: Support, grid: &PolarGrid) -> Tail {
    match support {
        Support::Compact { outer, .. } if outer <= grid.r_outer() => Tail::Compact,
        Support::Compact { .. } => Tail::Truncated,
        Support::Unbounded { velocity_exponent } => Tail::Power { exponent: velocity_exponent, log_power: 0.0 },
    }
}

/// `v = curl psi = (psi_theta / r, -psi_r)` on the grid.
///
/// Closed-form stream functions give an exact gradient channel. Sampled
/// ones are differentiated spectrally and must live on the same grid and
/// pass the resolution check.
pub fn stream_to_velocity(psi: &StreamField, grid: &PolarGrid) -> Result<VelocityFieldPolar> {
    let tail = tail_of(psi.support(), grid);
    match psi {
        StreamField::Analytic(f) => {
            let jets: Vec<(f64, PolarJet)> = (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    let (r, t) = grid.node(k);
                    (r, f.jet(r, t))
                })
                .collect();
            let mut vr = Vec::with_capacity(jets.len());
            let mut vt = Vec::with_capacity(jets.len());
            let mut grad = Vec::with_capacity(jets.len());
            for (r, j) in &jets {
                let v = j.velocity(*r);
                vr.push(v[0]);
                vt.push(v[1]);
                grad.push(j.velocity_gradient(*r));
            }
            VelocityFieldPolar::new(Arc::new(grid.clone()), vr, vt, Some(grad), tail)
        }
        StreamField::Sampled(s) => {
            if *s.grid != *grid {
                return Err(Error::GridMismatch("sampled stream function lives on a different grid".into()));
            }
            let defect = resolution_defect(grid, &s.values);
            if defect > NYQUIST_TOLERANCE {
                return Err(Error::Unresolved(format!(
                    "spectral tail {defect:e} exceeds {NYQUIST_TOLERANCE:e}"
                )));
            }
            let ops = SpectralOps::new(grid);
            let dr = ops.d_r(&s.values);
            let dt = ops.d_theta(&s.values);
            let mut vr = vec![0.0; grid.len()];
            let mut vt = vec![0.0; grid.len()];
            for k in 0..grid.len() {
                let r = grid.node(k).0;
                vr[k] = dt[k] / r;
                vt[k] = -dr[k];
            }
            VelocityFieldPolar::new(s.grid.clone(), vr, vt, None, tail)
        }
    }
}

/// `L^2` norm of `div v` computed from the spectral derivatives of the
/// samples (independent of any analytic gradient channel).
pub fn divergence_residual(v: &VelocityFieldPolar) -> f64 {
    let g = spectral_gradient(v.grid(), v.vr(), v.vt());
    v.grid().integrate_fn(|k, _, _| (g[k][0][0] + g[k][1][1]).powi(2)).sqrt()
}

/// Odd part `(v(x) - v(-x)) / 2`: in polar components this is the average of
/// the samples at `theta` and `theta + pi`.
pub fn central_projector(v: &VelocityFieldPolar) -> Result<VelocityFieldPolar> {
    let grid = v.grid();
    let nt = grid.n_theta();
    if !nt.is_multiple_of(2) {
        return Err(invalid("central projection needs antipodally paired angles"));
    }
    let pair = |k: usize| {
        let (i, j) = (k / nt, k % nt);
        grid.index(i, grid.antipode(j))
    };
    let avg = |a: f64, b: f64| 0.5 * (a + b);
    let vr = (0..grid.len()).map(|k| avg(v.vr[k], v.vr[pair(k)])).collect();
    let vt = (0..grid.len()).map(|k| avg(v.vt[k], v.vt[pair(k)])).collect();
    let grad = v.grad.as_ref().map(|g| {
        (0..grid.len())
            .map(|k| {
                let (a, b) = (g[k], g[pair(k)]);
                [[avg(a[0][0], b[0][0]), avg(a[0][1], b[0][1])], [avg(a[1][0], b[1][0]), avg(a[1][1], b[1][1])]]
            })
            .collect()
    });
    VelocityFieldPolar::new(v.grid.clone(), vr, vt, grad, v.tail)
}

/// `max |v(x) + v(-x)|` over antipodal node pairs (componentwise, Cartesian).
pub fn antipodal_defect(v: &VelocityFieldPolar) -> f64 {
    let grid = v.grid();
    let nt = grid.n_theta();
    let mut d = 0.0f64;
    for i in 0..grid.n_r() {
        for j in 0..nt {
            let (a, b) = (grid.index(i, j), grid.index(i, grid.antipode(j)));
            // e_r(theta + pi) = -e_r(theta), so the Cartesian sum is the
            // difference of the polar components.
            d = d.max((v.vr[a] - v.vr[b]).abs()).max((v.vt[a] - v.vt[b]).abs());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{LogRadius, ModalStream, SampledStream, UniformFlow};
    use crate::geometry::{build_polar_grid, Stretch};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> PolarGrid {
        build_polar_grid(8.0, 128, 32, Stretch::Geometric).unwrap()
    }

    #[test]
    fn log_radius_gives_swirl() {
        let g = grid();
        let v = stream_to_velocity(&StreamField::analytic(LogRadius), &g).unwrap();
        for k in 0..g.len() {
            let (r, _) = g.node(k);
            assert!(v.vr()[k].abs() < 1e-15);
            assert!((v.vt()[k] + 1.0 / r).abs() < 1e-15);
        }
        assert_eq!(v.tail(), Tail::Power { exponent: -1.0, log_power: 0.0 });
    }

    #[test]
    fn uniform_flow_in_polar_components() {
        let g = grid();
        let v = stream_to_velocity(&StreamField::analytic(UniformFlow), &g).unwrap();
        for k in 0..g.len() {
            let (_, t) = g.node(k);
            assert!((v.vr()[k] - t.cos()).abs() < 1e-14);
            assert!((v.vt()[k] + t.sin()).abs() < 1e-14);
            let gr = v.analytic_gradient().unwrap()[k];
            assert!(gr.iter().flatten().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn sampled_matches_analytic() {
        let g = Arc::new(build_polar_grid(3.0, 128, 32, Stretch::Uniform).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = ModalStream::random(&mut rng, 1.0, 3.0, 4, 4, false);
        let exact = stream_to_velocity(&StreamField::analytic(f.clone()), &g).unwrap();
        let sampled = StreamField::from(SampledStream::from_function(&f, g.clone()));
        let approx = stream_to_velocity(&sampled, &g).unwrap();
        for k in 0..g.len() {
            assert!((exact.vr()[k] - approx.vr()[k]).abs() < 1e-9);
            assert!((exact.vt()[k] - approx.vt()[k]).abs() < 1e-9);
        }
        assert!(divergence_residual(&approx) < 1e-8);
        let other = build_polar_grid(3.0, 64, 32, Stretch::Uniform).unwrap();
        assert!(matches!(stream_to_velocity(&sampled, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn unresolved_samples_rejected() {
        let g = Arc::new(build_polar_grid(3.0, 16, 8, Stretch::Uniform).unwrap());
        let values = (0..g.len()).map(|k| ((k * 7919) % 13) as f64).collect();
        let s = SampledStream::new(g.clone(), values, Support::Compact { inner: 1.0, outer: 3.0 }).unwrap();
        assert!(matches!(stream_to_velocity(&s.into(), &g), Err(Error::Unresolved(_))));
    }

    #[test]
    fn projector_laws() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = ModalStream::random(&mut rng, 1.0, 6.0, 5, 3, false);
        let v = stream_to_velocity(&StreamField::analytic(f), &g).unwrap();
        let p = central_projector(&v).unwrap();
        assert_eq!(antipodal_defect(&p), 0.0);
        let pp = central_projector(&p).unwrap();
        assert_eq!(pp.vr(), p.vr());
        assert_eq!(pp.vt(), p.vt());
        // a constant Cartesian vector is even and is removed
        let c = stream_to_velocity(&StreamField::analytic(UniformFlow), &g).unwrap();
        assert!(central_projector(&c).unwrap().max_abs() < 1e-15);
    }
}
