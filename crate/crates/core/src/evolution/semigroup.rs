//! The linear semigroups `e^{-tL}` and `e^{-tL*}` on the Galerkin space, and
//! the smoothing diagnostics built on them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

use super::system::GalerkinSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Which {
    L,
    LStar,
}

/// `e^{-tL}` in coefficients: with `M = R R^T`, the flow of `M xi' = -L xi`
/// is `xi(t) = R^{-T} exp(-t R^{-1} L R^{-T}) R^T xi0`.
#[derive(Debug, Clone)]
pub struct Semigroup {
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    generator: DMatrix<f64>,
}

impl Semigroup {
    pub fn new(sys: &GalerkinSystem, which: Which) -> Result<Self> {
        let l = match which {
            Which::L => sys.l_matrix(),
            Which::LStar => sys.l_star_matrix(),
        };
        let chol = sys
            .mass()
            .clone()
            .cholesky()
            .ok_or_else(|| Error::LinearAlgebra("mass matrix is not positive definite".into()))?;
        let r = chol.l();
        let r_inv = r
            .solve_lower_triangular(&DMatrix::identity(r.nrows(), r.nrows()))
            .ok_or_else(|| Error::LinearAlgebra("singular mass factor".into()))?;
        let generator = &r_inv * l * r_inv.transpose();
        Ok(Self { r, r_inv, generator })
    }

    pub fn apply(&self, xi0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("semigroup time must be non-negative, got {t}")));
        }
        if xi0.len() != self.r.nrows() {
            return Err(invalid("coefficient vector does not match the basis"));
        }
        let eta0 = self.r.transpose() * xi0;
        let eta = (&self.generator * (-t)).exp() * eta0;
        Ok(self.r_inv.transpose() * eta)
    }
}

impl Semigroup {
    /// `e^{-k dt L} xi0` for `k = 0..=n`, by repeated application of one step.
    pub fn orbit(&self, xi0: &DVector<f64>, dt: f64, n: usize) -> Result<Vec<DVector<f64>>> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("orbit step must be positive, got {dt}")));
        }
        if xi0.len() != self.r.nrows() {
            return Err(invalid("coefficient vector does not match the basis"));
        }
        let step = (&self.generator * (-dt)).exp();
        let mut eta = self.r.transpose() * xi0;
        let mut out = Vec::with_capacity(n + 1);
        out.push(xi0.clone());
        for _ in 0..n {
            eta = &step * eta;
            out.push(self.r_inv.transpose() * &eta);
        }
        Ok(out)
    }
}

/// `e^{-tL} v0` or `e^{-tL*} v0` in coefficients.
pub fn semigroup_apply(sys: &GalerkinSystem, xi0: &DVector<f64>, t: f64, which: Which) -> Result<DVector<f64>> {
    Semigroup::new(sys, which)?.apply(xi0, t)
}

/// `L^2` inner product of two coefficient vectors.
pub fn l2_inner(sys: &GalerkinSystem, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&(sys.mass() * b))
}

/// Initial datum with `L^2` energy spread evenly over `log lambda`, where
/// `lambda` runs over the Stokes eigenvalues `A e = lambda M e` of the basis.
/// For such data `||grad e^{-tA} v0||_2 ~ t^{-1/2}` over the resolved range,
/// so it saturates the smoothing estimate.
pub fn log_uniform_datum(sys: &GalerkinSystem) -> Result<DVector<f64>> {
    let chol = sys
        .mass()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("mass matrix is not positive definite".into()))?;
    let r_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(sys.dim(), sys.dim()))
        .ok_or_else(|| Error::LinearAlgebra("singular mass factor".into()))?;
    let sym = &r_inv * sys.stiffness() * r_inv.transpose();
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..sys.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lam: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(f64::MIN_POSITIVE)).collect();
    let mut eta = DVector::zeros(sys.dim());
    let n = lam.len();
    for (p, &i) in order.iter().enumerate() {
        let lo = if p == 0 { lam[0] } else { (lam[p - 1] * lam[p]).sqrt() };
        let hi = if p + 1 == n { lam[p] } else { (lam[p] * lam[p + 1]).sqrt() };
        let w = (hi / lo).ln().max(0.0);
        eta += eig.eigenvectors.column(i) * w.sqrt();
    }
    let xi = r_inv.transpose() * eta;
    let norm = l2_inner(sys, &xi, &xi).sqrt();
    Ok(xi / norm)
}

/// Least-squares slope of `log y` against `log t`.
pub fn loglog_slope(t: &[f64], y: &[f64]) -> Result<f64> {
    if t.len() != y.len() || t.len() < 2 || t.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(invalid("slope fit needs at least two positive samples"));
    }
    let x: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let z: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, mz) = (x.iter().sum::<f64>() / n, z.iter().sum::<f64>() / n);
    let sxz: f64 = x.iter().zip(&z).map(|(a, b)| (a - mx) * (b - mz)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxz / sxx)
}

/// `||grad e^{-t L*} v0||_2` at each `t`.
pub fn gradient_decay(sys: &GalerkinSystem, xi0: &DVector<f64>, times: &[f64]) -> Result<Vec<f64>> {
    let sg = Semigroup::new(sys, Which::LStar)?;
    times.iter().map(|&t| Ok(sys.grad_energy(&sg.apply(xi0, t)?).sqrt())).collect()
}

/// One sample of the nonlinear smoothing estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSample {
    pub t: f64,
    /// `(v . grad v, e^{-tL*} phi)`.
    pub pairing: f64,
    /// `pairing * t^{1/2} / (||v|| ||grad v|| ||phi||)`.
    pub normalized: f64,
}

/// Measured constant of `(v . grad v, e^{-tL*} phi) <= C t^{-1/2} ||v|| ||grad v|| ||phi||`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearBound {
    pub constant: f64,
    pub samples: Vec<NonlinearSample>,
}

impl NonlinearBound {
    /// Whether every sample satisfies the bound with the fitted constant.
    pub fn holds(&self) -> bool {
        self.samples.iter().all(|s| s.normalized.abs() <= self.constant * (1.0 + 1e-12))
    }
}

pub fn measure_nonlinear_bound(
    sys: &GalerkinSystem,
    samples: &[(DVector<f64>, DVector<f64>, f64)],
) -> Result<NonlinearBound> {
    let sg = Semigroup::new(sys, Which::LStar)?;
    let mut out = Vec::with_capacity(samples.len());
    for (v, phi, t) in samples {
        if !(*t > 0.0) {
            return Err(invalid(format!("sample time must be positive, got {t}")));
        }
        let psi = sg.apply(phi, *t)?;
        let pairing = psi.dot(&sys.nonlinear(v));
        let scale = sys.energy(v).sqrt() * sys.grad_energy(v).sqrt() * sys.energy(phi).sqrt();
        let normalized = if scale > 0.0 { pairing * t.sqrt() / scale } else { 0.0 };
        out.push(NonlinearSample { t: *t, pairing, normalized });
    }
    let constant = out.iter().map(|s| s.normalized.abs()).fold(0.0, f64::max);
    Ok(NonlinearBound { constant, samples: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::basis::{BasisSpec, GalerkinBasis};
    use crate::evolution::system::assemble_system;
    use crate::steady_flows::SteadyFlowParams;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn system() -> GalerkinSystem {
        let b = Arc::new(GalerkinBasis::new(BasisSpec::new(6.0, 2, 6)).unwrap());
        assemble_system(b, SteadyFlowParams::new(PI, 0.5, 0.0)).unwrap()
    }

    #[test]
    fn contraction_and_duality() {
        let s = system();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let l = Semigroup::new(&s, Which::L).unwrap();
        let ls = Semigroup::new(&s, Which::LStar).unwrap();
        for _ in 0..5 {
            let a = DVector::from_fn(s.dim(), |_, _| rng.random_range(-1.0..1.0));
            let b = DVector::from_fn(s.dim(), |_, _| rng.random_range(-1.0..1.0));
            for t in [0.0, 0.05, 0.5, 3.0] {
                let ea = l.apply(&a, t).unwrap();
                assert!(s.energy(&ea) <= s.energy(&a) * (1.0 + 1e-12));
                let lhs = l2_inner(&s, &ea, &b);
                let rhs = l2_inner(&s, &a, &ls.apply(&b, t).unwrap());
                assert!((lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
            }
        }
        assert_eq!(l.apply(&DVector::zeros(s.dim()), 1.0).unwrap().norm(), 0.0);
    }

    #[test]
    fn slope_fit() {
        let t = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = t.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&t, &y).unwrap() + 0.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn nonlinear_bound_zero_field() {
        let s = system();
        let phi = DVector::from_element(s.dim(), 0.1);
        let b = measure_nonlinear_bound(&s, &[(DVector::zeros(s.dim()), phi, 1.0)]).unwrap();
        assert_eq!(b.samples[0].pairing, 0.0);
        assert!(b.holds());
    }
}
