//! Divergence-free Galerkin basis on the truncated annulus `1 <= r <= r_max`.
//!
//! Every basis field is the curl of a stream function `g(rho) T(m theta)`,
//! with the logarithmic coordinate `rho = log r / log r_max`. For `m >= 1` the
//! radial factor is `rho^2 (1 - rho)^2 P_n(2 rho - 1)`, so both `psi` and
//! `psi_r` vanish at the two radii. For `m = 0` the field is a pure swirl with
//! `v_theta = rho (1 - rho) P_n(2 rho - 1)`. Fields are orthonormalized in
//! `H^1_0` within each `(m, phase)` block. Blocks are orthogonal because they
//! differ in angular content.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::frame::Tensor2;
use crate::functionals::{Phase, PolarJet};
use crate::geometry::{legendre_jet, PolarGrid, Stretch};

/// Node samples per basis field: `v_r, v_theta` and the four polar gradient
/// entries `G00, G01, G10, G11`.
pub(crate) const STRIDE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    #[default]
    None,
    /// Only fields with `v(-x) = -v(x)`.
    Central,
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::None => "none",
            Symmetry::Central => "central",
        })
    }
}

impl FromStr for Symmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Symmetry::None),
            "central" => Ok(Symmetry::Central),
            other => Err(Error::Parse(format!("unknown symmetry '{other}', expected none or central"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub r_max: f64,
    /// Highest angular order `M`.
    pub n_modes_theta: u32,
    /// Radial polynomials per angular block.
    pub n_modes_radial: usize,
}

impl BasisSpec {
    pub fn new(r_max: f64, n_modes_theta: u32, n_modes_radial: usize) -> Self {
        Self { r_max, n_modes_theta, n_modes_radial }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 1.0) || !self.r_max.is_finite() {
            return Err(invalid(format!("truncation radius must exceed 1, got {}", self.r_max)));
        }
        if self.n_modes_radial == 0 {
            return Err(invalid("need at least one radial mode"));
        }
        Ok(())
    }

    /// Quadrature grid that integrates the cubic products of the basis
    /// (angular content up to `3M`) exactly in `theta` and to rounding in `r`.
    pub fn grid(&self) -> Result<PolarGrid> {
        let m = self.n_modes_theta as usize;
        let n_theta = (2 * ((3 * m + 3) / 2)).max(8);
        let n_panels = (2.0 * self.r_max.log2()).ceil().max(4.0) as usize;
        let order = 14 + self.n_modes_radial;
        PolarGrid::annulus(1.0, self.r_max, n_panels, order, n_theta, Stretch::Geometric)
    }
}

/// Angular block and position of one orthonormal basis field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeLabel {
    pub m: u32,
    pub phase: Phase,
    /// Index inside the block.
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    spec: BasisSpec,
    grid: Arc<PolarGrid>,
    labels: Vec<ModeLabel>,
    /// `labels.len() * grid.len() * STRIDE`, basis-major.
    data: Vec<f64>,
    gram: DMatrix<f64>,
}

/// `(g, g', g'')` in `rho` for the clamped profile and `(q, q')` for the swirl.
fn clamped_profile(n: usize, rho: f64) -> (f64, f64, f64) {
    let x = 2.0 * rho - 1.0;
    let (p, px, pxx) = legendre_jet(n, x);
    let b = rho * rho * (1.0 - rho) * (1.0 - rho);
    let db = 2.0 * rho * (1.0 - rho) * (1.0 - 2.0 * rho);
    let ddb = 2.0 * (1.0 - 6.0 * rho + 6.0 * rho * rho);
    (b * p, db * p + 2.0 * b * px, ddb * p + 4.0 * db * px + 4.0 * b * pxx)
}

fn swirl_profile(n: usize, rho: f64) -> (f64, f64) {
    let x = 2.0 * rho - 1.0;
    let (p, px, _) = legendre_jet(n, x);
    (rho * (1.0 - rho) * p, (1.0 - 2.0 * rho) * p + 2.0 * rho * (1.0 - rho) * px)
}

fn raw_sample(m: u32, phase: Phase, n: usize, log_rmax: f64, r: f64, theta: f64) -> [f64; STRIDE] {
    let rho = r.ln() / log_rmax;
    let drho = 1.0 / (r * log_rmax);
    if m == 0 {
        let (q, dq) = swirl_profile(n, rho);
        return [0.0, q, 0.0, -q / r, dq * drho, 0.0];
    }
    let (g, dg, ddg) = clamped_profile(n, rho);
    let mf = m as f64;
    let (s, c) = (mf * theta).sin_cos();
    let (t, dt, dtt) = match phase {
        Phase::Cos => (c, -mf * s, -mf * mf * c),
        Phase::Sin => (s, mf * c, -mf * mf * s),
    };
    let g_r = dg * drho;
    let g_rr = ddg * drho * drho - dg * drho / r;
    let jet = PolarJet { psi: g * t, dr: g_r * t, dt: g * dt, drr: g_rr * t, drt: g_r * dt, dtt: g * dtt };
    let v = jet.velocity(r);
    let gr = jet.velocity_gradient(r);
    [v[0], v[1], gr[0][0], gr[0][1], gr[1][0], gr[1][1]]
}

fn frob(a: &[f64], b: &[f64]) -> f64 {
    a[2] * b[2] + a[3] * b[3] + a[4] * b[4] + a[5] * b[5]
}

impl GalerkinBasis {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        spec.validate()?;
        let grid = Arc::new(spec.grid()?);
        let log_rmax = spec.r_max.ln();
        let len = grid.len();
        let weights: Vec<f64> = (0..len).map(|k| grid.weight(k)).collect();
        let mut blocks: Vec<(u32, Phase)> = vec![(0, Phase::Cos)];
        for m in 1..=spec.n_modes_theta {
            blocks.push((m, Phase::Cos));
            blocks.push((m, Phase::Sin));
        }
        let nr = spec.n_modes_radial;
        let per_block: Vec<Result<Vec<Vec<f64>>>> = blocks
            .par_iter()
            .map(|&(m, phase)| {
                let raw: Vec<Vec<f64>> = (0..nr)
                    .map(|n| {
                        let mut v = Vec::with_capacity(len * STRIDE);
                        for k in 0..len {
                            let (r, t) = grid.node(k);
                            v.extend_from_slice(&raw_sample(m, phase, n, log_rmax, r, t));
                        }
                        v
                    })
                    .collect();
                let gram = DMatrix::from_fn(nr, nr, |a, b| {
                    (0..len)
                        .map(|k| weights[k] * frob(&raw[a][k * STRIDE..], &raw[b][k * STRIDE..]))
                        .sum::<f64>()
                });
                let chol = gram.cholesky().ok_or_else(|| {
                    Error::LinearAlgebra(format!("radial Gram of block m={m} is not positive definite"))
                })?;
                let linv = chol
                    .l()
                    .solve_lower_triangular(&DMatrix::identity(nr, nr))
                    .ok_or_else(|| Error::LinearAlgebra("singular Cholesky factor".into()))?;
                Ok((0..nr)
                    .map(|i| {
                        let mut out = vec![0.0; len * STRIDE];
                        for j in 0..=i {
                            let c = linv[(i, j)];
                            for (o, x) in out.iter_mut().zip(&raw[j]) {
                                *o += c * x;
                            }
                        }
                        out
                    })
                    .collect())
            })
            .collect();
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (&(m, phase), fields) in blocks.iter().zip(per_block) {
            for (index, f) in fields?.into_iter().enumerate() {
                labels.push(ModeLabel { m, phase, index });
                data.extend(f);
            }
        }
        let mut basis = Self { spec, grid, labels, data, gram: DMatrix::zeros(0, 0) };
        basis.gram = basis.gram_matrix();
        Ok(basis)
    }

    fn gram_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let len = self.grid.len();
        let entries: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                if j < i {
                    return 0.0;
                }
                let (a, b) = (self.field(i), self.field(j));
                (0..len).map(|k| self.grid.weight(k) * frob(&a[k * STRIDE..], &b[k * STRIDE..])).sum()
            })
            .collect();
        let mut g = DMatrix::from_row_slice(n, n, &entries);
        for i in 0..n {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<PolarGrid> {
        self.grid.clone()
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    /// `H^1_0` Gram matrix of the (orthonormalized) fields.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Node samples of field `i`, `STRIDE` values per node.
    pub(crate) fn field(&self, i: usize) -> &[f64] {
        let len = self.grid.len() * STRIDE;
        &self.data[i * len..(i + 1) * len]
    }

    pub fn velocity(&self, i: usize, k: usize) -> [f64; 2] {
        let f = &self.field(i)[k * STRIDE..];
        [f[0], f[1]]
    }

    pub fn gradient(&self, i: usize, k: usize) -> Tensor2 {
        let f = &self.field(i)[k * STRIDE..];
        [[f[2], f[3]], [f[4], f[5]]]
    }

    /// Positions of the centrally symmetric fields (even `m`).
    pub fn central_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.labels[i].m.is_multiple_of(2)).collect()
    }

    /// Sub-basis of the given fields, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.iter().any(|&i| i >= self.dim()) {
            return Err(invalid("basis index out of range"));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let data = indices.iter().flat_map(|&i| self.field(i).iter().copied()).collect();
        let gram = DMatrix::from_fn(indices.len(), indices.len(), |a, b| self.gram[(indices[a], indices[b])]);
        Ok(Self { spec: self.spec, grid: self.grid.clone(), labels, data, gram })
    }
}

/// Sub-basis spanning the centrally symmetric fields, `v(-x) = -v(x)`.
pub fn restrict_central(basis: &GalerkinBasis) -> GalerkinBasis {
    basis.subset(&basis.central_indices()).expect("central indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GalerkinBasis {
        GalerkinBasis::new(BasisSpec::new(6.0, 3, 5)).unwrap()
    }

    #[test]
    fn orthonormal_and_divergence_free() {
        let b = small();
        assert_eq!(b.dim(), 5 * 7);
        let err = (b.gram() - DMatrix::identity(b.dim(), b.dim())).abs().max();
        assert!(err < 1e-10, "{err}");
        let g = b.grid();
        for i in 0..b.dim() {
            for k in 0..g.len() {
                let gr = b.gradient(i, k);
                let scale = 1.0 + gr.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                assert!((gr[0][0] + gr[1][1]).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn raw_fields_vanish_on_both_radii() {
        let l = 6f64.ln();
        for (m, phase) in [(0, Phase::Cos), (2, Phase::Sin), (3, Phase::Cos)] {
            for n in 0..4 {
                for r in [1.0, 6.0] {
                    let s = raw_sample(m, phase, n, l, r, 0.7);
                    assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14, "{m} {n} {r}: {s:?}");
                }
            }
        }
    }

    #[test]
    fn raw_gradient_matches_differences() {
        let l = 5f64.ln();
        for (m, phase, n) in [(0, Phase::Cos, 2), (1, Phase::Sin, 1), (3, Phase::Cos, 3)] {
            let (r, t) = (2.3, 0.4);
            let h = 1e-6;
            let s = raw_sample(m, phase, n, l, r, t);
            let p = raw_sample(m, phase, n, l, r + h, t);
            let q = raw_sample(m, phase, n, l, r - h, t);
            let pt = raw_sample(m, phase, n, l, r, t + h);
            let qt = raw_sample(m, phase, n, l, r, t - h);
            let d_r = [(p[0] - q[0]) / (2.0 * h), (p[1] - q[1]) / (2.0 * h)];
            let d_t = [(pt[0] - qt[0]) / (2.0 * h), (pt[1] - qt[1]) / (2.0 * h)];
            let want = [d_r[0], (d_t[0] - s[1]) / r, d_r[1], (d_t[1] + s[0]) / r];
            for (a, b) in s[2..].iter().zip(want) {
                assert!((a - b).abs() < 1e-7, "{m} {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn central_restriction_halves_and_is_odd() {
        let b = small();
        let c = restrict_central(&b);
        assert!(c.labels().iter().all(|l| l.m % 2 == 0));
        assert_eq!(c.dim(), 5 * 3);
        let g = c.grid();
        for i in 0..c.dim() {
            for ir in 0..g.n_r() {
                for j in 0..g.n_theta() {
                    let (a, b2) = (g.index(ir, j), g.index(ir, g.antipode(j)));
                    let (va, vb) = (c.velocity(i, a), c.velocity(i, b2));
                    assert!((va[0] - vb[0]).abs() < 1e-12 && (va[1] - vb[1]).abs() < 1e-12);
                }
            }
        }
        let big = GalerkinBasis::new(BasisSpec::new(6.0, 6, 3)).unwrap();
        let ratio = restrict_central(&big).dim() as f64 / big.dim() as f64;
        assert!((0.4..=0.6).contains(&ratio));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GalerkinBasis::new(BasisSpec::new(1.0, 2, 3)).is_err());
        assert!(GalerkinBasis::new(BasisSpec::new(4.0, 2, 0)).is_err());
        assert_eq!("central".parse::<Symmetry>().unwrap(), Symmetry::Central);
        assert!("odd".parse::<Symmetry>().is_err());
    }
}
