//! Galerkin matrices of the perturbation equations around a Hamel flow.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{advect_dot, Tensor2};
use crate::functionals::{stream_to_velocity, StreamField, Tail, VelocityFieldPolar};
use crate::functionals::analytic_criteria;
use crate::steady_flows::{classify_decay, DecayClass, HamelFlow, SteadyField, SteadyFlowParams};

use super::basis::{GalerkinBasis, STRIDE};

/// Relative skew defect of the transport matrix above which the quadrature
/// is considered too coarse for the background flow.
const SKEW_TOLERANCE: f64 = 1e-8;

/// Assembled Galerkin system.
///
/// With `M` the mass matrix, `A` the stiffness matrix, `C` the linear
/// advection matrix and `N` the nonlinear term, the equations read
/// `M xi' + (A + C) xi + N(xi) = 0`.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    basis: Arc<GalerkinBasis>,
    params: SteadyFlowParams,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    transport: DMatrix<f64>,
    reaction: DMatrix<f64>,
    adjoint_advection: DMatrix<f64>,
    background: Vec<([f64; 2], Tensor2)>,
    weights: Vec<f64>,
    delta_hat: Option<f64>,
}

fn sym_from_upper(n: usize, entries: Vec<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::from_row_slice(n, n, &entries);
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

fn vel(f: &[f64], k: usize) -> [f64; 2] {
    [f[k * STRIDE], f[k * STRIDE + 1]]
}

fn grad(f: &[f64], k: usize) -> Tensor2 {
    let g = &f[k * STRIDE + 2..k * STRIDE + 6];
    [[g[0], g[1]], [g[2], g[3]]]
}

/// Matrices of `(ubar . grad phi_j, phi_i)`, `(phi_j . grad ubar, phi_i)`,
/// `(grad phi_j, grad phi_i)` and `(phi_j, phi_i)`, plus the form of the
/// adjoint operator, `-(ubar . grad phi_j, phi_i) + (phi_i . grad ubar, phi_j)`,
/// assembled by its own loop.
pub fn assemble_system(basis: Arc<GalerkinBasis>, params: SteadyFlowParams) -> Result<GalerkinSystem> {
    if !params.is_finite() {
        return Err(crate::error::invalid("background parameters must be finite"));
    }
    let grid = basis.grid_arc();
    let len = grid.len();
    let n = basis.dim();
    let weights: Vec<f64> = (0..len).map(|k| grid.weight(k)).collect();
    let u = HamelFlow(params);
    let background: Vec<([f64; 2], Tensor2)> = (0..len)
        .into_par_iter()
        .map(|k| {
            let (r, t) = grid.node(k);
            (u.velocity(r, t), u.gradient(r, t))
        })
        .collect();
    if background.iter().any(|(v, g)| !v.iter().chain(g.iter().flatten()).all(|x| x.is_finite())) {
        return Err(Error::Unresolved("background flow is not finite on the grid".into()));
    }

    let pairs: Vec<(f64, f64, f64, f64, f64)> = (0..n * n)
        .into_par_iter()
        .map(|ij| {
            let (i, j) = (ij / n, ij % n);
            let (fi, fj) = (basis.field(i), basis.field(j));
            let (mut mass, mut stiff, mut tr, mut re, mut adj) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for k in 0..len {
                let w = weights[k];
                let (vi, vj) = (vel(fi, k), vel(fj, k));
                let (gi, gj) = (grad(fi, k), grad(fj, k));
                let (ub, gu) = &background[k];
                if j >= i {
                    mass += w * (vi[0] * vj[0] + vi[1] * vj[1]);
                    stiff += w * crate::frame::frobenius_dot(&gi, &gj);
                }
                tr += w * advect_dot(*ub, &gj, vi);
                re += w * advect_dot(vj, gu, vi);
                adj += w * (-advect_dot(*ub, &gj, vi) + advect_dot(vi, gu, vj));
            }
            (mass, stiff, tr, re, adj)
        })
        .collect();
    let mass = sym_from_upper(n, pairs.iter().map(|p| p.0).collect());
    let stiffness = sym_from_upper(n, pairs.iter().map(|p| p.1).collect());
    let transport = DMatrix::from_row_iterator(n, n, pairs.iter().map(|p| p.2));
    let reaction = DMatrix::from_row_iterator(n, n, pairs.iter().map(|p| p.3));
    let adjoint_advection = DMatrix::from_row_iterator(n, n, pairs.iter().map(|p| p.4));

    let scale = transport.abs().max();
    if scale > 0.0 {
        let skew = (&transport + transport.transpose()).abs().max() / scale;
        if skew > SKEW_TOLERANCE {
            return Err(Error::Unresolved(format!(
                "transport matrix skew defect {skew:.2e}: background gradient under-resolved near r = 1"
            )));
        }
    }

    let delta_hat = if classify_decay(&params) == DecayClass::Supercritical {
        None
    } else {
        analytic_criteria(&params)?.delta
    };
    Ok(GalerkinSystem {
        basis,
        params,
        mass,
        stiffness,
        transport,
        reaction,
        adjoint_advection,
        background,
        weights,
        delta_hat,
    })
}

impl GalerkinSystem {
    pub fn basis(&self) -> &GalerkinBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<GalerkinBasis> {
        self.basis.clone()
    }

    pub fn params(&self) -> SteadyFlowParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// `(ubar . grad phi_j, phi_i)`.
    pub fn transport(&self) -> &DMatrix<f64> {
        &self.transport
    }

    /// `(phi_j . grad ubar, phi_i)`.
    pub fn reaction(&self) -> &DMatrix<f64> {
        &self.reaction
    }

    pub fn advection(&self) -> DMatrix<f64> {
        &self.transport + &self.reaction
    }

    /// Matrix of the form `a_L(phi_j, phi_i)`.
    pub fn l_matrix(&self) -> DMatrix<f64> {
        &self.stiffness + &self.transport + &self.reaction
    }

    /// Matrix of the adjoint form `a_{L*}(phi_j, phi_i)`.
    pub fn l_star_matrix(&self) -> DMatrix<f64> {
        &self.stiffness + &self.adjoint_advection
    }

    /// A priori stability constant of the background: `|Phi|/2pi` plus twice
    /// the weighted supremum of its swirl part. `None` when no criterion
    /// applies (supercritical or growing backgrounds).
    pub fn delta_hat(&self) -> Option<f64> {
        self.delta_hat
    }

    /// Whether the energy estimates cover this background.
    pub fn has_theory(&self) -> bool {
        self.delta_hat.is_some_and(|d| d < 1.0)
    }

    pub fn energy(&self, xi: &DVector<f64>) -> f64 {
        xi.dot(&(&self.mass * xi))
    }

    pub fn grad_energy(&self, xi: &DVector<f64>) -> f64 {
        xi.dot(&(&self.stiffness * xi))
    }

    /// Node samples of `sum_i xi_i phi_i`.
    pub(crate) fn samples(&self, xi: &DVector<f64>) -> Vec<f64> {
        let len = self.basis.grid().len() * STRIDE;
        let mut out = vec![0.0; len];
        for (i, &c) in xi.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(self.basis.field(i)) {
                *o += c * x;
            }
        }
        out
    }

    /// `N_i(xi) = (v . grad v, phi_i)`, evaluated on the quadrature grid.
    pub fn nonlinear(&self, xi: &DVector<f64>) -> DVector<f64> {
        let s = self.samples(xi);
        let len = self.basis.grid().len();
        let w: Vec<[f64; 2]> = (0..len)
            .map(|k| {
                let (v, g) = (vel(&s, k), grad(&s, k));
                let a = [g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1]];
                [self.weights[k] * a[0], self.weights[k] * a[1]]
            })
            .collect();
        let out: Vec<f64> = (0..self.dim())
            .into_par_iter()
            .map(|i| {
                let f = self.basis.field(i);
                (0..len).map(|k| w[k][0] * f[k * STRIDE] + w[k][1] * f[k * STRIDE + 1]).sum()
            })
            .collect();
        DVector::from_vec(out)
    }

    /// `(v . grad v, v)`, zero for the exact form.
    pub fn cancellation(&self, xi: &DVector<f64>) -> f64 {
        xi.dot(&self.nonlinear(xi))
    }

    /// `(v . grad v, ubar)` for `v = sum xi_i phi_i`.
    pub fn background_pairing(&self, xi: &DVector<f64>) -> f64 {
        let s = self.samples(xi);
        (0..self.basis.grid().len())
            .map(|k| self.weights[k] * advect_dot(vel(&s, k), &grad(&s, k), self.background[k].0))
            .sum()
    }

    pub fn to_velocity(&self, xi: &DVector<f64>) -> Result<VelocityFieldPolar> {
        let s = self.samples(xi);
        let len = self.basis.grid().len();
        VelocityFieldPolar::new(
            self.basis.grid_arc(),
            (0..len).map(|k| s[k * STRIDE]).collect(),
            (0..len).map(|k| s[k * STRIDE + 1]).collect(),
            Some((0..len).map(|k| grad(&s, k)).collect()),
            Tail::Compact,
        )
    }

    /// `H^1_0` projection of a stream function onto the basis.
    pub fn project(&self, psi: &StreamField) -> Result<DVector<f64>> {
        let v = stream_to_velocity(psi, self.basis.grid())?;
        let g = v.gradient();
        let len = self.basis.grid().len();
        let b = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| {
                (0..len)
                    .map(|k| self.weights[k] * crate::frame::frobenius_dot(&g[k], &self.basis.gradient(i, k)))
                    .sum::<f64>()
            }),
        );
        self.stiffness
            .clone()
            .cholesky()
            .map(|c| c.solve(&b))
            .ok_or_else(|| Error::LinearAlgebra("stiffness matrix is not positive definite".into()))
    }

    /// Same system on a sub-basis: the rows and columns of `indices`.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let basis = Arc::new(self.basis.subset(indices)?);
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(indices.len(), indices.len(), |a, b| m[(indices[a], indices[b])]);
        Ok(Self {
            basis,
            params: self.params,
            mass: pick(&self.mass),
            stiffness: pick(&self.stiffness),
            transport: pick(&self.transport),
            reaction: pick(&self.reaction),
            adjoint_advection: pick(&self.adjoint_advection),
            background: self.background.clone(),
            weights: self.weights.clone(),
            delta_hat: self.delta_hat,
        })
    }
}
