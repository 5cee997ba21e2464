//! Lower bounds on `delta* = sup_v B(v)` by search over compactly supported
//! stream modes, and the report combining them with the analytic criteria.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stream::{ModalStream, Phase, StreamMode};
use crate::error::{Error, Result};
use crate::frame::{advect_dot, frobenius_dot, Tensor2};
use crate::geometry::{build_polar_grid, PolarGrid, Stretch};
use crate::io::{fmt_f64, CsvTable};
use crate::steady_flows::{
    weighted_sup_critical, weighted_sup_subcritical, HamelFlow, HamelSwirl, SteadyField, SteadyFlowParams,
};

/// Search budget for [`estimate_delta_star`].
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSearch {
    pub n_random: usize,
    pub ascent_steps: usize,
    pub basis_dim: usize,
    /// Modes live on `[1, support_radius]`.
    pub support_radius: f64,
    pub max_m: u32,
    pub seed: u64,
    /// Externally computed quotients of known test fields.
    pub witnesses: Vec<Witness>,
}

impl Default for DeltaSearch {
    fn default() -> Self {
        Self {
            n_random: 32,
            ascent_steps: 300,
            basis_dim: 35,
            support_radius: 8.0,
            max_m: 3,
            seed: 0,
            witnesses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub ratio: f64,
}

/// Field achieving the reported `delta_hat`.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    None,
    /// Best basis combination, normalized to unit Dirichlet energy.
    Basis(ModalStream),
    Witness(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SatisfiedByCriterion,
    RefutedByWitness,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::SatisfiedByCriterion => "satisfied_by_criterion",
            Verdict::RefutedByWitness => "refuted_by_witness",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Values of the sufficient conditions for a Hamel background.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriterionValues {
    /// `|phi| / 2pi`, the sharp bound for the flux part.
    pub flux_bound: Option<f64>,
    /// `sup r log r |u_swirl|` of the non-flux part.
    pub weighted_sup_subcritical: Option<f64>,
    /// `sup r |u|` of the whole field.
    pub weighted_sup_critical: Option<f64>,
    /// `flux_bound + 2 weighted_sup_subcritical`, when finite.
    pub delta: Option<f64>,
}

/// Evaluates the analytic criteria for `u_{phi, mu, A}`.
///
/// The flux part is bounded by `|phi|/2pi`; the remainder through the
/// logarithmic Hardy inequality with constant 2. Divergent suprema leave
/// the corresponding entry empty.
pub fn analytic_criteria(p: &SteadyFlowParams) -> Result<CriterionValues> {
    let grid = build_polar_grid(256.0, 512, 8, Stretch::Geometric)?;
    let flux = p.phi.abs() / (2.0 * PI);
    let sub = optional(weighted_sup_subcritical(&HamelSwirl(*p), &grid))?;
    let crit = optional(weighted_sup_critical(&HamelFlow(*p), &grid))?;
    Ok(CriterionValues {
        flux_bound: Some(flux),
        weighted_sup_subcritical: sub,
        weighted_sup_critical: crit,
        delta: sub.map(|s| flux + 2.0 * s),
    })
}

fn optional(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Divergent(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub delta_hat: f64,
    pub certificate: Certificate,
    pub criterion: CriterionValues,
    pub verdict: Verdict,
    /// Best quotient of every random trajectory, by trajectory index.
    pub trials: Vec<(usize, f64)>,
    /// Stationarity of the best trajectory.
    pub converged: bool,
}

impl HypothesisReport {
    fn decide(delta_hat: f64, criterion: &CriterionValues) -> Verdict {
        if delta_hat >= 1.0 {
            Verdict::RefutedByWitness
        } else if criterion.delta.is_some_and(|d| d < 1.0) {
            Verdict::SatisfiedByCriterion
        } else {
            Verdict::Inconclusive
        }
    }

    /// Attaches criterion values and recomputes the verdict.
    pub fn with_criterion(mut self, criterion: CriterionValues) -> Self {
        self.verdict = Self::decide(self.delta_hat, &criterion);
        self.criterion = criterion;
        self
    }

    /// Flat `key = value` record.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "divergent".to_string(), fmt_f64);
        let mut s = String::new();
        let _ = writeln!(s, "verdict = {}", self.verdict);
        let _ = writeln!(s, "delta_hat = {}", fmt_f64(self.delta_hat));
        let cert = match &self.certificate {
            Certificate::None => "none".to_string(),
            Certificate::Basis(m) => format!("basis:{}", m.modes.len()),
            Certificate::Witness(l) => format!("witness:{l}"),
        };
        let _ = writeln!(s, "certificate = {cert}");
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "n_trials = {}", self.trials.len());
        let _ = writeln!(s, "criterion_flux_bound = {}", opt(self.criterion.flux_bound));
        let _ = writeln!(s, "criterion_weighted_sup_subcritical = {}", opt(self.criterion.weighted_sup_subcritical));
        let _ = writeln!(s, "criterion_weighted_sup_critical = {}", opt(self.criterion.weighted_sup_critical));
        let _ = writeln!(s, "criterion_delta = {}", opt(self.criterion.delta));
        s
    }

    pub fn trials_table(&self) -> CsvTable {
        let mut t = CsvTable::new("hypothesis-delta-star", &["trial", "delta_hat"]);
        for (i, d) in &self.trials {
            t.push_raw(vec![i.to_string(), fmt_f64(*d)]);
        }
        t
    }
}

/// Basis of `dim` (rounded up) stream modes on `[1, radius]`: swirl modes
/// for `m = 0`, clamped modes in both phases for `1 <= m <= max_m`.
pub fn search_basis(dim: usize, radius: f64, max_m: u32) -> Vec<StreamMode> {
    let blocks = 1 + 2 * max_m as usize;
    let n_rad = dim.div_ceil(blocks).max(1);
    let mut modes = Vec::with_capacity(blocks * n_rad);
    for n in 0..n_rad {
        modes.push(StreamMode::swirl(n, 1.0, radius));
    }
    for m in 1..=max_m {
        for phase in [Phase::Cos, Phase::Sin] {
            for n in 0..n_rad {
                modes.push(StreamMode::clamped(m, phase, n, 1.0, radius));
            }
        }
    }
    modes
}

/// Quadrature grid exact enough for products of three fields built from
/// `modes` against a smooth background.
pub fn search_grid(modes: &[StreamMode], radius: f64, max_m: u32) -> Result<PolarGrid> {
    let max_deg = modes.iter().map(|m| m.degree).max().unwrap_or(0);
    let n_theta = (4 * max_m as usize + 8).next_multiple_of(2);
    PolarGrid::annulus(1.0, radius, 16, max_deg + 10, n_theta, Stretch::Geometric)
}

/// Sampled velocity and gradient of each mode.
pub(crate) fn sample_modes(modes: &[StreamMode], grid: &PolarGrid) -> Vec<(Vec<[f64; 2]>, Vec<Tensor2>)> {
    modes
        .par_iter()
        .map(|m| {
            let mut v = Vec::with_capacity(grid.len());
            let mut g = Vec::with_capacity(grid.len());
            for k in 0..grid.len() {
                let (r, t) = grid.node(k);
                let j = m.jet(r, t);
                v.push(j.velocity(r));
                g.push(j.velocity_gradient(r));
            }
            (v, g)
        })
        .collect()
}

/// `(K, N)`: Dirichlet Gram matrix and symmetrized pairing
/// `N_ij = ((phi_i . grad phi_j, u) + (phi_j . grad phi_i, u)) / 2`.
fn quotient_matrices(modes: &[StreamMode], ubar: &dyn SteadyField, grid: &PolarGrid) -> (DMatrix<f64>, DMatrix<f64>) {
    let samples = sample_modes(modes, grid);
    let u: Vec<[f64; 2]> = (0..grid.len())
        .map(|k| {
            let (r, t) = grid.node(k);
            ubar.velocity(r, t)
        })
        .collect();
    let w: Vec<f64> = (0..grid.len()).map(|k| grid.weight(k)).collect();
    let d = modes.len();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .into_par_iter()
        .map(|i| {
            let (vi, gi) = &samples[i];
            let mut krow = vec![0.0; d];
            let mut nrow = vec![0.0; d];
            for j in 0..d {
                let (_, gj) = &samples[j];
                let (mut ks, mut ns) = (0.0, 0.0);
                for k in 0..grid.len() {
                    ks += w[k] * frobenius_dot(&gi[k], &gj[k]);
                    ns += w[k] * advect_dot(vi[k], &gj[k], u[k]);
                }
                krow[j] = ks;
                nrow[j] = ns;
            }
            (krow, nrow)
        })
        .collect();
    let mut kmat = DMatrix::zeros(d, d);
    let mut nmat = DMatrix::zeros(d, d);
    for (i, (kr, nr)) in rows.into_iter().enumerate() {
        for j in 0..d {
            kmat[(i, j)] = kr[j];
            nmat[(i, j)] = nr[j];
        }
    }
    let kmat = (&kmat + kmat.transpose()) * 0.5;
    let nmat = (&nmat + nmat.transpose()) * 0.5;
    (kmat, nmat)
}

/// Whitened quotient matrix `S = L^{-1} N L^{-T}` with `K = L L^T`, and `L`.
pub(crate) fn whitened_quotient(
    modes: &[StreamMode],
    ubar: &dyn SteadyField,
    grid: &PolarGrid,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (k, n) = quotient_matrices(modes, ubar, grid);
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("Dirichlet Gram matrix of the search basis is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&n)
        .ok_or_else(|| Error::LinearAlgebra("triangular solve failed".into()))?;
    let s = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::LinearAlgebra("triangular solve failed".into()))?;
    let s = (&s + s.transpose()) * 0.5;
    Ok((s, l))
}

struct Trajectory {
    best: f64,
    y: DVector<f64>,
    residual: f64,
}

fn ascend(s: &DMatrix<f64>, seed: u64, index: usize, steps: usize) -> Trajectory {
    let d = s.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut y = DVector::from_fn(d, |_, _| rng.random_range(-1.0..=1.0));
    if y.norm() == 0.0 {
        y[0] = 1.0;
    }
    y /= y.norm();
    let eta = 1.0 / s.norm().max(f64::MIN_POSITIVE);
    let mut best = (s * &y).dot(&y);
    let mut best_y = y.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..steps {
        let sy = s * &y;
        let b = sy.dot(&y);
        let g = &sy - &y * b;
        residual = g.norm();
        if b > best {
            best = b;
            best_y = y.clone();
        }
        if residual <= 1e-14 * (1.0 + b.abs()) {
            break;
        }
        y += g * eta;
        y /= y.norm();
    }
    let b = (s * &y).dot(&y);
    if b > best {
        best = b;
        best_y = y;
    }
    Trajectory { best, y: best_y, residual }
}

/// Lower bound on `sup_v B(v)` from random starts followed by projected
/// gradient ascent of the whitened quotient on the unit sphere.
///
/// Trajectory `i` draws its start from ChaCha stream `i` of the seed, so
/// enlarging `n_random` only adds trajectories and never lowers the result.
/// Because `B` tends to 0 for fields translated to infinity, the true
/// supremum is non-negative and the reported value is clamped at 0.
pub fn estimate_delta_star(ubar: &dyn SteadyField, search: &DeltaSearch) -> Result<HypothesisReport> {
    if !(search.support_radius > 1.0) {
        return Err(Error::InvalidArgument("search support radius must exceed 1".into()));
    }
    let modes = search_basis(search.basis_dim.max(1), search.support_radius, search.max_m);
    let grid = search_grid(&modes, search.support_radius, search.max_m)?;
    let (s, l) = whitened_quotient(&modes, ubar, &grid)?;

    let trajectories: Vec<Trajectory> = (0..search.n_random)
        .into_par_iter()
        .map(|i| ascend(&s, search.seed, i, search.ascent_steps))
        .collect();
    let trials: Vec<(usize, f64)> = trajectories.iter().enumerate().map(|(i, t)| (i, t.best)).collect();

    let mut delta_hat = 0.0;
    let mut certificate = Certificate::None;
    let mut converged = true;
    let mut best_idx: Option<usize> = None;
    for (i, t) in trajectories.iter().enumerate() {
        if t.best > delta_hat {
            delta_hat = t.best;
            best_idx = Some(i);
        }
    }
    if let Some(i) = best_idx {
        let t = &trajectories[i];
        converged = t.residual <= 1e-6 * (1.0 + t.best.abs());
        let xi = l
            .transpose()
            .solve_upper_triangular(&t.y)
            .ok_or_else(|| Error::LinearAlgebra("triangular solve failed".into()))?;
        let field = modes
            .iter()
            .zip(xi.iter())
            .map(|(m, c)| m.with_coef(*c))
            .collect();
        certificate = Certificate::Basis(ModalStream::new(field));
    }
    for w in &search.witnesses {
        if w.ratio > delta_hat {
            delta_hat = w.ratio;
            certificate = Certificate::Witness(w.label.clone());
        }
    }
    let criterion = CriterionValues::default();
    Ok(HypothesisReport {
        delta_hat,
        verdict: HypothesisReport::decide(delta_hat, &criterion),
        certificate,
        criterion,
        trials,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{hypothesis_ratio, StreamField};

    fn top_eigenvalue(ubar: &dyn SteadyField, search: &DeltaSearch) -> f64 {
        let modes = search_basis(search.basis_dim, search.support_radius, search.max_m);
        let grid = search_grid(&modes, search.support_radius, search.max_m).unwrap();
        let (s, _) = whitened_quotient(&modes, ubar, &grid).unwrap();
        s.symmetric_eigen().eigenvalues.max()
    }

    #[test]
    fn zero_background_gives_zero() {
        let r = estimate_delta_star(&HamelFlow(SteadyFlowParams::zero()), &DeltaSearch::default()).unwrap();
        assert_eq!(r.delta_hat, 0.0);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        let crit = analytic_criteria(&SteadyFlowParams::zero()).unwrap();
        assert_eq!(crit.delta, Some(0.0));
        assert_eq!(r.with_criterion(crit).verdict, Verdict::SatisfiedByCriterion);
    }

    #[test]
    fn ascent_reaches_generalized_eigenvalue() {
        let ubar = HamelFlow(SteadyFlowParams::new(0.0, 2.0 * PI, 0.0));
        let search = DeltaSearch { n_random: 4, ascent_steps: 3000, basis_dim: 21, ..DeltaSearch::default() };
        let lam = top_eigenvalue(&ubar, &search);
        let r = estimate_delta_star(&ubar, &search).unwrap();
        assert!(r.delta_hat <= lam + 1e-10);
        assert!(r.delta_hat >= lam - 1e-6, "{} vs {lam}", r.delta_hat);
        // the certificate reproduces the reported quotient
        let Certificate::Basis(field) = &r.certificate else { panic!("expected basis certificate") };
        let modes = search_basis(21, 8.0, 3);
        let grid = search_grid(&modes, 8.0, 3).unwrap();
        let b = hypothesis_ratio(&StreamField::analytic(field.clone()), &ubar, &grid).unwrap();
        assert!((b - r.delta_hat).abs() < 1e-8);
    }

    #[test]
    fn flux_carrier_below_analytic_bound() {
        let ubar = HamelFlow(SteadyFlowParams::flux_carrier(PI));
        let r = estimate_delta_star(&ubar, &DeltaSearch::default()).unwrap();
        assert!(r.delta_hat <= 0.5 + 1e-9);
        let crit = analytic_criteria(&SteadyFlowParams::flux_carrier(PI)).unwrap();
        assert!((crit.delta.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(r.with_criterion(crit).verdict, Verdict::SatisfiedByCriterion);
    }

    #[test]
    fn monotone_in_budget() {
        let ubar = HamelFlow(SteadyFlowParams::new(0.5, 3.0, 0.0));
        let mut prev = f64::NEG_INFINITY;
        for n in [1, 2, 5, 9] {
            let search = DeltaSearch { n_random: n, ascent_steps: 20, seed: 77, ..DeltaSearch::default() };
            let r = estimate_delta_star(&ubar, &search).unwrap();
            assert!(r.delta_hat >= prev);
            prev = r.delta_hat;
            let again = estimate_delta_star(&ubar, &search).unwrap();
            assert_eq!(again.delta_hat, r.delta_hat);
        }
    }

    #[test]
    fn witness_refutes() {
        let ubar = HamelFlow(SteadyFlowParams::new(0.0, 2.0 * PI, 0.0));
        let search = DeltaSearch {
            n_random: 2,
            ascent_steps: 10,
            witnesses: vec![Witness { label: "alpha=0.1".into(), ratio: 4.9 }],
            ..DeltaSearch::default()
        };
        let r = estimate_delta_star(&ubar, &search).unwrap();
        assert_eq!(r.verdict, Verdict::RefutedByWitness);
        assert_eq!(r.certificate, Certificate::Witness("alpha=0.1".into()));
        let kv = r.to_key_value();
        assert!(kv.contains("verdict = refuted_by_witness"));
        assert_eq!(r.trials_table().rows.len(), 2);
    }
}
