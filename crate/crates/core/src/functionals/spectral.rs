//! Spectral differentiation on a polar grid: panel-wise Lagrange
//! interpolation through the Gauss nodes in `r`, trigonometric
//! interpolation in `theta`.

use crate::geometry::{legendre_jet, PolarGrid};

/// Differentiation matrix (row-major) of the polynomial interpolant through `x`.
pub fn lagrange_diff_matrix(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let bw: Vec<f64> = (0..n)
        .map(|j| {
            let p: f64 = (0..n).filter(|&k| k != j).map(|k| x[j] - x[k]).product();
            1.0 / p
        })
        .collect();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bw[j] / bw[i]) / (x[i] - x[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

/// First and second periodic differentiation matrices for `n` (even) equispaced nodes.
pub fn trig_diff_matrices(n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut d1 = vec![0.0; n * n];
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = (i as isize - j as isize).rem_euclid(n as isize) as usize;
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            if k == 0 {
                d2[i * n + j] = -std::f64::consts::PI.powi(2) / (3.0 * h * h) - 1.0 / 6.0;
            } else {
                let half = 0.5 * k as f64 * h;
                d1[i * n + j] = 0.5 * sign / half.tan();
                d2[i * n + j] = -0.5 * sign / half.sin().powi(2);
            }
        }
    }
    (d1, d2)
}

/// Precomputed differentiation operators for one grid.
#[derive(Debug, Clone)]
pub struct SpectralOps {
    n_theta: usize,
    panels: Vec<(usize, usize, Vec<f64>)>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl SpectralOps {
    pub fn new(grid: &PolarGrid) -> Self {
        let panels = (0..grid.n_panels())
            .map(|p| {
                let (s, e) = grid.panel_nodes(p);
                (s, e, lagrange_diff_matrix(&grid.r_nodes()[s..e]))
            })
            .collect();
        let (d1, d2) = trig_diff_matrices(grid.n_theta());
        Self { n_theta: grid.n_theta(), panels, d1, d2 }
    }

    /// `d/dr` of node values (flat index `i_r * n_theta + j`).
    pub fn d_r(&self, f: &[f64]) -> Vec<f64> {
        let nt = self.n_theta;
        let mut out = vec![0.0; f.len()];
        for (s, e, d) in &self.panels {
            let n = e - s;
            for a in 0..n {
                for j in 0..nt {
                    let mut acc = 0.0;
                    for b in 0..n {
                        acc += d[a * n + b] * f[(s + b) * nt + j];
                    }
                    out[(s + a) * nt + j] = acc;
                }
            }
        }
        out
    }

    fn ring_apply(&self, m: &[f64], f: &[f64]) -> Vec<f64> {
        let nt = self.n_theta;
        let mut out = vec![0.0; f.len()];
        for (ring_in, ring_out) in f.chunks(nt).zip(out.chunks_mut(nt)) {
            for i in 0..nt {
                ring_out[i] = (0..nt).map(|j| m[i * nt + j] * ring_in[j]).sum();
            }
        }
        out
    }

    pub fn d_theta(&self, f: &[f64]) -> Vec<f64> {
        self.ring_apply(&self.d1, f)
    }

    pub fn d_theta2(&self, f: &[f64]) -> Vec<f64> {
        self.ring_apply(&self.d2, f)
    }
}

/// Largest relative size of the unresolved spectral content of node values:
/// the upper third of the angular spectrum on each ring, and the last two
/// Legendre coefficients on each radial panel, both relative to `max |f|`.
pub fn resolution_defect(grid: &PolarGrid, f: &[f64]) -> f64 {
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let nt = grid.n_theta();
    let mut defect = 0.0f64;
    for ring in f.chunks(nt) {
        let mut high = 0.0;
        for k in (nt / 3).max(1)..=nt / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in ring.iter().enumerate() {
                let a = k as f64 * grid.theta(j);
                re += v * a.cos();
                im -= v * a.sin();
            }
            high += (re * re + im * im) / (nt * nt) as f64;
        }
        defect = defect.max(high.sqrt() / scale);
    }
    for p in 0..grid.n_panels() {
        let (s, e) = grid.panel_nodes(p);
        let n = e - s;
        if n < 3 {
            continue;
        }
        let (a, b) = (grid.breakpoints()[p], grid.breakpoints()[p + 1]);
        let half = 0.5 * (b - a);
        let x: Vec<f64> = grid.r_nodes()[s..e].iter().map(|r| (r - 0.5 * (a + b)) / half).collect();
        let w: Vec<f64> = grid.r_weights()[s..e].iter().map(|w| w / half).collect();
        for j in 0..nt {
            let mut tail = 0.0;
            for l in [n - 2, n - 1] {
                let c: f64 = (0..n).map(|i| w[i] * f[(s + i) * nt + j] * legendre_jet(l, x[i]).0).sum();
                tail += (0.5 * (2 * l + 1) as f64 * c).abs();
            }
            defect = defect.max(tail / scale);
        }
    }
    defect
}
