use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_legendre, CompensatedSum};
use crate::error::{invalid, Error, Result};

/// Nodes per Gauss-Legendre radial panel when the caller does not choose.
pub const DEFAULT_PANEL_ORDER: usize = 8;

/// Radial panel distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Stretch {
    Uniform,
    #[default]
    Geometric,
    /// Quadratic clustering toward r = 1.
    Algebraic,
}

impl FromStr for Stretch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Stretch::Uniform),
            "geometric" => Ok(Stretch::Geometric),
            "algebraic" => Ok(Stretch::Algebraic),
            other => Err(Error::Parse(format!("unknown stretch '{other}'"))),
        }
    }
}

impl Stretch {
    fn name(self) -> &'static str {
        match self {
            Stretch::Uniform => "uniform",
            Stretch::Geometric => "geometric",
            Stretch::Algebraic => "algebraic",
        }
    }

    fn breakpoints(self, inner: f64, outer: f64, n_panels: usize) -> Vec<f64> {
        let n = n_panels as f64;
        let mut b: Vec<f64> = (0..=n_panels)
            .map(|i| {
                let s = i as f64 / n;
                match self {
                    Stretch::Uniform => inner + (outer - inner) * s,
                    Stretch::Geometric => inner * (outer / inner).powf(s),
                    Stretch::Algebraic => inner + (outer - inner) * s * s,
                }
            })
            .collect();
        b[0] = inner;
        b[n_panels] = outer;
        b
    }
}

/// Tensor-product quadrature grid on the annulus `[r_inner, r_outer] x [0, 2pi)`.
///
/// Radial direction: composite Gauss-Legendre panels between `breakpoints`.
/// Angular direction: `n_theta` equispaced nodes (trapezoid rule, exact for
/// trigonometric polynomials of degree below `n_theta`).
/// Flat node index is `i_r * n_theta + j_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    r_nodes: Vec<f64>,
    r_weights: Vec<f64>,
    breakpoints: Vec<f64>,
    panel_of: Vec<usize>,
    n_theta: usize,
    stretch: Stretch,
}

/// Flattened quadrature rule: nodes `(r, theta)` with area weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn total_weight(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for w in &self.weights {
            acc.add(*w);
        }
        acc.value()
    }
}

/// Builds a grid covering `[1, r_max] x [0, 2pi)` with exactly `n_r` radial nodes.
///
/// The radial nodes are split into `max(1, n_r / 8)` Gauss panels.
pub fn build_polar_grid(r_max: f64, n_r: usize, n_theta: usize, stretch: Stretch) -> Result<PolarGrid> {
    if !(r_max > 1.0) || !r_max.is_finite() {
        return Err(invalid(format!("r_max must be a finite value > 1, got {r_max}")));
    }
    if n_r < 8 {
        return Err(invalid(format!("n_r must be >= 8, got {n_r}")));
    }
    let n_panels = (n_r / DEFAULT_PANEL_ORDER).max(1);
    let base = n_r / n_panels;
    let extra = n_r % n_panels;
    let orders: Vec<usize> = (0..n_panels).map(|p| base + usize::from(p < extra)).collect();
    let breaks = stretch.breakpoints(1.0, r_max, n_panels);
    PolarGrid::with_orders(breaks, &orders, n_theta, stretch)
}

impl PolarGrid {
    /// Grid from explicit panel breakpoints, every panel with `order` Gauss nodes.
    pub fn from_breakpoints(breakpoints: Vec<f64>, order: usize, n_theta: usize) -> Result<Self> {
        let orders = vec![order; breakpoints.len().saturating_sub(1)];
        Self::with_orders(breakpoints, &orders, n_theta, Stretch::Uniform)
    }

    /// Grid on `[inner, outer]` with `n_panels` panels of `order` nodes.
    pub fn annulus(
        inner: f64,
        outer: f64,
        n_panels: usize,
        order: usize,
        n_theta: usize,
        stretch: Stretch,
    ) -> Result<Self> {
        if !(inner >= 1.0) || !(outer > inner) {
            return Err(invalid(format!("annulus needs 1 <= inner < outer, got [{inner}, {outer}]")));
        }
        if n_panels == 0 {
            return Err(invalid("annulus needs at least one panel"));
        }
        let breaks = stretch.breakpoints(inner, outer, n_panels);
        Self::with_orders(breaks, &vec![order; n_panels], n_theta, stretch)
    }

    fn with_orders(breakpoints: Vec<f64>, orders: &[usize], n_theta: usize, stretch: Stretch) -> Result<Self> {
        if n_theta < 4 || !n_theta.is_multiple_of(2) {
            return Err(invalid(format!("n_theta must be even and >= 4, got {n_theta}")));
        }
        if breakpoints.len() < 2 || orders.len() + 1 != breakpoints.len() {
            return Err(invalid("need at least one radial panel"));
        }
        if !(breakpoints[0] >= 1.0) {
            return Err(invalid(format!("grid must lie in r >= 1, got {}", breakpoints[0])));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("panel breakpoints must be strictly increasing"));
        }
        let mut r_nodes = Vec::new();
        let mut r_weights = Vec::new();
        let mut panel_of = Vec::new();
        for (p, (w, &order)) in breakpoints.windows(2).zip(orders).enumerate() {
            if order == 0 {
                return Err(invalid("panel order must be positive"));
            }
            let (x, wt) = gauss_legendre(order);
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[1] + w[0]);
            for (xi, wi) in x.iter().zip(&wt) {
                r_nodes.push(mid + half * xi);
                r_weights.push(half * wi);
                panel_of.push(p);
            }
        }
        Ok(Self { r_nodes, r_weights, breakpoints, panel_of, n_theta, stretch })
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    /// Weights for `int g(r) dr` (no Jacobian).
    pub fn r_weights(&self) -> &[f64] {
        &self.r_weights
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn panel_of(&self, i_r: usize) -> usize {
        self.panel_of[i_r]
    }

    pub fn n_r(&self) -> usize {
        self.r_nodes.len()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stretch(&self) -> Stretch {
        self.stretch
    }

    pub fn r_inner(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn r_outer(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty breakpoints")
    }

    pub fn d_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.d_theta() * j as f64
    }

    /// Index of the node diametrically opposite to angle index `j`.
    pub fn antipode(&self, j: usize) -> usize {
        (j + self.n_theta / 2) % self.n_theta
    }

    pub fn index(&self, i_r: usize, j: usize) -> usize {
        i_r * self.n_theta + j
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        let i = idx / self.n_theta;
        let j = idx % self.n_theta;
        (self.r_nodes[i], self.theta(j))
    }

    /// Area weight `w_r * r * dtheta` of ring `i_r`.
    pub fn ring_weight(&self, i_r: usize) -> f64 {
        self.r_weights[i_r] * self.r_nodes[i_r] * self.d_theta()
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.ring_weight(idx / self.n_theta)
    }

    /// Area-measure integral of node values (compensated).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let mut acc = CompensatedSum::new();
        for i in 0..self.n_r() {
            let w = self.ring_weight(i);
            let mut ring = CompensatedSum::new();
            for v in &values[i * self.n_theta..(i + 1) * self.n_theta] {
                ring.add(*v);
            }
            acc.add(w * ring.value());
        }
        acc.value()
    }

    /// Same as [`integrate`](Self::integrate) for a node function.
    pub fn integrate_fn<F: Fn(usize, f64, f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = CompensatedSum::new();
        for i in 0..self.n_r() {
            let w = self.ring_weight(i);
            let r = self.r_nodes[i];
            let mut ring = CompensatedSum::new();
            for j in 0..self.n_theta {
                ring.add(f(self.index(i, j), r, self.theta(j)));
            }
            acc.add(w * ring.value());
        }
        acc.value()
    }

    /// Sum of area weights over rings with `a <= r <= b`.
    pub fn annulus_weight(&self, a: f64, b: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for i in 0..self.n_r() {
            let r = self.r_nodes[i];
            if r >= a && r <= b {
                acc.add(self.ring_weight(i) * self.n_theta as f64);
            }
        }
        acc.value()
    }

    pub fn quadrature_rule(&self) -> QuadratureRule {
        let mut nodes = Vec::with_capacity(self.len());
        let mut weights = Vec::with_capacity(self.len());
        for idx in 0..self.len() {
            nodes.push(self.node(idx));
            weights.push(self.weight(idx));
        }
        QuadratureRule { nodes, weights }
    }

    /// Same panels with every panel order and the angular count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut orders = vec![0usize; self.breakpoints.len() - 1];
        for p in &self.panel_of {
            orders[*p] += 1;
        }
        let orders: Vec<usize> = orders.iter().map(|o| o * factor).collect();
        Self::with_orders(self.breakpoints.clone(), &orders, self.n_theta * factor, self.stretch)
    }

    /// Flat radial index range `[start, end)` of the nodes in panel `p`.
    pub(crate) fn panel_nodes(&self, p: usize) -> (usize, usize) {
        let start = self.panel_of.iter().position(|&q| q == p).expect("panel exists");
        let end = self.panel_of.iter().rposition(|&q| q == p).expect("panel exists") + 1;
        (start, end)
    }

    pub fn n_panels(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Serializes to the versioned text table described in the README
    /// (`# exflow-grid v1` header, then `r theta weight` rows).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("# exflow-grid v1\n");
        let _ = writeln!(out, "# stretch {}", self.stretch.name());
        let _ = writeln!(out, "# n_r {} n_theta {}", self.n_r(), self.n_theta);
        out.push_str("# breakpoints");
        for b in &self.breakpoints {
            let _ = write!(out, " {}", crate::io::fmt_f64(*b));
        }
        out.push('\n');
        out.push_str("r,theta,weight\n");
        for idx in 0..self.len() {
            let (r, t) = self.node(idx);
            let _ = writeln!(
                out,
                "{},{},{}",
                crate::io::fmt_f64(r),
                crate::io::fmt_f64(t),
                crate::io::fmt_f64(self.weight(idx))
            );
        }
        out
    }

    /// Parses a table written by [`to_table`](Self::to_table).
    pub fn from_table(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid table".into()))?;
        if header.trim() != "# exflow-grid v1" {
            return Err(Error::Parse(format!("unsupported grid header '{header}'")));
        }
        let mut stretch = Stretch::Uniform;
        let mut n_r = None;
        let mut n_theta = None;
        let mut breaks = Vec::new();
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# stretch ") {
                stretch = rest.trim().parse()?;
            } else if let Some(rest) = line.strip_prefix("# n_r ") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 || parts[1] != "n_theta" {
                    return Err(Error::Parse(format!("bad size line '{line}'")));
                }
                n_r = Some(parse_usize(parts[0])?);
                n_theta = Some(parse_usize(parts[2])?);
            } else if let Some(rest) = line.strip_prefix("# breakpoints") {
                breaks = rest.split_whitespace().map(parse_f64).collect::<Result<_>>()?;
            } else if line == "r,theta,weight" || line.starts_with('#') {
                continue;
            } else {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 3 {
                    return Err(Error::Parse(format!("bad row '{line}'")));
                }
                rows.push((parse_f64(cols[0])?, parse_f64(cols[1])?, parse_f64(cols[2])?));
            }
        }
        let n_r = n_r.ok_or_else(|| Error::Parse("missing size line".into()))?;
        let n_theta = n_theta.ok_or_else(|| Error::Parse("missing size line".into()))?;
        if rows.len() != n_r * n_theta {
            return Err(Error::Parse(format!("expected {} rows, got {}", n_r * n_theta, rows.len())));
        }
        // Recover per-panel orders from the radial nodes.
        let mut orders = vec![0usize; breaks.len().saturating_sub(1)];
        for i in 0..n_r {
            let r = rows[i * n_theta].0;
            let p = breaks
                .windows(2)
                .position(|w| r > w[0] && r < w[1])
                .ok_or_else(|| Error::Parse(format!("node r={r} outside panels")))?;
            orders[p] += 1;
        }
        let grid = Self::with_orders(breaks, &orders, n_theta, stretch)?;
        for (idx, (r, t, w)) in rows.iter().enumerate() {
            let (gr, gt) = grid.node(idx);
            let gw = grid.weight(idx);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
            if !close(*r, gr) || !close(*t, gt) || !close(*w, gw) {
                return Err(Error::Parse(format!("row {idx} inconsistent with header")));
            }
        }
        Ok(grid)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("'{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_area_small_uniform_grid() {
        let g = build_polar_grid(2.0, 8, 4, Stretch::Uniform).unwrap();
        let total = g.quadrature_rule().total_weight();
        assert!((total - 3.0 * PI).abs() < 1e-12 * 3.0 * PI);
        assert_eq!(g.n_r(), 8);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(build_polar_grid(1.0, 8, 4, Stretch::Uniform).is_err());
        assert!(build_polar_grid(2.0, 8, 5, Stretch::Uniform).is_err());
        assert!(build_polar_grid(2.0, 7, 4, Stretch::Uniform).is_err());
        assert!(build_polar_grid(2.0, 8, 2, Stretch::Uniform).is_err());
    }

    #[test]
    fn inverse_cube_over_geometric_grid() {
        // int_{1<=r<=64} r^{-3} dA = 2 pi (1 - 1/64)
        let g = build_polar_grid(64.0, 256, 128, Stretch::Geometric).unwrap();
        let v = g.integrate_fn(|_, r, _| r.powi(-3));
        let exact = 2.0 * PI * (1.0 - 1.0 / 64.0);
        assert!(((v - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn node_counts_and_monotonicity() {
        for (n_r, stretch) in [(8, Stretch::Uniform), (37, Stretch::Geometric), (100, Stretch::Algebraic)] {
            let g = build_polar_grid(10.0, n_r, 8, stretch).unwrap();
            assert_eq!(g.n_r(), n_r);
            assert!(g.r_nodes()[0] >= 1.0);
            assert!(g.r_nodes().windows(2).all(|w| w[1] > w[0]));
            assert!(g.r_weights().iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn every_panel_annulus_has_exact_area() {
        let g = build_polar_grid(50.0, 96, 16, Stretch::Geometric).unwrap();
        let b = g.breakpoints().to_vec();
        for i in 0..b.len() {
            for j in (i + 1)..b.len() {
                let area = PI * (b[j] * b[j] - b[i] * b[i]);
                let w = g.annulus_weight(b[i], b[j]);
                assert!(((w - area) / area).abs() < 1e-12, "[{}, {}]", b[i], b[j]);
            }
        }
    }

    #[test]
    fn table_roundtrip() {
        let g = build_polar_grid(5.0, 20, 8, Stretch::Algebraic).unwrap();
        let text = g.to_table();
        let back = PolarGrid::from_table(&text).unwrap();
        assert_eq!(back.n_r(), g.n_r());
        assert_eq!(back.n_theta(), g.n_theta());
        for (a, b) in back.r_nodes().iter().zip(g.r_nodes()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(PolarGrid::from_table("# something else\n").is_err());
    }
}
