use super::grid::{PolarGrid, Stretch};
use crate::error::{invalid, Error, Result};
use crate::functionals::{stream_to_velocity, StreamField};

/// Dyadic shell decomposition of `B_{R 2^N} \ B`.
///
/// `S_0 = [1, R)` touches the obstacle, `S_n = [R 2^{n-1}, R 2^n)` for
/// `n >= 1`, so every `S_n` with `n >= 1` is the dilation of `S_1` by
/// `2^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellDecomposition {
    base_radius: f64,
    n_shells: usize,
}

impl ShellDecomposition {
    /// `base_radius` is the outer radius of `S_0`; it must exceed the obstacle radius 1.
    pub fn new(base_radius: f64, n_shells: usize) -> Result<Self> {
        if !(base_radius > 1.0) {
            return Err(invalid(format!("base radius must exceed 1, got {base_radius}")));
        }
        if n_shells == 0 {
            return Err(invalid("need at least one shell beyond S_0"));
        }
        Ok(Self { base_radius, n_shells })
    }

    pub fn base_radius(&self) -> f64 {
        self.base_radius
    }

    pub fn n_shells(&self) -> usize {
        self.n_shells
    }

    /// Radial extent `[inner, outer)` of shell `n`.
    pub fn shell(&self, n: usize) -> (f64, f64) {
        if n == 0 {
            (1.0, self.base_radius)
        } else {
            let inner = self.base_radius * 2f64.powi(n as i32 - 1);
            (inner, 2.0 * inner)
        }
    }

    pub fn outer_radius(&self) -> f64 {
        self.shell(self.n_shells).1
    }

    /// Index of the shell containing radius `r`, if inside the decomposition.
    pub fn shell_of(&self, r: f64) -> Option<usize> {
        (0..=self.n_shells).find(|&n| {
            let (a, b) = self.shell(n);
            r >= a && r < b
        })
    }

    /// Indicator of shell `n` at radius `r`.
    pub fn indicator(&self, n: usize, r: f64) -> f64 {
        let (a, b) = self.shell(n);
        if r >= a && r < b { 1.0 } else { 0.0 }
    }

    /// Quadrature grid of shell `n`, panels aligned with its edges.
    pub fn shell_grid(&self, n: usize, n_panels: usize, order: usize, n_theta: usize) -> Result<PolarGrid> {
        let (a, b) = self.shell(n);
        PolarGrid::annulus(a, b, n_panels, order, n_theta, Stretch::Uniform)
    }
}

/// Rayleigh quotient `||v/|x|||^2 / ||grad v||^2` of a probe on one shell.
///
/// For `n >= 1` the Cartesian mean of `v` over the shell is removed first.
/// Both norms are dilation invariant in two dimensions, so the quotient of a
/// dilated probe on `S_n` equals the quotient of the original on `S_1`.
/// Returns `None` for probes with vanishing gradient on the shell.
pub fn shell_quotient(probe: &StreamField, grid: &PolarGrid, remove_mean: bool) -> Result<Option<f64>> {
    let v = stream_to_velocity(probe, grid)?;
    let (vr, vt) = (v.vr(), v.vt());
    let (mut mx, mut my) = (0.0, 0.0);
    if remove_mean {
        let area = grid.integrate_fn(|_, _, _| 1.0);
        let cx = grid.integrate_fn(|k, _, t| vr[k] * t.cos() - vt[k] * t.sin());
        let cy = grid.integrate_fn(|k, _, t| vr[k] * t.sin() + vt[k] * t.cos());
        mx = cx / area;
        my = cy / area;
    }
    let num = grid.integrate_fn(|k, r, t| {
        let ar = vr[k] - (mx * t.cos() + my * t.sin());
        let at = vt[k] - (-mx * t.sin() + my * t.cos());
        (ar * ar + at * at) / (r * r)
    });
    let den = crate::functionals::h1_seminorm(&v).powi(2);
    if den <= 1e-300 {
        return Ok(None);
    }
    Ok(Some(num / den))
}

/// Measured Poincare-type constants `(C0, C1)` of the shell decomposition:
/// maximized shell quotients over the probe set, on `S_0` (probes vanish on
/// the obstacle) and on `S_1` (mean removed). `C_n = C_1` for `n >= 1`.
pub fn shell_poincare_constants(decomp: &ShellDecomposition, probes: &[StreamField]) -> Result<(f64, f64)> {
    if probes.is_empty() {
        return Err(invalid("empty probe set"));
    }
    let g0 = decomp.shell_grid(0, 4, 12, 32)?;
    let g1 = decomp.shell_grid(1, 4, 12, 32)?;
    let mut c0: Option<f64> = None;
    let mut c1: Option<f64> = None;
    for p in probes {
        if let Some(q) = shell_quotient(p, &g0, false)? {
            c0 = Some(c0.map_or(q, |c| c.max(q)));
        }
        if let Some(q) = shell_quotient(p, &g1, true)? {
            c1 = Some(c1.map_or(q, |c| c.max(q)));
        }
    }
    match (c0, c1) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Degenerate("every probe has zero gradient on a shell".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{ModalStream, Rescaled};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shells_tile_the_ball() {
        let d = ShellDecomposition::new(2.0, 5).unwrap();
        let grid = crate::geometry::build_polar_grid(d.outer_radius() * 0.999, 64, 4, Stretch::Geometric).unwrap();
        for &r in grid.r_nodes() {
            let s: f64 = (0..=d.n_shells()).map(|n| d.indicator(n, r)).sum();
            assert_eq!(s, 1.0, "r = {r}");
        }
        for n in 0..d.n_shells() {
            assert_eq!(d.shell(n).1, d.shell(n + 1).0);
        }
    }

    #[test]
    fn zero_probe_is_skipped() {
        let d = ShellDecomposition::new(2.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probes = vec![
            StreamField::analytic(ModalStream::zero()),
            StreamField::analytic(ModalStream::random(&mut rng, 1.0, 4.0, 3, 3, false)),
        ];
        let (c0, c1) = shell_poincare_constants(&d, &probes).unwrap();
        assert!(c0 > 0.0 && c0.is_finite());
        assert!(c1 > 0.0 && c1.is_finite());
        assert!(shell_poincare_constants(&d, &[]).is_err());
        assert!(shell_poincare_constants(&d, &probes[..1]).is_err());
    }

    #[test]
    fn dilated_probe_has_same_quotient() {
        let d = ShellDecomposition::new(2.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let probe = ModalStream::random(&mut rng, 1.5, 5.0, 4, 4, false);
        let g1 = d.shell_grid(1, 4, 12, 32).unwrap();
        let q1 = shell_quotient(&StreamField::analytic(probe.clone()), &g1, true).unwrap().unwrap();
        for n in 2..=4 {
            let scale = 2f64.powi(n as i32 - 1);
            // v_n(x) = v(x / scale)  <=>  psi_n(x) = scale * psi(x / scale)
            let dilated = Rescaled::new(probe.clone(), 1.0 / scale, scale);
            let gn = d.shell_grid(n, 4, 12, 32).unwrap();
            let qn = shell_quotient(&StreamField::analytic(dilated), &gn, true).unwrap().unwrap();
            assert!(((qn - q1) / q1).abs() < 1e-10, "n={n}: {qn} vs {q1}");
        }
    }
}
