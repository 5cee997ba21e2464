//! Local polar frame `(e_r, e_theta)` and conversions to the Cartesian frame.

/// Second-order tensor, row index = component, column index = derivative direction.
pub type Tensor2 = [[f64; 2]; 2];

pub const ZERO_TENSOR: Tensor2 = [[0.0; 2]; 2];

#[inline]
pub fn vector_to_cartesian(v: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c]
}

#[inline]
pub fn vector_to_polar(v: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [v[0] * c + v[1] * s, -v[0] * s + v[1] * c]
}

/// `R G R^T` with `R = [e_r | e_theta]`.
pub fn tensor_to_cartesian(g: &Tensor2, theta: f64) -> Tensor2 {
    let (s, c) = theta.sin_cos();
    let r = [[c, -s], [s, c]];
    let mut rg = ZERO_TENSOR;
    for i in 0..2 {
        for j in 0..2 {
            rg[i][j] = r[i][0] * g[0][j] + r[i][1] * g[1][j];
        }
    }
    let mut out = ZERO_TENSOR;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = rg[i][0] * r[j][0] + rg[i][1] * r[j][1];
        }
    }
    out
}

/// `(a . grad) b . c = c^T G_b a` in any orthonormal frame.
#[inline]
pub fn advect_dot(a: [f64; 2], grad_b: &Tensor2, c: [f64; 2]) -> f64 {
    let w0 = grad_b[0][0] * a[0] + grad_b[0][1] * a[1];
    let w1 = grad_b[1][0] * a[0] + grad_b[1][1] * a[1];
    w0 * c[0] + w1 * c[1]
}

#[inline]
pub fn frobenius_sq(g: &Tensor2) -> f64 {
    g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]
}

#[inline]
pub fn frobenius_dot(a: &Tensor2, b: &Tensor2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}
