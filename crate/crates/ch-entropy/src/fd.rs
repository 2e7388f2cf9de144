//! Central finite differences shared by the geometric checks.

use nalgebra::DVector;

/// Step for first derivatives.
pub const FIRST_STEP: f64 = 1e-5;
/// Step for second derivatives and for differentiating metric coefficients.
pub const SECOND_STEP: f64 = 1e-4;

pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn second_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Directional derivative of a scalar field along `v` at `p`.
pub fn directional(f: impl Fn(&DVector<f64>) -> f64, p: &DVector<f64>, v: &DVector<f64>, h: f64) -> f64 {
    (f(&(p + v * h)) - f(&(p - v * h))) / (2.0 * h)
}

/// Directional derivative of a vector-valued map along `v` at `p`.
pub fn directional_vec(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    p: &DVector<f64>,
    v: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    (f(&(p + v * h)) - f(&(p - v * h))) / (2.0 * h)
}

pub fn gradient(f: impl Fn(&DVector<f64>) -> f64, p: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(p.len());
    let mut q = p.clone();
    for i in 0..p.len() {
        q[i] = p[i] + h;
        let fp = f(&q);
        q[i] = p[i] - h;
        let fm = f(&q);
        q[i] = p[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}
