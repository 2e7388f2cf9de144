//! Second-order calculus of the distance to a point, and the quantity
//! whose sign makes the entropy functional monotone.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EntropyQuery, KernelSpec};
use crate::ambient::AmbientVector;
use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::Chart;
use crate::models::{self, MetricKind, ModelPoint};

/// Step for derivatives of radial profiles in `rho`.
const PROFILE_STEP: f64 = 1e-4;

/// Below this distance the radial function is not differentiable.
const SINGULAR_RADIUS: f64 = 1e-6;

/// `rho = dist(., p0)` at a modified-model point with its differential and
/// `g_B~`-gradient.
struct RadialData {
    rho: f64,
    d_rho: AmbientVector,
    grad: AmbientVector,
    metric: DMatrix<f64>,
}

fn radial_data(p: &AmbientVector, p0: &ModelPoint) -> Result<RadialData> {
    let rho_at = |y: &AmbientVector| match ModelPoint::modified(y.clone()) {
        Ok(y) => models::dist_ch(&y, p0),
        Err(_) => f64::NAN,
    };
    let rho = rho_at(p);
    if !(rho > SINGULAR_RADIUS) {
        return Err(Error::Singular(format!("the distance to the centre is not smooth at rho = {rho:e}")));
    }
    let h = fd::FIRST_STEP * (1.0 - p.norm_squared());
    let d_rho = fd::gradient(rho_at, p, h);
    let metric = models::metric_matrix(MetricKind::ModifiedBergman, p)?;
    let grad = metric.clone().lu().solve(&d_rho).ok_or_else(|| Error::Singular("metric matrix".into()))?;
    Ok(RadialData { rho, d_rho, grad, metric })
}

fn profile_derivatives(f: &dyn Fn(f64) -> f64, rho: f64) -> (f64, f64) {
    let h = PROFILE_STEP;
    (fd::derivative(f, rho, h), fd::second_derivative(f, rho, h))
}

/// Closed-form `Hess(F o rho)(u, v)` in the modified Bergman model:
/// `coth rho F' g + (F'' - coth rho F') drho^2 + tanh rho F' (drho o J)^2`.
pub fn hessian_radial(
    f: &dyn Fn(f64) -> f64,
    p: &ModelPoint,
    p0: &ModelPoint,
    u: &AmbientVector,
    v: &AmbientVector,
) -> Result<f64> {
    let x = p.to_modified();
    let data = radial_data(&x, p0)?;
    let (f1, f2) = profile_derivatives(f, data.rho);
    let coth = 1.0 / data.rho.tanh();
    let g = u.dot(&(&data.metric * v));
    let ju = models::j_tilde_b(&x, u)?;
    let jv = models::j_tilde_b(&x, v)?;
    Ok(coth * f1 * g
        + (f2 - coth * f1) * data.d_rho.dot(u) * data.d_rho.dot(v)
        + data.rho.tanh() * f1 * data.d_rho.dot(&ju) * data.d_rho.dot(&jv))
}

/// `D^2 phi(u, v) - d phi(Gamma(u, v))` for `phi = F o rho`, all by finite
/// differences; the oracle for [`hessian_radial`].
pub fn hessian_fd(
    f: &dyn Fn(f64) -> f64,
    p: &ModelPoint,
    p0: &ModelPoint,
    u: &AmbientVector,
    v: &AmbientVector,
) -> Result<f64> {
    let x = p.to_modified();
    let data = radial_data(&x, p0)?;
    let phi = |y: &AmbientVector| match ModelPoint::modified(y.clone()) {
        Ok(y) => f(models::dist_ch(&y, p0)),
        Err(_) => f64::NAN,
    };
    let h = fd::SECOND_STEP * (1.0 - x.norm_squared());
    let (hu, hv) = (u * h, v * h);
    let second = (phi(&(&x + &hu + &hv)) - phi(&(&x + &hu - &hv)) - phi(&(&x - &hu + &hv)) + phi(&(&x - &hu - &hv)))
        / (4.0 * h * h);
    let gamma = models::christoffel(MetricKind::ModifiedBergman, &x, u, v)?;
    let (f1, _) = profile_derivatives(f, data.rho);
    Ok(second - f1 * data.d_rho.dot(&gamma))
}

/// Trace of [`hessian_radial`] over a `g_B~`-orthonormal frame.
pub fn laplacian_radial(f: &dyn Fn(f64) -> f64, p: &ModelPoint, p0: &ModelPoint) -> Result<f64> {
    let x = p.to_modified();
    let metric = models::metric_matrix(MetricKind::ModifiedBergman, &x)?;
    let chol = metric.cholesky().ok_or_else(|| Error::Singular("metric matrix".into()))?;
    let frame = chol.l().transpose().try_inverse().ok_or_else(|| Error::Singular("metric factor".into()))?;
    let mut total = 0.0;
    for col in frame.column_iter() {
        let e = col.into_owned();
        total += hessian_radial(f, p, p0, &e, &e)?;
    }
    Ok(total)
}

/// The pieces of `Q` at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityTerms {
    pub q: f64,
    pub rho: f64,
    /// `|grad^perp rho|^2`.
    pub normal_gradient_sq: f64,
    /// `|(J grad rho)^T|^2`.
    pub j_tangential_sq: f64,
    pub d_ln_k: f64,
    pub d2_ln_k: f64,
}

/// `Q = (ln K'' - coth rho ln K') |grad^perp rho|^2 - tanh rho |(J grad rho)^T|^2 ln K'`
/// at `embed(u0)` for the chart's dimension, with `rho = dist(., x0)` and
/// the kernel at scale `tau`.
pub fn monotonicity_q(chart: &Chart, u0: &[f64], q: &EntropyQuery) -> Result<MonotonicityTerms> {
    let spec = KernelSpec::new(chart.param_dim())?;
    let x = chart.embed(u0);
    let data = radial_data(&x, &q.x0)?;
    let ln_k = |r: f64| spec.ln_kernel(q.tau, r.abs()).unwrap_or(f64::NAN);
    let (d1, d2) = profile_derivatives(&ln_k, data.rho);

    let jac = chart.jacobian(u0);
    let gram = jac.transpose() * &data.metric * &jac;
    let chol = gram.cholesky().ok_or_else(|| Error::Singular(format!("degenerate tangent frame at {u0:?}")))?;
    let tangential = |w: &AmbientVector| &jac * chol.solve(&(jac.transpose() * (&data.metric * w)));
    let norm_sq = |w: &AmbientVector| w.dot(&(&data.metric * w));
    // the normal part directly, so an exactly tangent gradient gives an exact zero squared
    let normal_gradient_sq = norm_sq(&(&data.grad - tangential(&data.grad)));
    let j_grad = models::j_tilde_b(&x, &data.grad)?;
    let j_tangential_sq = norm_sq(&tangential(&j_grad));
    let coth = 1.0 / data.rho.tanh();
    let value = (d2 - coth * d1) * normal_gradient_sq - data.rho.tanh() * j_tangential_sq * d1;
    Ok(MonotonicityTerms { q: value, rho: data.rho, normal_gradient_sq, j_tangential_sq, d_ln_k: d1, d2_ln_k: d2 })
}
