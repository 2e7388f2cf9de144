use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Chart, Submanifold, Target};
use crate::ambient::{self, AmbientVector};
use crate::error::{Error, Result};
use crate::models::{self, Christoffel, MetricKind};

/// Second fundamental form at one chart point, on the coordinate frame.
#[derive(Clone, Debug)]
pub struct SecondFundamentalForm {
    pub point: AmbientVector,
    /// Coordinate tangent vectors as columns.
    pub frame: DMatrix<f64>,
    /// Ambient Gram matrix at the point.
    pub metric: DMatrix<f64>,
    /// Induced metric on the coordinate frame.
    pub induced: DMatrix<f64>,
    /// `a[i][j] = A(d_i, d_j)`.
    pub a: Vec<Vec<AmbientVector>>,
}

impl SecondFundamentalForm {
    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    /// `A(X, Y)` for tangent vectors given by frame coefficients.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> AmbientVector {
        let mut out = AmbientVector::zeros(self.point.len());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out += &self.a[i][j] * (x[i] * y[j]);
            }
        }
        out
    }

    /// Trace of `A` in the induced metric.
    pub fn mean_curvature(&self) -> AmbientVector {
        let inv = self.induced.clone().try_inverse().expect("induced metric checked at construction");
        let mut h = AmbientVector::zeros(self.point.len());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                h += &self.a[i][j] * inv[(i, j)];
            }
        }
        h
    }

    pub fn inner(&self, u: &AmbientVector, v: &AmbientVector) -> f64 {
        u.dot(&(&self.metric * v))
    }

    /// Frame coefficients of the tangential projection of `v`.
    pub fn tangent_coords(&self, v: &AmbientVector) -> DVector<f64> {
        let rhs = self.frame.transpose() * (&self.metric * v);
        self.induced.clone().lu().solve(&rhs).expect("induced metric checked at construction")
    }

    pub fn tangent_part(&self, v: &AmbientVector) -> AmbientVector {
        &self.frame * self.tangent_coords(v)
    }

    pub fn normal_part(&self, v: &AmbientVector) -> AmbientVector {
        v - self.tangent_part(v)
    }
}

/// Second fundamental form for an arbitrary ambient metric given as a
/// Gram-matrix field; covariant derivatives use finite-difference
/// Christoffel symbols.
pub fn second_fundamental_form_with(
    metric: impl Fn(&AmbientVector) -> DMatrix<f64>,
    chart: &Chart,
    u0: &[f64],
) -> Result<SecondFundamentalForm> {
    if !chart.contains(u0) {
        return Err(Error::Domain(format!("parameter {u0:?} outside the chart domain")));
    }
    let point = chart.embed(u0);
    let frame = chart.jacobian(u0);
    let gram = metric(&point);
    let induced = frame.transpose() * &gram * &frame;
    if induced.clone().cholesky().is_none() {
        return Err(Error::Singular(format!("rank-deficient frame at {u0:?}")));
    }
    let christoffel = Christoffel::new(&metric, &point);
    let m = frame.ncols();
    let mut sff =
        SecondFundamentalForm { point, frame, metric: gram, induced, a: vec![vec![AmbientVector::zeros(0); m]; m] };
    for i in 0..m {
        for j in i..m {
            let ei = sff.frame.column(i).clone_owned();
            let ej = sff.frame.column(j).clone_owned();
            let cov = chart.second_derivative(u0, i, j) + christoffel.apply(&ei, &ej);
            let normal = sff.normal_part(&cov);
            sff.a[j][i] = normal.clone();
            sff.a[i][j] = normal;
        }
    }
    Ok(sff)
}

/// Second fundamental form in one of the metric kinds. For the round
/// sphere the chart must lie in the sphere and the form is taken in
/// `S^{2n+1}`, i.e. with the position component removed.
pub fn second_fundamental_form(chart: &Chart, kind: MetricKind, u0: &[f64]) -> Result<SecondFundamentalForm> {
    match kind {
        MetricKind::RoundSphere => {
            if chart.target() != Target::Sphere {
                return Err(Error::Precondition("round-sphere curvature needs a chart in the sphere".into()));
            }
            let mut sff = second_fundamental_form_with(|x| DMatrix::identity(x.len(), x.len()), chart, u0)?;
            let p = sff.point.clone() / sff.point.norm();
            for row in &mut sff.a {
                for a in row.iter_mut() {
                    let radial = a.dot(&p);
                    *a -= &p * radial;
                }
            }
            Ok(sff)
        }
        _ => {
            models::metric_matrix(kind, &chart.embed(u0))?;
            second_fundamental_form_with(|x| models::metric_matrix(kind, x).expect("interior point"), chart, u0)
        }
    }
}

pub fn mean_curvature(chart: &Chart, kind: MetricKind, u0: &[f64]) -> Result<AmbientVector> {
    Ok(second_fundamental_form(chart, kind, u0)?.mean_curvature())
}

/// The two components of the modified Bergman mean curvature obtained
/// from Euclidean data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifiedBergmanMeanCurvature {
    /// Component orthogonal to the surface and to the Reeb field.
    pub h_tilde_n: AmbientVector,
    /// Euclidean pairing of `H` with the normal part of the Reeb field.
    pub h_dot_t_hat_n: f64,
    /// Set when the Reeb field is tangent at the point and the pairing is
    /// not defined.
    pub degenerate: bool,
}

/// `V -> V^perp - g(V^perp, T) T^perp / |T^perp|^2`, all Euclidean.
fn tilde_projection(sff: &SecondFundamentalForm, t_perp: &AmbientVector, v: &AmbientVector) -> AmbientVector {
    let vp = sff.normal_part(v);
    let tt = t_perp.norm_squared();
    if tt < 1e-24 {
        return vp;
    }
    let c = vp.dot(t_perp) / tt;
    vp - t_perp * c
}

/// Mean curvature of a chart in `g_B~` written through the Euclidean
/// second fundamental form, the tangential Reeb component and the
/// position field.
pub fn mean_curvature_modified_bergman(chart: &Chart, u0: &[f64]) -> Result<ModifiedBergmanMeanCurvature> {
    let sff = second_fundamental_form(chart, MetricKind::Euclidean, u0)?;
    let x = sff.point.clone();
    let ss = x.norm_squared();
    if ss >= 1.0 {
        return Err(Error::Domain(format!("|p| = {} is outside the ball", ss.sqrt())));
    }
    let m = sff.dim() as f64;
    let t = ambient::reeb_field(&x);
    let t_coords = sff.tangent_coords(&t);
    let t_top = &sff.frame * &t_coords;
    let t_perp = &t - &t_top;
    let degenerate = t_perp.norm() < 1e-12;
    let h_r = sff.mean_curvature();
    let a_tt = sff.eval(&t_coords, &t_coords);
    let c = 1.0 - ss;
    let big_d = c * c + 4.0 * t_top.norm_squared();
    let tilde = |v: &AmbientVector| tilde_projection(&sff, &t_perp, v);

    let bracket = &x * (0.5 * c) - &a_tt - ambient::j(&t_top) * 2.0;
    let h_tilde_n =
        tilde(&h_r) * (0.25 * c * c) - tilde(&x) * (0.5 * c * (m + 1.0)) + tilde(&bracket) * (c * c / big_d);

    let tx = t_top.dot(&x);
    // A^h is only h-normal, so pairing with T^N-hat picks up the factor
    // (1 + k |T^T|^2) / (1 + |T^T|^2), k = (1 + s^2)^2 / D, in g_P norms.
    let top = t_top.norm_squared();
    let lambda = (c * c * big_d + 4.0 * (1.0 + ss).powi(2) * top) / (big_d * big_d);
    let h_dot_t_hat_n = if degenerate {
        0.0
    } else {
        lambda
            * (0.25 * c * c * h_r.dot(&t)
                + (0.5 * c * (m + 1.0) + c * c / (1.0 + ss)) * tx
                + c * c / big_d * (0.5 * c * tx - a_tt.dot(&t)))
    };
    Ok(ModifiedBergmanMeanCurvature { h_tilde_n, h_dot_t_hat_n, degenerate })
}

/// The same two components read off a direct `g_B~` computation.
pub fn mean_curvature_modified_bergman_direct(chart: &Chart, u0: &[f64]) -> Result<(AmbientVector, f64)> {
    let euclid = second_fundamental_form(chart, MetricKind::Euclidean, u0)?;
    let h = mean_curvature(chart, MetricKind::ModifiedBergman, u0)?;
    let x = &euclid.point;
    let ss = x.norm_squared();
    let t = ambient::reeb_field(x);
    let t_top = euclid.tangent_part(&t);
    let t_perp = &t - &t_top;
    let big_d = (1.0 - ss).powi(2) + 4.0 * t_top.norm_squared();
    let t_hat_n = &t - &t_top * ((1.0 + ss).powi(2) / big_d);
    Ok((tilde_projection(&euclid, &t_perp, &h), h.dot(&t_hat_n)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropyReport {
    pub max_omega: f64,
    pub is_isotropic: bool,
    pub is_lagrangian: bool,
}

/// Largest `|omega(e_i, e_j)|` over quadrature nodes, for frames that are
/// orthonormal in the metric compatible with `omega`.
pub fn isotropy_report(sigma: &Submanifold, kind: MetricKind, tol: f64) -> Result<IsotropyReport> {
    let m = sigma.dim();
    let n = sigma.ambient_n();
    if !(2 <= m && m <= n + 1) {
        return Err(Error::Precondition(format!("isotropy needs 2 <= m <= n + 1, got m = {m}, n = {n}")));
    }
    if !matches!(kind, MetricKind::Euclidean | MetricKind::Bergman | MetricKind::ModifiedBergman) {
        return Err(Error::Precondition(format!("{kind:?} carries no Kahler form")));
    }
    let mut max_omega: f64 = 0.0;
    for (chart, grid) in sigma.charts_with_grids() {
        for u in &grid.nodes {
            let x = chart.embed(u);
            let jac = chart.jacobian(u);
            let gram = jac.transpose() * models::metric_matrix(kind, &x)? * &jac;
            let chol = gram.cholesky().ok_or_else(|| Error::Singular(format!("rank-deficient frame at {u:?}")))?;
            let frame = &jac * chol.l().transpose().try_inverse().expect("Cholesky factor is invertible");
            for i in 0..m {
                for j in (i + 1)..m {
                    let w = models::symplectic_form(
                        kind,
                        &x,
                        &frame.column(i).clone_owned(),
                        &frame.column(j).clone_owned(),
                    )?;
                    max_omega = max_omega.max(w.abs());
                }
            }
        }
    }
    let is_isotropic = max_omega < tol;
    Ok(IsotropyReport { max_omega, is_isotropic, is_lagrangian: is_isotropic && m == n + 1 })
}
