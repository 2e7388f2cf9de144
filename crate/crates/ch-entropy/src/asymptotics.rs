//! Behaviour of compactified submanifolds at the sphere at infinity: ray
//! profiles of the tangential Reeb and normal position components, decay
//! fits, regularity flags, and the change of boundary parametrization
//! between the Bergman and modified Bergman compactifications.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentRoot;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ambient::{self, AmbientVector};
use crate::error::{Error, Result};
use crate::geometry::{second_fundamental_form, Axis, Chart, RadialFamily, Submanifold, Target};
use crate::models::{self, MetricKind};

/// One point of a ray profile; all norms Euclidean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub s: f64,
    pub t_top_norm: f64,
    pub x_perp_norm: f64,
    pub theta_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    pub samples: Vec<ProfileSample>,
}

impl BoundaryProfile {
    pub fn values(&self, field: ProfileField) -> Vec<f64> {
        self.samples.iter().map(|p| field.of(p)).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.samples.iter().map(|p| p.s).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileField {
    TTop,
    XPerp,
    ThetaResidual,
}

impl ProfileField {
    fn of(self, p: &ProfileSample) -> f64 {
        match self {
            ProfileField::TTop => p.t_top_norm,
            ProfileField::XPerp => p.x_perp_norm,
            ProfileField::ThetaResidual => p.theta_residual,
        }
    }
}

/// A ray of a chart: the first chart coordinate runs toward the boundary,
/// the rest are held at `link_coords`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaySpec {
    pub chart: usize,
    pub link_coords: Vec<f64>,
}

/// Radii `1 - 0.1 * 10^{-3k/11}`, from 0.9 to 0.9999.
pub fn default_s_list() -> Vec<f64> {
    (0..12).map(|k| 1.0 - 0.1 * 10f64.powf(-3.0 * k as f64 / 11.0)).collect()
}

/// Fourth-order central difference, used where a one-sided reach past the
/// boundary has to stay small.
fn five_point(f: impl Fn(f64) -> AmbientVector, x: f64, h: f64) -> AmbientVector {
    (f(x - 2.0 * h) - f(x - h) * 8.0 + f(x + h) * 8.0 - f(x + 2.0 * h)) / (12.0 * h)
}

/// The modified Bergman compactification of a radial family, with the
/// radial coordinate `sigma = tanh(rho / 2)` so the charts stay smooth up
/// to `sigma = 1`.
pub fn compactification(family: &RadialFamily, sigma_min: f64) -> Result<Submanifold> {
    if !(0.0 <= sigma_min && sigma_min < 1.0) {
        return Err(Error::Domain(format!("compactification needs 0 <= sigma_min < 1, got {sigma_min}")));
    }
    let mut charts = Vec::new();
    for chart in family.link().charts() {
        let mut axes = vec![Axis::interval(sigma_min, 1.0 - 1e-6)];
        axes.extend_from_slice(chart.axes());
        if family.isometry().is_none() {
            // the cone sigma Gamma(u), exact up to the link's own frame
            let (link, link_jac) = (chart.clone(), chart.clone());
            charts.push(
                Chart::new(axes, Target::Interior, move |u: &[f64]| link.embed(&u[1..]) * u[0])
                    .with_jacobian(move |u: &[f64]| {
                        let xi = link_jac.embed(&u[1..]);
                        let jac = link_jac.jacobian(&u[1..]);
                        let mut out = DMatrix::zeros(xi.len(), u.len());
                        out.set_column(0, &xi);
                        out.columns_mut(1, jac.ncols()).copy_from(&(jac * u[0]));
                        out
                    })
                    .with_weight(chart.weight()),
            );
            continue;
        }
        let (f, link) = (family.clone(), chart.clone());
        let embed = move |u: &[f64]| f.modified_point(2.0 * u[0].min(1.0).atanh(), &link.embed(&u[1..]));
        let embed = std::sync::Arc::new(embed);
        let jac_embed = embed.clone();
        charts.push(
            Chart::new(axes, Target::Interior, move |u: &[f64]| embed(u))
                .with_jacobian(move |u: &[f64]| {
                    let x = jac_embed(u);
                    let mut out = DMatrix::zeros(x.len(), u.len());
                    for i in 0..u.len() {
                        let h = if i == 0 { (0.25 * (1.0 - u[0])).min(1e-3) } else { 1e-3 };
                        let col = five_point(
                            |t| {
                                let mut v = u.to_vec();
                                v[i] = t;
                                jac_embed(&v)
                            },
                            u[i],
                            h,
                        );
                        out.set_column(i, &col);
                    }
                    out
                })
                .with_weight(chart.weight()),
        );
    }
    Ok(Submanifold::new(charts)?.with_base_point(family.base_point()))
}

struct RadiusEquation<'a> {
    chart: &'a Chart,
    link: &'a [f64],
    s: f64,
}

impl RadiusEquation<'_> {
    fn point(&self, t: f64) -> AmbientVector {
        let mut u = vec![t];
        u.extend_from_slice(self.link);
        self.chart.embed(&u)
    }
}

impl CostFunction for RadiusEquation<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, t: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.point(*t).norm() - self.s)
    }
}

fn ray_parameter(chart: &Chart, link: &[f64], s: f64) -> Result<f64> {
    let axis = chart.axes()[0];
    let problem = RadiusEquation { chart, link, s };
    let (lo, hi) = (problem.point(axis.lo).norm(), problem.point(axis.hi).norm());
    if !(lo <= s && s <= hi) {
        return Err(Error::Domain(format!("ray covers radii [{lo}, {hi}], which misses s = {s}")));
    }
    let res = Executor::new(problem, BrentRoot::new(axis.lo, axis.hi, 1e-15))
        .configure(|st| st.max_iters(200))
        .run()
        .map_err(|e| Error::Optimizer(format!("ray radius: {e}")))?;
    res.state().get_best_param().copied().ok_or_else(|| Error::Optimizer("ray radius not found".into()))
}

/// Chart coordinates of the ray point at Euclidean radius `s`.
fn ray_point<'a>(sigma: &'a Submanifold, ray: &RaySpec, s: f64) -> Result<(Vec<f64>, &'a Chart)> {
    let chart = sigma.charts().get(ray.chart).ok_or_else(|| {
        Error::Validation(format!("no chart {} in a submanifold with {}", ray.chart, sigma.charts().len()))
    })?;
    if ray.link_coords.len() + 1 != chart.param_dim() {
        return Err(Error::Dimension { expected: chart.param_dim() - 1, got: ray.link_coords.len() });
    }
    let t = ray_parameter(chart, &ray.link_coords, s)?;
    let mut u = vec![t];
    u.extend_from_slice(&ray.link_coords);
    Ok((u, chart))
}

/// Euclidean tangential projector data at a chart point.
struct Frame {
    x: AmbientVector,
    jac: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl Frame {
    fn new(chart: &Chart, u: &[f64]) -> Result<Self> {
        let x = chart.embed(u);
        let jac = chart.jacobian(u);
        let chol = (jac.transpose() * &jac)
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("tangent frame degenerates at {u:?}")))?;
        Ok(Frame { x, jac, chol })
    }

    fn tangent(&self, v: &AmbientVector) -> AmbientVector {
        &self.jac * self.chol.solve(&(self.jac.transpose() * v))
    }
}

/// `|T^T|`, `|X^perp|` and `sup_{|v|=1} theta(v) = |T^T| / r^2` along a ray.
pub fn boundary_profile(sigma: &Submanifold, ray: &RaySpec, s_list: &[f64]) -> Result<BoundaryProfile> {
    if s_list.windows(2).any(|w| w[1] <= w[0]) || s_list.iter().any(|&s| !(0.0 < s && s < 1.0)) {
        return Err(Error::Validation("profile radii must increase strictly inside (0, 1)".into()));
    }
    let mut samples = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let (u, chart) = ray_point(sigma, ray, s)?;
        let frame = Frame::new(chart, &u)?;
        let t = ambient::reeb_field(&frame.x);
        let t_top = frame.tangent(&t).norm();
        let x_perp = (&frame.x - frame.tangent(&frame.x)).norm();
        samples.push(ProfileSample {
            s,
            t_top_norm: t_top,
            x_perp_norm: x_perp,
            theta_residual: t_top / frame.x.norm_squared(),
        });
    }
    Ok(BoundaryProfile { samples })
}

/// Quantities below this at every sample are reported as exactly zero.
pub const EXACT_ZERO: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DecayFit {
    Fit { slope: f64, r2: f64, samples: usize },
    ExactZero,
}

impl DecayFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            DecayFit::Fit { slope, .. } => Some(*slope),
            DecayFit::ExactZero => None,
        }
    }
}

/// Least-squares slope of `ln q` against `ln(1 - s)` over samples with
/// `s >= 0.9`.
pub fn decay_rate_fit(profile: &BoundaryProfile, field: ProfileField) -> Result<DecayFit> {
    let near: Vec<&ProfileSample> = profile.samples.iter().filter(|p| p.s >= 0.9).collect();
    if near.len() < 6 {
        return Err(Error::Precondition(format!("decay fits need 6 samples with s >= 0.9, got {}", near.len())));
    }
    if near.iter().all(|p| field.of(p).abs() < EXACT_ZERO) {
        return Ok(DecayFit::ExactZero);
    }
    let pts: Vec<(f64, f64)> =
        near.iter().filter(|p| field.of(p) > 0.0).map(|p| ((1.0 - p.s).ln(), field.of(p).ln())).collect();
    if pts.len() < 6 {
        return Err(Error::Precondition("too few positive samples to fit a decay rate".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit::Fit { slope, r2, samples: pts.len() })
}

/// Value at `s = 1` of the least-squares fit `a + b(1-s) + c(1-s)^2` to the
/// last six samples.
pub fn extrapolate_to_boundary(s: &[f64], values: &[f64]) -> Result<f64> {
    if s.len() != values.len() || s.len() < 6 {
        return Err(Error::Precondition(format!("extrapolation needs 6 samples, got {}", s.len().min(values.len()))));
    }
    let k = s.len() - 6;
    let a = DMatrix::from_fn(6, 3, |i, j| (1.0 - s[k + i]).powi(j as i32));
    let y = DVector::from_column_slice(&values[k..]);
    let coef = (a.transpose() * &a).lu().solve(&(a.transpose() * y)).ok_or_else(|| Error::Singular("fit".into()))?;
    Ok(coef[0])
}

/// Rays spread along the diagonal of each chart's link box.
pub fn default_rays(sigma: &Submanifold, per_chart: usize) -> Vec<RaySpec> {
    let mut rays = Vec::new();
    for (c, chart) in sigma.charts().iter().enumerate() {
        let link_axes = &chart.axes()[1..];
        let count = if link_axes.is_empty() { 1 } else { per_chart };
        for k in 0..count {
            let frac = (k as f64 + 0.37) / count as f64;
            let link_coords = link_axes
                .iter()
                .enumerate()
                .map(|(i, a)| a.lo + (a.hi - a.lo) * ((frac + 0.23 * i as f64) % 1.0))
                .collect();
            rays.push(RaySpec { chart: c, link_coords });
        }
    }
    rays
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityFlags {
    pub weakly_regular: bool,
    pub quasi_normal: bool,
    pub weakly_horizontal: bool,
    /// Largest extrapolated `|g(T, A(X^T, X^T))|` over the rays.
    pub strongly_horizontal_witness: f64,
    pub x_perp_limit: f64,
    pub theta_limit: f64,
    pub rays: usize,
}

impl RegularityFlags {
    pub fn strongly_horizontal(&self, tol: f64) -> bool {
        self.strongly_horizontal_witness < tol
    }
}

fn witness_at(chart: &Chart, u: &[f64]) -> Result<f64> {
    let sff = second_fundamental_form(chart, MetricKind::Euclidean, u)?;
    let x = chart.embed(u);
    let c = sff.tangent_coords(&x);
    Ok(ambient::reeb_field(&x).dot(&sff.eval(&c, &c)))
}

/// Boundary flags from extrapolated ray profiles. The strong horizontality
/// witness is the boundary value of `g(T, A(X^T, X^T))`, which vanishes
/// exactly when the Bergman compactification is tangent to `ker theta`.
pub fn regularity_classification(sigma: &Submanifold, tol: f64) -> Result<RegularityFlags> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let s_list = default_s_list();
    let rays = default_rays(sigma, 3);
    let mut flags = RegularityFlags {
        weakly_regular: true,
        quasi_normal: true,
        weakly_horizontal: true,
        strongly_horizontal_witness: 0.0,
        x_perp_limit: 0.0,
        theta_limit: 0.0,
        rays: rays.len(),
    };
    for ray in &rays {
        let profile = match boundary_profile(sigma, ray, &s_list) {
            Ok(p) => p,
            Err(_) => {
                flags.weakly_regular = false;
                continue;
            }
        };
        let x_perp = extrapolate_to_boundary(&s_list, &profile.values(ProfileField::XPerp))?.abs();
        let theta = extrapolate_to_boundary(&s_list, &profile.values(ProfileField::ThetaResidual))?.abs();
        let mut witness = Vec::with_capacity(s_list.len());
        for &s in &s_list {
            let (u, chart) = ray_point(sigma, ray, s)?;
            witness.push(witness_at(chart, &u)?);
        }
        let w = extrapolate_to_boundary(&s_list, &witness)?.abs();
        flags.x_perp_limit = flags.x_perp_limit.max(x_perp);
        flags.theta_limit = flags.theta_limit.max(theta);
        flags.strongly_horizontal_witness = flags.strongly_horizontal_witness.max(w);
    }
    flags.quasi_normal = flags.weakly_regular && flags.x_perp_limit < tol;
    flags.weakly_horizontal = flags.weakly_regular && flags.theta_limit < tol;
    Ok(flags)
}

/// Extrapolated boundary size of `A(X^T, Y) - H^S g(X^T, Y) / (m + 1)` over a
/// Euclidean-orthonormal tangent frame `Y`, where `H^S` is the mean
/// curvature in the sphere of the boundary link through the ray's end.
pub fn boundary_mean_curvature_residual(sigma: &Submanifold, ray: &RaySpec, s_list: &[f64]) -> Result<f64> {
    let chart = sigma.charts().get(ray.chart).ok_or_else(|| Error::Validation(format!("no chart {}", ray.chart)))?;
    let m = chart.param_dim();
    let link_dims = m - 1;
    let h_sphere = if link_dims == 0 {
        AmbientVector::zeros(chart.embed(&[chart.axes()[0].lo]).len())
    } else {
        let edge = chart.clone();
        let link_axes = chart.axes()[1..].to_vec();
        let boundary = Chart::new(link_axes, Target::Sphere, move |v: &[f64]| {
            let mut u = vec![1.0];
            u.extend_from_slice(v);
            let p = edge.embed(&u);
            &p / p.norm()
        });
        second_fundamental_form(&boundary, MetricKind::RoundSphere, &ray.link_coords)?.mean_curvature()
    };
    let mut residuals: Vec<Vec<f64>> = Vec::new();
    for &s in s_list {
        let (u, chart) = ray_point(sigma, ray, s)?;
        let sff = second_fundamental_form(chart, MetricKind::Euclidean, &u)?;
        let x = chart.embed(&u);
        let x_top = sff.tangent_coords(&x);
        let frame = ambient::orthonormal_columns(&chart.jacobian(&u))?;
        let mut entries = Vec::new();
        for col in frame.column_iter() {
            let y = col.into_owned();
            let yc = sff.tangent_coords(&y);
            let r = sff.eval(&x_top, &yc) - &h_sphere * (x.dot(&y) / (m as f64 + 1.0));
            entries.extend(r.iter().copied());
        }
        residuals.push(entries);
    }
    let mut worst: f64 = 0.0;
    for k in 0..residuals[0].len() {
        let series: Vec<f64> = residuals.iter().map(|r| r[k]).collect();
        worst = worst.max(extrapolate_to_boundary(s_list, &series)?.abs());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReparamDirection {
    /// `F~(sigma) = S(F(2 sigma / (1 + sigma^2)))`.
    BergmanToModified,
    /// `G(rho) = S^{-1}(G~(rho / (1 + sqrt(1 - rho^2))))`.
    ModifiedToBergman,
}

/// Samples of the reparametrized ray at `params`.
pub fn bergman_reparam(
    f: &dyn Fn(f64) -> AmbientVector,
    params: &[f64],
    direction: ReparamDirection,
) -> Result<Vec<AmbientVector>> {
    params
        .iter()
        .map(|&t| {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Domain(format!("ray parameter {t} outside [0, 1]")));
            }
            match direction {
                ReparamDirection::BergmanToModified => Ok(closed_s_map(&f(2.0 * t / (1.0 + t * t)))),
                ReparamDirection::ModifiedToBergman => {
                    let x = f(t / (1.0 + (1.0 - t * t).max(0.0).sqrt()));
                    Ok(&x * (2.0 / (1.0 + x.norm_squared())))
                }
            }
        })
        .collect()
}

/// `S` extended to the closed ball.
fn closed_s_map(z: &AmbientVector) -> AmbientVector {
    let defect = (1.0 - z.norm_squared()).max(0.0);
    z / (1.0 + defect.sqrt())
}

/// Coefficients `c_0, ..., c_order` of `F(t) = sum c_k (1 - t)^k` at `t = 1`,
/// by polynomial extrapolation of samples on a ray (least squares when
/// more samples are given than needed).
pub fn boundary_taylor(params: &[f64], values: &[AmbientVector], order: usize) -> Result<Vec<AmbientVector>> {
    if params.len() != values.len() {
        return Err(Error::Dimension { expected: params.len(), got: values.len() });
    }
    if params.len() < order + 2 {
        return Err(Error::Precondition(format!(
            "order {order} needs at least {} samples, got {}",
            order + 2,
            params.len()
        )));
    }
    let a = DMatrix::from_fn(params.len(), order + 1, |i, j| (1.0 - params[i]).powi(j as i32));
    let svd = a.svd(true, true);
    let dim = values[0].len();
    let mut coeffs = vec![AmbientVector::zeros(dim); order + 1];
    for d in 0..dim {
        let y = DVector::from_iterator(values.len(), values.iter().map(|v| v[d]));
        let c = svd.solve(&y, 1e-14).map_err(|e| Error::Singular(e.to_string()))?;
        for (k, coef) in coeffs.iter_mut().enumerate() {
            coef[d] = c[k];
        }
    }
    Ok(coeffs)
}

/// `S^{-1}` on the closed ball, for round trips in tests and reports.
pub fn closed_s_map_inv(s: &AmbientVector) -> AmbientVector {
    s * (2.0 / (1.0 + s.norm_squared()))
}

/// Euclidean radius in the modified model of the point at hyperbolic
/// distance `rho` from the origin.
pub fn modified_radius(rho: f64) -> f64 {
    models::geodesic_ball_radius(rho).unwrap_or(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make, ExampleSpec};

    fn compact(name: &str) -> Submanifold {
        let ex = make(&ExampleSpec::new(name)).unwrap();
        compactification(ex.family().unwrap(), 0.5).unwrap()
    }

    #[test]
    fn cones_over_horizontal_links_have_flat_profiles() {
        let sigma = compact("cone:clifford_legendrian_torus");
        for ray in default_rays(&sigma, 2) {
            let p = boundary_profile(&sigma, &ray, &default_s_list()).unwrap();
            for sample in &p.samples {
                assert!(sample.t_top_norm < 1e-12 && sample.x_perp_norm < 1e-10, "{sample:?}");
            }
            assert_eq!(decay_rate_fit(&p, ProfileField::TTop).unwrap(), DecayFit::ExactZero);
        }
    }

    #[test]
    fn complex_line_has_a_reeb_boundary() {
        let sigma = compact("complex_line");
        let flags = regularity_classification(&sigma, 1e-3).unwrap();
        assert!(flags.weakly_regular && flags.quasi_normal);
        assert!(!flags.weakly_horizontal);
        assert!((flags.theta_limit - 1.0).abs() < 1e-6, "{flags:?}");
    }

    #[test]
    fn extrapolation_is_exact_on_quadratics() {
        let s = default_s_list();
        let v: Vec<f64> = s.iter().map(|s| 0.5 - 2.0 * (1.0 - s) + 3.0 * (1.0 - s).powi(2)).collect();
        assert!((extrapolate_to_boundary(&s, &v).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_needs_samples_near_the_boundary() {
        let profile = BoundaryProfile {
            samples: (0..5)
                .map(|k| ProfileSample {
                    s: 0.9 + 0.01 * k as f64,
                    t_top_norm: 1.0,
                    x_perp_norm: 1.0,
                    theta_residual: 1.0,
                })
                .collect(),
        };
        assert!(decay_rate_fit(&profile, ProfileField::TTop).is_err());
    }

    #[test]
    fn taylor_needs_enough_samples() {
        let v = vec![AmbientVector::zeros(2); 3];
        assert!(boundary_taylor(&[0.9, 0.95, 0.99], &v, 2).is_err());
    }
}
