//! Flat, complex and contact structures on R^{2n+2} = C^{n+1}, and the
//! Sasaki/CR structure they induce on the unit sphere.
//!
//! Coordinates are interleaved, `(x1, y1, ..., x_{n+1}, y_{n+1})` with
//! `z_j = x_j + i y_j`, so `J` acts blockwise on consecutive pairs.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::{Submanifold, Target};

pub type AmbientVector = DVector<f64>;

/// Sphere points further than this from the unit sphere are rejected
/// rather than renormalized.
pub const SPHERE_REJECT_TOL: f64 = 1e-6;

/// Returns `n` for a vector in R^{2n+2}.
pub fn ambient_n(v: &AmbientVector) -> Result<usize> {
    let len = v.len();
    if len < 4 || len % 2 != 0 {
        return Err(Error::BadAmbientLength(len));
    }
    Ok(len / 2 - 1)
}

/// The ambient space R^{2n+2} for a fixed `n`, used where inputs must be
/// checked against a configured dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambient {
    pub n: usize,
}

impl Ambient {
    pub fn new(n: usize) -> Self {
        Ambient { n }
    }

    pub fn real_dim(&self) -> usize {
        2 * self.n + 2
    }

    pub fn check(&self, v: &AmbientVector) -> Result<()> {
        if v.len() != self.real_dim() {
            return Err(Error::Dimension { expected: self.real_dim(), got: v.len() });
        }
        Ok(())
    }

    pub fn apply_j(&self, v: &AmbientVector) -> Result<AmbientVector> {
        self.check(v)?;
        Ok(j(v))
    }
}

/// A point of the unit sphere. Construction renormalizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint(AmbientVector);

impl SpherePoint {
    pub fn new(v: AmbientVector) -> Result<Self> {
        ambient_n(&v)?;
        let norm = v.norm();
        if (norm - 1.0).abs() > SPHERE_REJECT_TOL {
            return Err(Error::Domain(format!("|p| = {norm} is not on the unit sphere")));
        }
        Ok(SpherePoint(v / norm))
    }

    /// Projects any nonzero vector radially onto the sphere.
    pub fn normalize(v: AmbientVector) -> Result<Self> {
        ambient_n(&v)?;
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::Singular("cannot normalize the zero vector".into()));
        }
        Ok(SpherePoint(v / norm))
    }

    pub fn as_vector(&self) -> &AmbientVector {
        &self.0
    }

    pub fn into_vector(self) -> AmbientVector {
        self.0
    }
}

/// A point of the open unit ball.
#[derive(Clone, Debug, PartialEq)]
pub struct BallPoint(AmbientVector);

impl BallPoint {
    pub fn new(v: AmbientVector) -> Result<Self> {
        ambient_n(&v)?;
        let norm = v.norm();
        if norm >= 1.0 {
            return Err(Error::Domain(format!("|p| = {norm} is not inside the unit ball")));
        }
        Ok(BallPoint(v))
    }

    pub fn origin(n: usize) -> Self {
        BallPoint(DVector::zeros(2 * n + 2))
    }

    pub fn as_vector(&self) -> &AmbientVector {
        &self.0
    }

    pub fn into_vector(self) -> AmbientVector {
        self.0
    }
}

/// `J(x_j, y_j) = (y_j, -x_j)`, i.e. `J(d/dx) = -d/dy`.
pub fn j(v: &AmbientVector) -> AmbientVector {
    let mut out = DVector::zeros(v.len());
    for k in (0..v.len()).step_by(2) {
        out[k] = v[k + 1];
        out[k + 1] = -v[k];
    }
    out
}

/// `omega(u, v) = g(u, J v) = sum dx_j ^ dy_j (u, v)`.
pub fn omega(u: &AmbientVector, v: &AmbientVector) -> f64 {
    u.dot(&j(v))
}

pub fn position_field(p: &AmbientVector) -> AmbientVector {
    p.clone()
}

/// The Reeb-type field `T = -J X`; unit length on the sphere.
pub fn reeb_field(p: &AmbientVector) -> AmbientVector {
    -j(p)
}

fn nonzero_radius(p: &AmbientVector) -> Result<f64> {
    let r = p.norm();
    if r == 0.0 {
        return Err(Error::Singular("r, theta and eta are undefined at the origin".into()));
    }
    Ok(r)
}

pub fn radial(p: &AmbientVector) -> Result<f64> {
    nonzero_radius(p)
}

/// `dr(v) = g(v, X) / r`.
pub fn dr(p: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    Ok(p.dot(v) / nonzero_radius(p)?)
}

/// `theta(v) = g(v, T) / r^2`.
pub fn theta(p: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    let r = nonzero_radius(p)?;
    Ok(reeb_field(p).dot(v) / (r * r))
}

/// The transverse part of the metric, `g = dr^2 + r^2 (theta^2 + eta)`.
pub fn eta(p: &AmbientVector, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    let r = nonzero_radius(p)?;
    let t = reeb_field(p);
    let (dru, drv) = (p.dot(u) / r, p.dot(v) / r);
    let (tu, tv) = (t.dot(u) / (r * r), t.dot(v) / (r * r));
    Ok((u.dot(v) - dru * drv) / (r * r) - tu * tv)
}

/// Closed form `d theta = 2 omega / r^2 - (2 / r) dr ^ theta`, with the
/// convention `d beta(U, V) = U beta(V) - V beta(U) - beta([U, V])`.
pub fn dtheta(p: &AmbientVector, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    let r = nonzero_radius(p)?;
    let wedge = dr(p, u)? * theta(p, v)? - dr(p, v)? * theta(p, u)?;
    Ok(2.0 * omega(u, v) / (r * r) - 2.0 / r * wedge)
}

/// Exterior derivative of a one-form on constant vector fields (for which
/// the bracket vanishes), by central differences.
pub fn exterior_derivative(
    beta: impl Fn(&AmbientVector, &AmbientVector) -> f64,
    p: &AmbientVector,
    u: &AmbientVector,
    v: &AmbientVector,
) -> f64 {
    let h = fd::FIRST_STEP;
    let bv = fd::directional(|q| beta(q, v), p, u, h);
    let bu = fd::directional(|q| beta(q, u), p, v, h);
    bv - bu
}

/// Projection onto the tangent space of the sphere through `p`.
pub fn sphere_tangent(p: &AmbientVector, v: &AmbientVector) -> AmbientVector {
    let nn = p.norm_squared();
    v - p * (p.dot(v) / nn)
}

/// Complex structure of the CR sphere: `J` on the contact distribution and
/// zero on the Reeb direction.
pub fn j_sphere(p: &SpherePoint, v: &AmbientVector) -> AmbientVector {
    let p = p.as_vector();
    let t = reeb_field(p);
    let v = sphere_tangent(p, v);
    j(&(&v - &t * t.dot(&v)))
}

fn check_horizontal(p: &AmbientVector, v: &AmbientVector, tol: f64) -> Result<()> {
    let scale = v.norm().max(1.0);
    let normal = p.dot(v).abs();
    let th = reeb_field(p).dot(v).abs();
    if normal > tol * scale || th > tol * scale {
        return Err(Error::Precondition(format!(
            "vector is not horizontal: |g(v, X)| = {normal:e}, |theta(v)| = {th:e}"
        )));
    }
    Ok(())
}

/// Levi form of the sphere on horizontal tangent vectors; equals `eta`.
pub fn levi_form(p: &SpherePoint, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    let pv = p.as_vector();
    ambient_n(u)?;
    check_horizontal(pv, u, 1e-8)?;
    check_horizontal(pv, v, 1e-8)?;
    eta(pv, u, v)
}

/// Horizontal part of the sphere gradient of `f`, with the Euclidean
/// gradient taken by central differences.
pub fn horizontal_gradient(f: impl Fn(&AmbientVector) -> f64, p: &SpherePoint) -> AmbientVector {
    let pv = p.as_vector();
    let grad = fd::gradient(f, pv, fd::FIRST_STEP);
    let tangent = sphere_tangent(pv, &grad);
    let t = reeb_field(pv);
    &tangent - &t * t.dot(&tangent)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizontalityReport {
    pub max_theta: f64,
    pub is_horizontal: bool,
    pub is_legendrian: bool,
}

/// Largest `|theta(e)|` over quadrature nodes and unit tangent frame
/// vectors of a submanifold of the sphere.
pub fn horizontality_report(gamma: &Submanifold, tol: f64) -> Result<HorizontalityReport> {
    let mut max_theta: f64 = 0.0;
    for (chart, grid) in gamma.charts_with_grids() {
        if chart.target() != Target::Sphere {
            return Err(Error::Validation("horizontality needs a chart in the sphere".into()));
        }
        for u in &grid.nodes {
            let x = chart.embed(u);
            let off = (x.norm() - 1.0).abs();
            if off > 1e-8 {
                return Err(Error::Validation(format!("chart leaves the sphere by {off:e} at {u:?}")));
            }
            let frame = orthonormal_columns(&chart.jacobian(u))?;
            let t = reeb_field(&x);
            for e in frame.column_iter() {
                max_theta = max_theta.max(t.dot(&e).abs());
            }
        }
    }
    let is_horizontal = max_theta < tol;
    Ok(HorizontalityReport {
        max_theta,
        is_horizontal,
        is_legendrian: is_horizontal && gamma.dim() == gamma.ambient_n(),
    })
}

/// Euclidean orthonormal basis of the column span, by modified Gram-Schmidt.
pub fn orthonormal_columns(a: &nalgebra::DMatrix<f64>) -> Result<nalgebra::DMatrix<f64>> {
    let mut q = a.clone();
    for i in 0..q.ncols() {
        for k in 0..i {
            let proj = q.column(k).dot(&q.column(i));
            let qk = q.column(k).clone_owned();
            let mut qi = q.column_mut(i);
            qi.axpy(-proj, &qk, 1.0);
        }
        let norm = q.column(i).norm();
        if norm < 1e-12 * a.norm().max(1.0) {
            return Err(Error::Singular("tangent frame is rank deficient".into()));
        }
        q.column_mut(i).scale_mut(1.0 / norm);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> AmbientVector {
        DVector::from_column_slice(x)
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> AmbientVector {
        DVector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_sphere(rng: &mut ChaCha8Rng, len: usize) -> SpherePoint {
        SpherePoint::normalize(random_vec(rng, len)).unwrap()
    }

    fn random_horizontal(rng: &mut ChaCha8Rng, p: &SpherePoint) -> AmbientVector {
        let pv = p.as_vector();
        let w = sphere_tangent(pv, &random_vec(rng, pv.len()));
        let t = reeb_field(pv);
        &w - &t * t.dot(&w)
    }

    #[test]
    fn j_convention_and_square() {
        assert_eq!(j(&v(&[1.0, 0.0, 0.0, 0.0])), v(&[0.0, -1.0, 0.0, 0.0]));
        let w = v(&[0.3, -1.2, 0.7, 2.0]);
        assert_eq!(j(&j(&w)), -w);
        assert!(Ambient::new(2).apply_j(&v(&[1.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn omega_matches_coordinate_two_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, b) = (random_vec(&mut rng, 6), random_vec(&mut rng, 6));
            let direct: f64 = (0..3).map(|k| a[2 * k] * b[2 * k + 1] - a[2 * k + 1] * b[2 * k]).sum();
            assert!((omega(&a, &b) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn theta_and_eta_at_base_point() {
        let p = v(&[1.0, 0.0, 0.0, 0.0]);
        let t = reeb_field(&p);
        assert_eq!(t, v(&[0.0, 1.0, 0.0, 0.0]));
        assert!((theta(&p, &t).unwrap() - 1.0).abs() < 1e-15);
        let u = v(&[0.0, 0.0, 1.0, 0.0]);
        assert!((eta(&p, &u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(theta(&p, &u).unwrap(), 0.0);
        assert!(radial(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn metric_decomposes_into_radial_reeb_and_transverse_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = random_vec(&mut rng, 6) * 1.7;
            let (a, b) = (random_vec(&mut rng, 6), random_vec(&mut rng, 6));
            let r = radial(&p).unwrap();
            let rhs = dr(&p, &a).unwrap() * dr(&p, &b).unwrap()
                + r * r * (theta(&p, &a).unwrap() * theta(&p, &b).unwrap() + eta(&p, &a, &b).unwrap());
            assert!((a.dot(&b) - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn fields_have_expected_covariant_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_vec(&mut rng, 6);
            let x = random_vec(&mut rng, 6);
            assert!(position_field(&p).dot(&reeb_field(&p)).abs() < 1e-15);
            let dt = fd::directional_vec(reeb_field, &p, &x, fd::FIRST_STEP);
            assert!((dt + j(&x)).norm() < 1e-6);
            let dx = fd::directional_vec(position_field, &p, &x, fd::FIRST_STEP);
            assert!((dx - &x).norm() < 1e-6);
        }
    }

    #[test]
    fn dtheta_closed_form_matches_exterior_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = random_vec(&mut rng, 6) + v(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
            let (a, b) = (random_vec(&mut rng, 6), random_vec(&mut rng, 6));
            let numeric = exterior_derivative(|q, w| theta(q, w).unwrap(), &p, &a, &b);
            assert!((numeric - dtheta(&p, &a, &b).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn levi_form_properties() {
        let p = SpherePoint::new(v(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let u = v(&[0.0, 0.0, 1.0, 0.0]);
        assert!((levi_form(&p, &u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(levi_form(&p, &v(&[0.0, 1.0, 0.0, 0.0]), &u).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = random_sphere(&mut rng, 6);
            let a = random_horizontal(&mut rng, &p);
            let b = random_horizontal(&mut rng, &p);
            assert!(levi_form(&p, &a, &a).unwrap() > 0.0);
            let lhs = levi_form(&p, &a, &j_sphere(&p, &b)).unwrap();
            let rhs = -levi_form(&p, &j_sphere(&p, &a), &b).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
            // L(u, v) = -1/2 d theta(u, J v), with d theta differentiated numerically.
            let pv = p.as_vector();
            let dth = exterior_derivative(|q, w| theta(q, w).unwrap(), pv, &a, &j_sphere(&p, &b));
            assert!((levi_form(&p, &a, &b).unwrap() + 0.5 * dth).abs() < 1e-6);
        }
    }

    #[test]
    fn webster_metric_recovers_round_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let p = random_sphere(&mut rng, 8);
            let pv = p.as_vector();
            let a = sphere_tangent(pv, &random_vec(&mut rng, 8));
            let b = sphere_tangent(pv, &random_vec(&mut rng, 8));
            let lhs = theta(pv, &a).unwrap() * theta(pv, &b).unwrap() + eta(pv, &a, &b).unwrap();
            assert!((lhs - a.dot(&b)).abs() < 1e-12);
        }
    }

    #[test]
    fn sasaki_identity() {
        // (nabla_X J_S) Y = g(X, Y) T - theta(Y) X, with Y extended by tangent
        // projection of a constant vector and derivatives along a sphere curve.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_sphere(&mut rng, 6);
            let pv = p.as_vector().clone();
            let x = sphere_tangent(&pv, &random_vec(&mut rng, 6));
            let y0 = random_vec(&mut rng, 6);
            let curve = |t: f64| SpherePoint::normalize(&pv + &x * t).unwrap();
            let field = |q: &SpherePoint| sphere_tangent(q.as_vector(), &y0);
            let h = fd::FIRST_STEP;
            let d_jy = (j_sphere(&curve(h), &field(&curve(h))) - j_sphere(&curve(-h), &field(&curve(-h)))) / (2.0 * h);
            let d_y = (field(&curve(h)) - field(&curve(-h))) / (2.0 * h);
            let nabla_jy = sphere_tangent(&pv, &d_jy);
            let nabla_y = sphere_tangent(&pv, &d_y);
            let lhs = nabla_jy - j_sphere(&p, &nabla_y);
            let y = field(&p);
            let rhs = reeb_field(&pv) * x.dot(&y) - &x * theta(&pv, &y).unwrap();
            assert!((lhs - rhs).norm() < 1e-5);
        }
    }

    #[test]
    fn horizontal_gradient_examples() {
        let p = SpherePoint::new(v(&[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(horizontal_gradient(|_| 3.0, &p).norm() < 1e-12);
        let g = horizontal_gradient(|q| q[0], &p);
        assert!(g.dot(&reeb_field(p.as_vector())).abs() < 1e-8);
        assert!(g.dot(p.as_vector()).abs() < 1e-8);
        // The Reeb angle along the orbit through q has a purely vertical gradient.
        let q = SpherePoint::new(v(&[0.6, 0.8, 0.0, 0.0])).unwrap();
        let angle = |z: &AmbientVector| z[1].atan2(z[0]);
        assert!(horizontal_gradient(angle, &q).norm() < 1e-8);
    }

    #[test]
    fn sphere_points_renormalize_or_reject() {
        let p = SpherePoint::new(v(&[1.0 + 1e-9, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(p.as_vector().norm(), 1.0);
        assert!(SpherePoint::new(v(&[1.1, 0.0, 0.0, 0.0])).is_err());
        assert!(BallPoint::new(v(&[1.0, 0.0, 0.0, 0.0])).is_err());
    }
}
