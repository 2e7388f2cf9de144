//! Interior metrics on the unit ball: Poincare, Bergman and modified
//! Bergman, the radial diffeomorphism `S` relating the two Bergman models,
//! and complex hyperbolic distance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ambient::{self, AmbientVector};
use crate::error::{Error, Result};
use crate::fd;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    Euclidean,
    RoundSphere,
    Poincare,
    Bergman,
    ModifiedBergman,
}

impl MetricKind {
    pub fn is_hyperbolic(self) -> bool {
        matches!(self, MetricKind::Poincare | MetricKind::Bergman | MetricKind::ModifiedBergman)
    }
}

fn check_interior(kind: MetricKind, p: &AmbientVector) -> Result<()> {
    if kind.is_hyperbolic() {
        let norm = p.norm();
        if !(norm < 1.0) {
            return Err(Error::Domain(format!("{kind:?} metric evaluated at |p| = {norm}")));
        }
    }
    Ok(())
}

/// Gram matrix of the metric at `p` in the interleaved coordinates. The
/// round sphere uses the Euclidean matrix restricted to tangent vectors.
pub fn metric_matrix(kind: MetricKind, p: &AmbientVector) -> Result<DMatrix<f64>> {
    check_interior(kind, p)?;
    let dim = p.len();
    let ss = p.norm_squared();
    let m = match kind {
        MetricKind::Euclidean | MetricKind::RoundSphere => DMatrix::identity(dim, dim),
        MetricKind::Poincare => DMatrix::identity(dim, dim) * (4.0 / (1.0 - ss).powi(2)),
        MetricKind::Bergman => {
            // dr^2 + r^2 theta^2 = (p p^T + T T^T) / r^2, smooth through the origin.
            let t = ambient::reeb_field(p);
            let c = 1.0 - ss;
            DMatrix::identity(dim, dim) / c + (p * p.transpose() + &t * t.transpose()) / (c * c)
        }
        MetricKind::ModifiedBergman => {
            // 16 s^4 theta^2 = 16 T T^T.
            let t = ambient::reeb_field(p);
            let c = 1.0 - ss;
            DMatrix::identity(dim, dim) * (4.0 / (c * c)) + &t * t.transpose() * (16.0 / c.powi(4))
        }
    };
    Ok(m)
}

pub fn metric_eval(kind: MetricKind, p: &AmbientVector, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    Ok(u.dot(&(metric_matrix(kind, p)? * v)))
}

/// Levi-Civita data of a metric at one point, with the metric
/// differentiated by central differences (step 1e-4) along the coordinate
/// axes.
pub struct Christoffel {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    partials: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn new(metric: impl Fn(&AmbientVector) -> DMatrix<f64>, p: &AmbientVector) -> Self {
        let h = fd::SECOND_STEP;
        let mut e = DVector::zeros(p.len());
        let partials = (0..p.len())
            .map(|l| {
                e[l] = h;
                let d = (metric(&(p + &e)) - metric(&(p - &e))) / (2.0 * h);
                e[l] = 0.0;
                d
            })
            .collect();
        Christoffel { lu: metric(p).lu(), partials }
    }

    fn directional(&self, w: &AmbientVector) -> DMatrix<f64> {
        let dim = w.len();
        self.partials.iter().zip(w.iter()).fold(DMatrix::zeros(dim, dim), |acc, (d, &c)| acc + d * c)
    }

    /// `Gamma(u, v)`, so that `nabla_u V = D_u V + Gamma(u, V)`.
    pub fn apply(&self, u: &AmbientVector, v: &AmbientVector) -> AmbientVector {
        let mut lowered = self.directional(u) * v + self.directional(v) * u;
        for (l, d) in self.partials.iter().enumerate() {
            lowered[l] -= u.dot(&(d * v));
        }
        0.5 * self.lu.solve(&lowered).expect("metric matrices are positive definite")
    }
}

/// One-off Christoffel vector `Gamma(u, v)` of a metric given pointwise.
pub fn christoffel_with(
    metric: impl Fn(&AmbientVector) -> DMatrix<f64>,
    p: &AmbientVector,
    u: &AmbientVector,
    v: &AmbientVector,
) -> AmbientVector {
    Christoffel::new(metric, p).apply(u, v)
}

pub fn christoffel(kind: MetricKind, p: &AmbientVector, u: &AmbientVector, v: &AmbientVector) -> Result<AmbientVector> {
    check_interior(kind, p)?;
    if kind == MetricKind::Euclidean || kind == MetricKind::RoundSphere {
        return Ok(DVector::zeros(p.len()));
    }
    Ok(christoffel_with(|q| metric_matrix(kind, q).expect("checked interior"), p, u, v))
}

/// `S(z) = z / (1 + sqrt(1 - |z|^2))`, from Bergman to modified Bergman
/// coordinates.
pub fn s_map(p: &AmbientVector) -> Result<AmbientVector> {
    let rr = p.norm_squared();
    if rr > 1.0 {
        return Err(Error::Domain(format!("S is defined on the closed ball, |p| = {}", rr.sqrt())));
    }
    Ok(p / (1.0 + (1.0 - rr).sqrt()))
}

/// `S^{-1}(z) = 2 z / (1 + |z|^2)`.
pub fn s_map_inv(p: &AmbientVector) -> Result<AmbientVector> {
    let ss = p.norm_squared();
    if ss > 1.0 {
        return Err(Error::Domain(format!("S^-1 is defined on the closed ball, |p| = {}", ss.sqrt())));
    }
    Ok(p * (2.0 / (1.0 + ss)))
}

/// Euclidean radius of the modified-Bergman geodesic ball of radius `r`
/// about the origin.
pub fn geodesic_ball_radius(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("ball radius must be nonnegative, got {r}")));
    }
    Ok((r / 2.0).tanh())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    Bergman,
    ModifiedBergman,
}

/// A point of complex hyperbolic space in one of the two ball models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub point: AmbientVector,
    pub model: Model,
}

impl ModelPoint {
    pub fn new(point: AmbientVector, model: Model) -> Result<Self> {
        ambient::ambient_n(&point)?;
        if !(point.norm() < 1.0) {
            return Err(Error::Domain(format!("model point has |p| = {}", point.norm())));
        }
        Ok(ModelPoint { point, model })
    }

    pub fn bergman(point: AmbientVector) -> Result<Self> {
        Self::new(point, Model::Bergman)
    }

    pub fn modified(point: AmbientVector) -> Result<Self> {
        Self::new(point, Model::ModifiedBergman)
    }

    pub fn to_bergman(&self) -> AmbientVector {
        match self.model {
            Model::Bergman => self.point.clone(),
            Model::ModifiedBergman => s_map_inv(&self.point).expect("interior point"),
        }
    }

    pub fn bergman_with_defect(&self) -> (AmbientVector, f64) {
        match self.model {
            Model::Bergman => (self.point.clone(), 1.0 - self.point.norm_squared()),
            Model::ModifiedBergman => modified_to_bergman_with_defect(&self.point),
        }
    }

    pub fn to_modified(&self) -> AmbientVector {
        match self.model {
            Model::Bergman => s_map(&self.point).expect("interior point"),
            Model::ModifiedBergman => self.point.clone(),
        }
    }
}

/// Bergman coordinates of a modified-model point together with the defect
/// `1 - |z|^2`, which is computed from `1 - |s|^2` and keeps its relative
/// accuracy where `z` itself rounds onto the sphere.
pub fn modified_to_bergman_with_defect(s: &AmbientVector) -> (AmbientVector, f64) {
    let ss = s.norm_squared();
    let z = s * (2.0 / (1.0 + ss));
    let defect = ((1.0 - ss) / (1.0 + ss)).powi(2);
    (z, defect)
}

/// Distance between Bergman points with known defects `1 - |z|^2`,
/// `1 - |w|^2`, from `cosh d = |1 - conj(w) . z| / sqrt(dz dw)`.
///
/// Near the diagonal the identity
/// `|1 - <z,w>|^2 - dz dw = |z - w|^2 - sum_{j<k} |z_j w_k - z_k w_j|^2`
/// gives `tanh^2 d` without cancellation.
pub fn bergman_distance_parts(z: &AmbientVector, dz: f64, w: &AmbientVector, dw: f64) -> f64 {
    let k = z.len() / 2;
    let mut re = 0.0;
    let mut im = 0.0;
    for j in 0..k {
        let (zr, zi, wr, wi) = (z[2 * j], z[2 * j + 1], w[2 * j], w[2 * j + 1]);
        re += wr * zr + wi * zi;
        im += wr * zi - wi * zr;
    }
    let denom = (1.0 - re).powi(2) + im * im;
    let mut wedge = 0.0;
    for j in 0..k {
        for l in (j + 1)..k {
            let (zjr, zji, zlr, zli) = (z[2 * j], z[2 * j + 1], z[2 * l], z[2 * l + 1]);
            let (wjr, wji, wlr, wli) = (w[2 * j], w[2 * j + 1], w[2 * l], w[2 * l + 1]);
            let cr = (zjr * wlr - zji * wli) - (zlr * wjr - zli * wji);
            let ci = (zjr * wli + zji * wlr) - (zlr * wji + zli * wjr);
            wedge += cr * cr + ci * ci;
        }
    }
    let numer = ((z - w).norm_squared() - wedge).max(0.0);
    let t2 = numer / denom;
    if t2 < 0.25 {
        t2.sqrt().atanh()
    } else {
        (denom / (dz * dw)).sqrt().max(1.0).acosh()
    }
}

/// Distance between two points given in Bergman coordinates.
pub fn bergman_distance(z: &AmbientVector, w: &AmbientVector) -> f64 {
    bergman_distance_parts(z, 1.0 - z.norm_squared(), w, 1.0 - w.norm_squared())
}

pub fn dist_ch(z: &ModelPoint, w: &ModelPoint) -> f64 {
    let (zb, dz) = z.bergman_with_defect();
    let (wb, dw) = w.bergman_with_defect();
    bergman_distance_parts(&zb, dz, &wb, dw)
}

/// The complex structure `J_B~` of the modified Bergman model.
pub fn j_tilde_b(p: &AmbientVector, v: &AmbientVector) -> Result<AmbientVector> {
    check_interior(MetricKind::ModifiedBergman, p)?;
    let ss = p.norm_squared();
    let t = ambient::reeb_field(p);
    // Conjugating J by the differential of S: radial vectors shrink by
    // (1 - s^2)/(1 + s^2) relative to the rest, so J(X) and J(T) rescale.
    Ok(ambient::j(v) + p * (2.0 * t.dot(v) / (1.0 - ss)) + &t * (2.0 * p.dot(v) / (1.0 + ss)))
}

/// The complex structure compatible with a Kahler metric kind.
pub fn complex_structure(kind: MetricKind, p: &AmbientVector, v: &AmbientVector) -> Result<AmbientVector> {
    match kind {
        MetricKind::Euclidean | MetricKind::Bergman => Ok(ambient::j(v)),
        MetricKind::ModifiedBergman => j_tilde_b(p, v),
        other => Err(Error::Precondition(format!("{other:?} carries no Kahler form"))),
    }
}

/// The Kahler forms `omega_R`, `omega_B` and `omega_B~` from their closed
/// forms.
pub fn symplectic_form(kind: MetricKind, p: &AmbientVector, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    check_interior(kind, p)?;
    let w = ambient::omega(u, v);
    let ss = p.norm_squared();
    let t = ambient::reeb_field(p);
    // r^3 (dr ^ theta)(u, v)
    let kappa = p.dot(u) * t.dot(v) - p.dot(v) * t.dot(u);
    match kind {
        MetricKind::Euclidean => Ok(w),
        MetricKind::Bergman => Ok(w / (1.0 - ss) + kappa / (1.0 - ss).powi(2)),
        MetricKind::ModifiedBergman => Ok(4.0 * w / (1.0 - ss).powi(2) + 8.0 * kappa / (1.0 - ss).powi(3)),
        other => Err(Error::Precondition(format!("{other:?} carries no Kahler form"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::{self, MoebiusMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> AmbientVector {
        DVector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_ball(rng: &mut ChaCha8Rng, len: usize, max: f64) -> AmbientVector {
        random_vec(rng, len).normalize() * rng.gen_range(0.0..max)
    }

    fn pushforward(f: impl Fn(&AmbientVector) -> AmbientVector, p: &AmbientVector, v: &AmbientVector) -> AmbientVector {
        fd::directional_vec(f, p, v, fd::FIRST_STEP)
    }

    #[test]
    fn bergman_reduces_to_euclidean_at_origin() {
        let m = metric_matrix(MetricKind::Bergman, &DVector::zeros(4)).unwrap();
        assert!((m - DMatrix::identity(4, 4)).norm() < 1e-15);
        assert!(metric_matrix(MetricKind::Bergman, &DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn modified_radial_coefficient() {
        let p = DVector::from_vec(vec![0.3, 0.4, 0.0, 0.0]);
        let x_hat = p.normalize();
        let value = metric_eval(MetricKind::ModifiedBergman, &p, &x_hat, &x_hat).unwrap();
        assert!((value - 64.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn modified_dominates_poincare() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let p = random_ball(&mut rng, 6, 0.99);
            let u = random_vec(&mut rng, 6);
            let gt = metric_eval(MetricKind::ModifiedBergman, &p, &u, &u).unwrap();
            let gp = metric_eval(MetricKind::Poincare, &p, &u, &u).unwrap();
            assert!(gt >= gp && gt > 0.0);
        }
    }

    #[test]
    fn bergman_decomposition_matches_complex_form() {
        // sum |dz|^2 / (1 - |z|^2) + |conj(z) . dz|^2 / (1 - |z|^2)^2
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            let p = random_ball(&mut rng, 6, 0.95);
            let u = random_vec(&mut rng, 6);
            let zc = moebius::to_complex(&p);
            let uc = moebius::to_complex(&u);
            let pair: num_complex::Complex64 = zc.iter().zip(uc.iter()).map(|(z, du)| z.conj() * du).sum();
            let c = 1.0 - p.norm_squared();
            let direct = u.norm_squared() / c + pair.norm_sqr() / (c * c);
            let value = metric_eval(MetricKind::Bergman, &p, &u, &u).unwrap();
            assert!((value - direct).abs() < 1e-12 * direct.max(1.0));
            // the polar display dr^2/(1-r^2)^2 + r^2 theta^2/(1-r^2)^2 + r^2 eta/(1-r^2)
            let r = p.norm();
            let polar = ambient::dr(&p, &u).unwrap().powi(2) / (c * c)
                + r * r * ambient::theta(&p, &u).unwrap().powi(2) / (c * c)
                + r * r * ambient::eta(&p, &u, &u).unwrap() / c;
            assert!((value - polar).abs() < 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn s_map_values_and_pullback() {
        assert_eq!(s_map(&DVector::zeros(4)).unwrap(), DVector::zeros(4));
        let p = DVector::from_vec(vec![0.0, 0.8, 0.0, 0.0]);
        assert!((s_map(&p).unwrap().norm() - 0.5).abs() < 1e-15);
        let q = DVector::from_vec(vec![0.5, 0.0, 0.0, 0.0]);
        assert!((s_map_inv(&q).unwrap().norm() - 0.8).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let z = random_ball(&mut rng, 6, 0.95);
            assert!((s_map_inv(&s_map(&z).unwrap()).unwrap() - &z).norm() < 1e-14);
            let (u, v) = (random_vec(&mut rng, 6), random_vec(&mut rng, 6));
            let sz = s_map(&z).unwrap();
            let su = pushforward(|y| s_map(y).unwrap(), &z, &u);
            let sv = pushforward(|y| s_map(y).unwrap(), &z, &v);
            let pulled = metric_eval(MetricKind::ModifiedBergman, &sz, &su, &sv).unwrap();
            let direct = metric_eval(MetricKind::Bergman, &z, &u, &v).unwrap();
            assert!((pulled - direct).abs() < 1e-6 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn geodesic_ball_radius_values() {
        assert_eq!(geodesic_ball_radius(0.0).unwrap(), 0.0);
        assert!((geodesic_ball_radius(2.0).unwrap() - 0.761594).abs() < 1e-6);
        for r in [0.5, 1.0, 5.0] {
            assert!((2.0 * geodesic_ball_radius(r).unwrap().atanh() - r).abs() < 1e-12);
        }
        assert!(geodesic_ball_radius(-1.0).is_err());
    }

    #[test]
    fn radial_distances() {
        let o = ModelPoint::bergman(DVector::zeros(4)).unwrap();
        let w = ModelPoint::bergman(DVector::from_vec(vec![0.0, 0.0, 0.5, 0.0])).unwrap();
        assert!((dist_ch(&o, &w) - 0.549306144334).abs() < 1e-10);
        assert_eq!(dist_ch(&w, &w), 0.0);
        // Radial integral of the Bergman coefficient 1 / (1 - r^2).
        let quad = gauss_quad::legendre::GaussLegendre::new(30).unwrap();
        let integral = quad.integrate(0.0, 0.5, |r| 1.0 / (1.0 - r * r));
        assert!((dist_ch(&o, &w) - integral).abs() < 1e-12);
        let om = ModelPoint::modified(DVector::zeros(4)).unwrap();
        let wm = ModelPoint::modified(DVector::from_vec(vec![0.0, 0.5, 0.0, 0.0])).unwrap();
        assert!((dist_ch(&om, &wm) - 2.0 * 0.5f64.atanh()).abs() < 1e-12);
    }

    #[test]
    fn distance_is_a_metric_and_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..100 {
            let pts: Vec<ModelPoint> =
                (0..3).map(|_| ModelPoint::bergman(random_ball(&mut rng, 6, 0.97)).unwrap()).collect();
            let (a, b, c) = (&pts[0], &pts[1], &pts[2]);
            assert!((dist_ch(a, b) - dist_ch(b, a)).abs() < 1e-10);
            assert!(dist_ch(a, c) <= dist_ch(a, b) + dist_ch(b, c) + 1e-10);
            let f = MoebiusMap::random(&mut rng, 2, 0.8);
            let fa = ModelPoint::bergman(f.apply(&a.point).unwrap()).unwrap();
            let fb = ModelPoint::bergman(f.apply(&b.point).unwrap()).unwrap();
            assert!((dist_ch(&fa, &fb) - dist_ch(a, b)).abs() < 1e-8);
        }
        let z = DVector::from_vec(vec![0.3, 0.2, -0.1, 0.4]);
        let w = &z + DVector::from_vec(vec![1e-7, 0.0, 0.0, 0.0]);
        let d = bergman_distance(&z, &w);
        let g = metric_eval(MetricKind::Bergman, &z, &(&w - &z), &(&w - &z)).unwrap().sqrt();
        assert!((d - g).abs() < 1e-6 * g);
    }

    #[test]
    fn defects_keep_far_distances_accurate() {
        // Modified radius tanh(12) is Bergman radius tanh(24), which rounds to 1.
        let s = DVector::from_vec(vec![(12f64).tanh(), 0.0, 0.0, 0.0]);
        let p = ModelPoint::modified(s).unwrap();
        let o = ModelPoint::modified(DVector::zeros(4)).unwrap();
        assert!((dist_ch(&o, &p) - 24.0).abs() < 1e-5);
        let q = ModelPoint::modified(DVector::from_vec(vec![0.0, 0.0, 0.2, 0.0])).unwrap();
        // Pythagoras for the orthogonal totally real directions: cosh d = cosh a cosh b.
        let expected = ((24f64).cosh() * (2.0 * 0.2f64.atanh()).cosh()).acosh();
        assert!((dist_ch(&q, &p) - expected).abs() < 1e-5);
    }

    #[test]
    fn geodesic_balls_of_modified_model_are_euclidean_balls() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let o = ModelPoint::modified(DVector::zeros(6)).unwrap();
        for _ in 0..200 {
            let r = rng.gen_range(0.1..6.0);
            let p = ModelPoint::modified(random_ball(&mut rng, 6, 0.999)).unwrap();
            let inside = dist_ch(&o, &p) <= r;
            assert_eq!(inside, p.point.norm() <= geodesic_ball_radius(r).unwrap());
        }
    }

    #[test]
    fn j_tilde_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let v0 = random_vec(&mut rng, 4);
        assert!((j_tilde_b(&DVector::zeros(4), &v0).unwrap() - ambient::j(&v0)).norm() < 1e-15);
        for _ in 0..50 {
            let p = random_ball(&mut rng, 6, 0.95);
            let (u, v) = (random_vec(&mut rng, 6), random_vec(&mut rng, 6));
            let jj = j_tilde_b(&p, &j_tilde_b(&p, &v).unwrap()).unwrap();
            assert!((jj + &v).norm() < 1e-10 * v.norm().max(1.0));
            let compat = metric_eval(MetricKind::ModifiedBergman, &p, &u, &j_tilde_b(&p, &v).unwrap()).unwrap();
            let w = symplectic_form(MetricKind::ModifiedBergman, &p, &u, &v).unwrap();
            assert!((compat - w).abs() < 1e-8 * w.abs().max(1.0));
            let compat_b = metric_eval(MetricKind::Bergman, &p, &u, &ambient::j(&v)).unwrap();
            let wb = symplectic_form(MetricKind::Bergman, &p, &u, &v).unwrap();
            assert!((compat_b - wb).abs() < 1e-10 * wb.abs().max(1.0));
        }
    }

    #[test]
    fn j_tilde_is_conjugate_of_j_by_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..30 {
            let p = random_ball(&mut rng, 6, 0.9);
            let v = random_vec(&mut rng, 6);
            let q = s_map_inv(&p).unwrap();
            let pulled = pushforward(|y| s_map_inv(y).unwrap(), &p, &v);
            let conj = pushforward(|y| s_map(y).unwrap(), &q, &ambient::j(&pulled));
            assert!((conj - j_tilde_b(&p, &v).unwrap()).norm() < 1e-5 * v.norm().max(1.0));
        }
    }

    #[test]
    fn christoffel_of_poincare_matches_conformal_formula() {
        // Gamma(u, v) = u(phi) v + v(phi) u - g(u, v) grad phi, phi = log 2 - log(1 - s^2)
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..20 {
            let p = random_ball(&mut rng, 4, 0.9);
            let (u, v) = (random_vec(&mut rng, 4), random_vec(&mut rng, 4));
            let grad = &p * (2.0 / (1.0 - p.norm_squared()));
            let expected = &v * grad.dot(&u) + &u * grad.dot(&v) - &grad * u.dot(&v);
            let got = christoffel(MetricKind::Poincare, &p, &u, &v).unwrap();
            assert!((got - &expected).norm() < 1e-6 * expected.norm().max(1.0));
        }
    }
}
