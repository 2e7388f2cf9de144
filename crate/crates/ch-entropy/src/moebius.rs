//! Holomorphic automorphisms of the unit ball in C^{n+1} and the CR
//! automorphisms of the sphere they induce.
//!
//! Every map is stored in the normal form `z -> A Phi_b(z)` with `A`
//! unitary and `|b| < 1`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ambient::{self, AmbientVector, BallPoint, SpherePoint};
use crate::error::{Error, Result};
use crate::fd;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Largest admissible translation length; larger inputs are clamped.
pub const MAX_B: f64 = 1.0 - 1e-9;

pub fn to_complex(v: &AmbientVector) -> CVector {
    DVector::from_fn(v.len() / 2, |k, _| Complex64::new(v[2 * k], v[2 * k + 1]))
}

pub fn to_real(z: &CVector) -> AmbientVector {
    DVector::from_fn(2 * z.len(), |k, _| if k % 2 == 0 { z[k / 2].re } else { z[k / 2].im })
}

/// `conj(b) . z`
fn hermitian(b: &CVector, z: &CVector) -> Complex64 {
    b.iter().zip(z.iter()).map(|(bk, zk)| bk.conj() * zk).sum()
}

fn clamp_translation(mut b: CVector) -> CVector {
    let norm = b.norm();
    if norm > MAX_B {
        warn!("translation |b| = {norm} clamped to {MAX_B}");
        b *= Complex64::new(MAX_B / norm, 0.0);
    }
    b
}

/// `Phi_b` without domain checks; the formula is analytic on a
/// neighbourhood of the closed ball.
pub(crate) fn phi_b_raw(b: &CVector, z: &CVector) -> CVector {
    let bb = b.norm_squared();
    let c = (1.0 - bb).sqrt();
    let denom = Complex64::new(1.0, 0.0) + hermitian(b, z);
    let zpart = z.map(|zk| zk * c / denom);
    let coef = (Complex64::new(1.0, 0.0) + c / denom) / (1.0 + c);
    zpart + b.map(|bk| bk * coef)
}

/// The ball automorphism `Phi_b` with `Phi_b(0) = b` and `Phi_b(-b) = 0`.
pub fn phi_b(b: &BallPoint, z: &AmbientVector) -> Result<AmbientVector> {
    if b.as_vector().len() != z.len() {
        return Err(Error::Dimension { expected: b.as_vector().len(), got: z.len() });
    }
    check_closed_ball(z)?;
    let bc = clamp_translation(to_complex(b.as_vector()));
    Ok(to_real(&phi_b_raw(&bc, &to_complex(z))))
}

fn check_closed_ball(z: &AmbientVector) -> Result<()> {
    let norm = z.norm();
    if norm > 1.0 + 1e-10 {
        return Err(Error::Domain(format!("|z| = {norm} lies outside the closed ball")));
    }
    Ok(())
}

/// `W_b = (1 - |b|^2) / |1 + conj(b) . z|^2`, smooth on the closed ball.
pub fn weight(b: &AmbientVector, z: &AmbientVector) -> f64 {
    let bc = to_complex(b);
    let denom = Complex64::new(1.0, 0.0) + hermitian(&bc, &to_complex(z));
    (1.0 - bc.norm_squared()) / denom.norm_sqr()
}

/// The boundary weight of `Phi_b` at a sphere point.
pub fn weight_w(b: &BallPoint, p: &SpherePoint) -> f64 {
    weight(b.as_vector(), p.as_vector())
}

/// An automorphism `z -> A Phi_b(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MoebiusMap {
    a: CMatrix,
    b: CVector,
}

impl MoebiusMap {
    pub fn new(a: CMatrix, b: CVector) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() || b.len() < 2 {
            return Err(Error::Dimension { expected: b.len(), got: a.nrows() });
        }
        let defect = (a.adjoint() * &a - CMatrix::identity(b.len(), b.len())).norm();
        if defect > 1e-10 {
            return Err(Error::Validation(format!("A is not unitary: |A*A - I| = {defect:e}")));
        }
        if b.norm() >= 1.0 {
            warn!("translation |b| = {} is not inside the ball", b.norm());
        }
        Ok(MoebiusMap { a, b: clamp_translation(b) })
    }

    pub fn identity(n: usize) -> Self {
        MoebiusMap { a: CMatrix::identity(n + 1, n + 1), b: CVector::zeros(n + 1) }
    }

    pub fn translation(b: &BallPoint) -> Self {
        let bc = to_complex(b.as_vector());
        let k = bc.len();
        MoebiusMap { a: CMatrix::identity(k, k), b: clamp_translation(bc) }
    }

    pub fn unitary(a: CMatrix) -> Result<Self> {
        let k = a.nrows();
        Self::new(a, CVector::zeros(k))
    }

    /// A seeded random map with `|b| <= max_b`.
    pub fn random(rng: &mut impl Rng, n: usize, max_b: f64) -> Self {
        let k = n + 1;
        let m = CMatrix::from_fn(k, k, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let a = polar_unitary(&m);
        let dir = CVector::from_fn(k, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let len = max_b * rng.gen::<f64>();
        let b = dir.map(|c| c * (len / dir.norm()));
        MoebiusMap { a, b }
    }

    pub fn n(&self) -> usize {
        self.b.len() - 1
    }

    pub fn unitary_part(&self) -> &CMatrix {
        &self.a
    }

    pub fn translation_part(&self) -> &CVector {
        &self.b
    }

    pub fn translation_real(&self) -> AmbientVector {
        to_real(&self.b)
    }

    pub fn apply(&self, z: &AmbientVector) -> Result<AmbientVector> {
        if z.len() != 2 * self.b.len() {
            return Err(Error::Dimension { expected: 2 * self.b.len(), got: z.len() });
        }
        check_closed_ball(z)?;
        Ok(self.apply_raw(z))
    }

    /// Evaluation without the closed-ball check, for finite differences
    /// straddling the sphere.
    pub fn apply_raw(&self, z: &AmbientVector) -> AmbientVector {
        to_real(&self.apply_c(&to_complex(z)))
    }

    fn apply_c(&self, z: &CVector) -> CVector {
        &self.a * phi_b_raw(&self.b, z)
    }

    fn apply_inverse_c(&self, w: &CVector) -> CVector {
        let neg = -self.b.clone();
        phi_b_raw(&neg, &(self.a.adjoint() * w))
    }

    pub fn apply_inverse(&self, w: &AmbientVector) -> AmbientVector {
        to_real(&self.apply_inverse_c(&to_complex(w)))
    }

    /// The boundary weight of the map, `W_b`; the unitary factor has weight 1.
    pub fn weight(&self, z: &AmbientVector) -> f64 {
        weight(&to_real(&self.b), z)
    }

    /// `self o other`, refactored into normal form.
    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        let origin_preimage = other.apply_inverse_c(&self.apply_inverse_c(&CVector::zeros(self.b.len())));
        normal_form(|z| self.apply_c(&other.apply_c(z)), -origin_preimage)
    }

    pub fn invert(&self) -> MoebiusMap {
        // The inverse sends f(0) to the origin.
        let origin_preimage = self.apply_c(&CVector::zeros(self.b.len()));
        normal_form(|w| self.apply_inverse_c(w), -origin_preimage)
    }
}

/// Recovers `(A', b')` for a map `h` known pointwise, given `b'` (minus the
/// preimage of the origin): `A'` solves `A' Phi_b'(z_k) = h(z_k)` in least
/// squares over n + 2 reference points, then is projected to U(n+1).
fn normal_form(h: impl Fn(&CVector) -> CVector, b: CVector) -> MoebiusMap {
    let b = clamp_translation(b);
    let k = b.len();
    let refs: Vec<CVector> = (0..=k)
        .map(|i| {
            if i < k {
                let mut z = CVector::zeros(k);
                z[i] = Complex64::new(0.5, 0.0);
                z
            } else {
                CVector::from_element(k, Complex64::new(0.3, 0.2) / (k as f64).sqrt())
            }
        })
        .collect();
    let w = CMatrix::from_columns(&refs.iter().map(|z| phi_b_raw(&b, z)).collect::<Vec<_>>());
    let hz = CMatrix::from_columns(&refs.iter().map(&h).collect::<Vec<_>>());
    // A' W = H  <=>  W* A'* = H*
    let lhs = w.adjoint();
    let rhs = hz.adjoint();
    let solved = lhs.svd(true, true).solve(&rhs, 1e-14).expect("SVD with vectors requested");
    let a = polar_unitary(&solved.adjoint());
    MoebiusMap { a, b }
}

/// Unitary factor of the polar decomposition.
fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

#[derive(Serialize, Deserialize)]
struct MoebiusJson {
    #[serde(rename = "A")]
    a: Vec<[f64; 2]>,
    b: Vec<f64>,
}

impl Serialize for MoebiusMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let k = self.b.len();
        let a = (0..k * k).map(|i| self.a[(i / k, i % k)]).map(|c| [c.re, c.im]).collect();
        MoebiusJson { a, b: to_real(&self.b).iter().copied().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MoebiusMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MoebiusJson::deserialize(d)?;
        let k = raw.b.len() / 2;
        if raw.b.len() % 2 != 0 || raw.a.len() != k * k {
            return Err(serde::de::Error::custom("inconsistent MoebiusMap dimensions"));
        }
        let a = CMatrix::from_fn(k, k, |i, j| {
            let [re, im] = raw.a[i * k + j];
            Complex64::new(re, im)
        });
        let b = to_complex(&DVector::from_vec(raw.b));
        MoebiusMap::new(a, b).map_err(serde::de::Error::custom)
    }
}

/// Residuals of the boundary pullback identities at one sphere point,
/// maximized over an ambient basis (forms) or a tangent basis (metric).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullbackResiduals {
    pub dr: f64,
    pub theta: f64,
    pub dtheta: f64,
    pub metric: f64,
}

impl PullbackResiduals {
    pub fn max(&self) -> f64 {
        self.dr.max(self.theta).max(self.dtheta).max(self.metric)
    }
}

fn basis(len: usize) -> Vec<AmbientVector> {
    (0..len).map(|i| DVector::from_fn(len, |k, _| if k == i { 1.0 } else { 0.0 })).collect()
}

pub fn pullback_checks(map: &MoebiusMap, p: &SpherePoint) -> Result<PullbackResiduals> {
    let pv = p.as_vector();
    if pv.len() != 2 * map.b.len() {
        return Err(Error::Dimension { expected: 2 * map.b.len(), got: pv.len() });
    }
    let h = fd::FIRST_STEP;
    let q = map.apply_raw(pv);
    let push = |v: &AmbientVector| fd::directional_vec(|z| map.apply_raw(z), pv, v, h);
    let bvec = map.translation_real();
    let w = weight(&bvec, pv);
    let dw = fd::gradient(|z| weight(&bvec, z), pv, h);
    let es = basis(pv.len());
    let pushed: Vec<AmbientVector> = es.iter().map(push).collect();

    let mut res = PullbackResiduals { dr: 0.0, theta: 0.0, dtheta: 0.0, metric: 0.0 };
    for (e, de) in es.iter().zip(&pushed) {
        res.dr = res.dr.max((ambient::dr(&q, de)? - w * ambient::dr(pv, e)?).abs());
        res.theta = res.theta.max((ambient::theta(&q, de)? - w * ambient::theta(pv, e)?).abs());
    }
    let r = pv.norm();
    for (a, (u, du)) in es.iter().zip(&pushed).enumerate() {
        for (v, dv) in es.iter().zip(&pushed).skip(a + 1) {
            let lhs = ambient::dtheta(&q, du, dv)?;
            let (dru, drv) = (ambient::dr(pv, u)?, ambient::dr(pv, v)?);
            let (thu, thv) = (ambient::theta(pv, u)?, ambient::theta(pv, v)?);
            let (dwu, dwv) = (dw.dot(u), dw.dot(v));
            let (dwju, dwjv) = (dw.dot(&ambient::j(u)), dw.dot(&ambient::j(v)));
            let rhs = w * ambient::dtheta(pv, u, v)?
                + 2.0 * (w - w * w) * r * (dru * thv - drv * thu)
                + (dwu * thv - dwv * thu)
                + (dru * dwjv - drv * dwju);
            res.dtheta = res.dtheta.max((lhs - rhs).abs());
        }
    }
    let tangent: Vec<AmbientVector> = es.iter().map(|e| ambient::sphere_tangent(pv, e)).collect();
    let grad_h_log = ambient::horizontal_gradient(|z| weight(&bvec, z).ln(), p);
    let coeff = w + 0.25 * grad_h_log.norm_squared();
    for u in &tangent {
        for v in &tangent {
            let lhs = push(u).dot(&push(v));
            let (thu, thv) = (ambient::theta(pv, u)?, ambient::theta(pv, v)?);
            let (om_u, om_v) = (omega_hat(&grad_h_log, p, u), omega_hat(&grad_h_log, p, v));
            let eta = ambient::eta(pv, u, v)?;
            let rhs = w * (eta + om_u * thv + thu * om_v + coeff * thu * thv);
            res.metric = res.metric.max((lhs - rhs).abs());
        }
    }
    Ok(res)
}

fn omega_hat(grad_h_log: &AmbientVector, p: &SpherePoint, v: &AmbientVector) -> f64 {
    0.5 * grad_h_log.dot(&ambient::j_sphere(p, v))
}

/// `omega_b(v) = 1/2 d log W_b (J_S v)`, through the horizontal gradient.
pub fn omega_b(b: &BallPoint, p: &SpherePoint, v: &AmbientVector) -> f64 {
    let bvec = b.as_vector().clone();
    let grad = ambient::horizontal_gradient(|z| weight(&bvec, z).ln(), p);
    omega_hat(&grad, p, v)
}

/// Residual of `d_r W = W^2 - W + |grad_H W|^2 / (4 W)` on the sphere.
pub fn radial_w_identity(b: &BallPoint, p: &SpherePoint) -> f64 {
    let bvec = b.as_vector();
    let pv = p.as_vector();
    let w = weight(bvec, pv);
    let dr_w = fd::derivative(|t| weight(bvec, &(pv * t)), 1.0, fd::FIRST_STEP);
    let grad = ambient::horizontal_gradient(|z| weight(bvec, z), p);
    dr_w - (w * w - w + 0.25 * grad.norm_squared() / w)
}
