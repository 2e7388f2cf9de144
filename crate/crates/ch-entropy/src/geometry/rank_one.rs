//! Second fundamental forms under a rank-one deformation `h = g + tau^2`,
//! `tau = g(T, .)`, where `nabla^g T = -a` with `a` skew for `g`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{second_fundamental_form_with, Chart, SecondFundamentalForm};
use crate::ambient::{self, AmbientVector};
use crate::error::{Error, Result};
use crate::models::{self, MetricKind};

pub type MetricField = Arc<dyn Fn(&AmbientVector) -> DMatrix<f64> + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&AmbientVector) -> AmbientVector + Send + Sync>;
pub type EndomorphismField = Arc<dyn Fn(&AmbientVector, &AmbientVector) -> AmbientVector + Send + Sync>;

#[derive(Clone)]
pub struct RankOneData {
    pub metric: MetricField,
    pub field: VectorField,
    /// `a(p, Z)`.
    pub a: EndomorphismField,
}

impl RankOneData {
    /// Gram matrix of `h` at `p`.
    pub fn deformed(&self, p: &AmbientVector) -> DMatrix<f64> {
        let g = (self.metric)(p);
        let tau = &g * (self.field)(p);
        g + &tau * tau.transpose()
    }
}

/// `g = g_P`, `T` the Reeb field `iz`, so that `h = g_B~`, with
/// `a(Z) = J Z - 2 g_R(Z, X) T / (1 - s^2) + 2 g_R(Z, T) X / (1 - s^2)`.
pub fn poincare_rank_one() -> RankOneData {
    RankOneData {
        metric: Arc::new(|p| models::metric_matrix(MetricKind::Poincare, p).expect("interior point")),
        field: Arc::new(ambient::reeb_field),
        a: Arc::new(|p, z| {
            let c = 1.0 - p.norm_squared();
            let t = ambient::reeb_field(p);
            ambient::j(z) - &t * (2.0 * z.dot(p) / c) + p * (2.0 * z.dot(&t) / c)
        }),
    }
}

/// Relative residuals (formula minus direct computation) of the two
/// second-fundamental-form relations and the two mean-curvature relations.
///
/// The `*_reeb_uncorrected` fields measure the pairing relations with the
/// prefactor `(1 + |T^T|^2) / (1 + |T|^2)` in front of the `a` terms and no
/// overall rescaling. That form drops the fact that `A^h` is only
/// h-normal: `g(A^h, T^T) = -g(A^h, T) |T^T|^2`, which rescales the whole
/// right side by `(1 + k |T^T|^2) / (1 + |T^T|^2)` with
/// `k = (1 + |T|^2) / (1 + |T^T|^2)`. They are kept for comparison and are
/// not part of [`RankOneResiduals::max`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneResiduals {
    pub second_ff_normal: f64,
    pub second_ff_reeb: f64,
    pub mean_normal: f64,
    pub mean_reeb: f64,
    pub second_ff_reeb_uncorrected: f64,
    pub mean_reeb_uncorrected: f64,
}

impl RankOneResiduals {
    pub fn max(&self) -> f64 {
        self.second_ff_normal.max(self.second_ff_reeb).max(self.mean_normal).max(self.mean_reeb)
    }
}

struct Frame<'a> {
    sff: &'a SecondFundamentalForm,
    t: AmbientVector,
    t_normal: AmbientVector,
}

impl Frame<'_> {
    fn g(&self, u: &AmbientVector, v: &AmbientVector) -> f64 {
        self.sff.inner(u, v)
    }

    /// Normal part orthogonal to the normal part of `T`.
    fn tilde(&self, v: &AmbientVector) -> AmbientVector {
        let vn = self.sff.normal_part(v);
        let tt = self.g(&self.t_normal, &self.t_normal);
        if tt < 1e-24 {
            return vn;
        }
        let c = self.g(&vn, &self.t) / tt;
        vn - &self.t_normal * c
    }

    fn norm(&self, v: &AmbientVector) -> f64 {
        self.g(v, v).max(0.0).sqrt()
    }
}

fn relative(diff: f64, a: f64, b: f64, floor: f64) -> f64 {
    diff / a.abs().max(b.abs()).max(floor)
}

pub fn rank_one_second_ff(data: &RankOneData, chart: &Chart, u0: &[f64]) -> Result<RankOneResiduals> {
    let metric = Arc::clone(&data.metric);
    let sff_g = second_fundamental_form_with(|p| metric(p), chart, u0)?;
    let sff_h = second_fundamental_form_with(|p| data.deformed(p), chart, u0)?;
    let p = sff_g.point.clone();
    let dim = p.len();
    let a = |z: &AmbientVector| (data.a)(&p, z);

    // skewness of a
    let mut skew: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..dim {
        let ek = DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 });
        for l in 0..dim {
            let el = DVector::from_fn(dim, |i, _| if i == l { 1.0 } else { 0.0 });
            let (x, y) = (sff_g.inner(&a(&ek), &el), sff_g.inner(&ek, &a(&el)));
            skew = skew.max((x + y).abs());
            scale = scale.max(x.abs());
        }
    }
    if skew > 1e-8 * scale.max(1.0) {
        return Err(Error::Precondition(format!("a is not g-skew: defect {skew:e}")));
    }

    let t = (data.field)(&p);
    let t_coords = sff_g.tangent_coords(&t);
    let t_top = &sff_g.frame * &t_coords;
    let frame = Frame { sff: &sff_g, t_normal: &t - &t_top, t: t.clone() };
    let tt = frame.g(&t, &t);
    let tt_top = frame.g(&t_top, &t_top);
    let k = (1.0 + tt) / (1.0 + tt_top);
    let t_hat_n = &t - &t_top * k;
    let lambda = (1.0 + k * tt_top) / (1.0 + tt_top);

    let m = sff_g.dim();
    let floor = sff_g.a.iter().flatten().map(|v| frame.norm(v)).fold(1e-8, f64::max);
    let mut out = RankOneResiduals {
        second_ff_normal: 0.0,
        second_ff_reeb: 0.0,
        mean_normal: 0.0,
        mean_reeb: 0.0,
        second_ff_reeb_uncorrected: 0.0,
        mean_reeb_uncorrected: 0.0,
    };
    for i in 0..m {
        let ei = sff_g.frame.column(i).clone_owned();
        for j in 0..m {
            let ej = sff_g.frame.column(j).clone_owned();
            let (ti, tj) = (frame.g(&t, &ei), frame.g(&t, &ej));
            let lhs = frame.tilde(&sff_h.a[i][j]);
            let rhs = frame.tilde(&sff_g.a[i][j]) - frame.tilde(&a(&ei)) * tj - frame.tilde(&a(&ej)) * ti;
            out.second_ff_normal = out.second_ff_normal.max(relative(
                frame.norm(&(&lhs - &rhs)),
                frame.norm(&lhs),
                frame.norm(&rhs),
                floor,
            ));

            let lhs = frame.g(&sff_h.a[i][j], &t_hat_n);
            let rhs =
                frame.g(&sff_g.a[i][j], &t) - (frame.g(&t_hat_n, &a(&ei)) * tj + frame.g(&t_hat_n, &a(&ej)) * ti) / k;
            out.second_ff_reeb = out.second_ff_reeb.max(relative((lhs - lambda * rhs).abs(), lhs, lambda * rhs, floor));
            out.second_ff_reeb_uncorrected =
                out.second_ff_reeb_uncorrected.max(relative((lhs - rhs).abs(), lhs, rhs, floor));
        }
    }

    let h_h = sff_h.mean_curvature();
    let h_g = sff_g.mean_curvature();
    let a_tt = sff_g.eval(&t_coords, &t_coords);
    let a_ttop = a(&t_top);
    let floor = floor.max(frame.norm(&h_g));

    let lhs = frame.tilde(&h_h);
    let rhs = frame.tilde(&h_g) - (frame.tilde(&a_tt) + frame.tilde(&a_ttop) * 2.0) / (1.0 + tt_top);
    out.mean_normal = relative(frame.norm(&(&lhs - &rhs)), frame.norm(&lhs), frame.norm(&rhs), floor);

    let lhs = frame.g(&h_h, &t_hat_n);
    let rhs = frame.g(&h_g, &t) - frame.g(&a_tt, &t) / (1.0 + tt_top) - 2.0 * frame.g(&a_ttop, &t) / (1.0 + tt);
    out.mean_reeb = relative((lhs - lambda * rhs).abs(), lhs, lambda * rhs, floor);
    out.mean_reeb_uncorrected = relative((lhs - rhs).abs(), lhs, rhs, floor);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_graph;
    use crate::geometry::{second_fundamental_form, Axis, Target};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn poincare_deformation_is_modified_bergman() {
        let data = poincare_rank_one();
        let p = DVector::from_vec(vec![0.2, -0.3, 0.1, 0.4]);
        let direct = models::metric_matrix(MetricKind::ModifiedBergman, &p).unwrap();
        assert!((data.deformed(&p) - &direct).norm() < 1e-12 * direct.norm());
    }

    #[test]
    fn hypothesis_on_t_holds_for_poincare() {
        // nabla^g_Z T = D_Z T + Gamma(Z, T) = -a(Z)
        let data = poincare_rank_one();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..10 {
            let p = DVector::from_fn(4, |_, _| rng.gen_range(-0.4..0.4));
            let z = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let gamma = models::christoffel(MetricKind::Poincare, &p, &z, &ambient::reeb_field(&p)).unwrap();
            let nabla = ambient::j(&z) * -1.0 + gamma;
            assert!((nabla + (data.a)(&p, &z)).norm() < 1e-7);
        }
    }

    #[test]
    fn trivial_deformation_has_zero_residual() {
        let data = RankOneData {
            metric: Arc::new(|p| DMatrix::identity(p.len(), p.len())),
            field: Arc::new(|p| AmbientVector::zeros(p.len())),
            a: Arc::new(|p, _| AmbientVector::zeros(p.len())),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let chart = random_graph(&mut rng);
        assert!(rank_one_second_ff(&data, &chart, &[0.0, 0.1]).unwrap().max() < 1e-12);
    }

    #[test]
    fn non_skew_endomorphism_is_rejected() {
        let mut data = poincare_rank_one();
        data.a = Arc::new(|_, z| z.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let chart = random_graph(&mut rng);
        assert!(matches!(rank_one_second_ff(&data, &chart, &[0.0, 0.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn relations_hold_for_the_poincare_instance() {
        let data = poincare_rank_one();
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        for _ in 0..20 {
            let chart = random_graph(&mut rng);
            let u = [rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15)];
            let res = rank_one_second_ff(&data, &chart, &u).unwrap();
            assert!(res.max() < 1e-4, "{res:?}");
        }
    }

    #[test]
    fn horizontal_tangent_leaves_mean_curvature_unchanged() {
        // The real slice has T normal everywhere, so T^top = 0 and H^h = H^g.
        let chart = Chart::new(vec![Axis::interval(-0.5, 0.5); 2], Target::Interior, |u: &[f64]| {
            DVector::from_vec(vec![u[0], 0.0, u[1] + 0.3 * u[0] * u[0], 0.0])
        });
        let u = [0.2, 0.1];
        let h_g = second_fundamental_form(&chart, MetricKind::Poincare, &u).unwrap().mean_curvature();
        let h_h = second_fundamental_form(&chart, MetricKind::ModifiedBergman, &u).unwrap().mean_curvature();
        assert!((h_g - h_h).norm() < 1e-6);
    }
}
