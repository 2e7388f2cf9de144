//! Chart-based submanifolds of the ball and of the sphere: quadrature,
//! induced volume, second fundamental forms in every metric kind, and the
//! cone and radial-family constructions used by the example catalog.

mod chart;
mod curvature;
mod radial;
mod rank_one;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use chart::{Axis, Chart, EmbedFn, JacobianFn, QuadratureGrid, Target, DEFAULT_NODES};
pub use curvature::{
    isotropy_report, mean_curvature, mean_curvature_modified_bergman, mean_curvature_modified_bergman_direct,
    second_fundamental_form, second_fundamental_form_with, IsotropyReport, ModifiedBergmanMeanCurvature,
    SecondFundamentalForm,
};
pub use radial::{BergmanCloud, RadialFamily, DEFAULT_RADIAL_BREAKS};
pub use rank_one::{
    poincare_rank_one, rank_one_second_ff, EndomorphismField, MetricField, RankOneData, RankOneResiduals, VectorField,
};

use crate::ambient::{self, AmbientVector};
use crate::error::{Error, Result};
use crate::models::{self, MetricKind};

/// Leading-order contribution of the excised vertex neighbourhood of a
/// Euclidean cone represented on `sigma >= s0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeTail {
    pub link_volume: f64,
    pub s0: f64,
}

#[derive(Clone, Debug)]
pub struct Submanifold {
    charts: Vec<Chart>,
    grids: Vec<QuadratureGrid>,
    dim: usize,
    ambient_n: usize,
    cone: Option<ConeTail>,
    base_point: Option<AmbientVector>,
}

impl Submanifold {
    /// Builds quadrature grids and checks that every node lands where the
    /// chart's target says.
    pub fn new(charts: Vec<Chart>) -> Result<Self> {
        let first = charts.first().ok_or_else(|| Error::Validation("submanifold without charts".into()))?;
        let dim = first.param_dim();
        let mut grids = Vec::with_capacity(charts.len());
        let mut ambient_len = None;
        for chart in &charts {
            if chart.param_dim() != dim {
                return Err(Error::Dimension { expected: dim, got: chart.param_dim() });
            }
            let grid = chart.grid()?;
            for u in &grid.nodes {
                let x = chart.embed(u);
                match ambient_len {
                    None => {
                        ambient::ambient_n(&x)?;
                        ambient_len = Some(x.len());
                    }
                    Some(len) if len != x.len() => return Err(Error::Dimension { expected: len, got: x.len() }),
                    Some(_) => {}
                }
                let norm = x.norm();
                let ok = match chart.target() {
                    Target::Interior => norm < 1.0,
                    Target::Sphere => (norm - 1.0).abs() <= 1e-8,
                };
                if !ok {
                    return Err(Error::Validation(format!(
                        "{:?} chart node {u:?} embeds at |x| = {norm}",
                        chart.target()
                    )));
                }
            }
            grids.push(grid);
        }
        let ambient_n = ambient_len.map(|len| len / 2 - 1).unwrap_or_default();
        if dim > 2 * ambient_n + 2 {
            return Err(Error::Validation(format!("dimension {dim} exceeds the ambient dimension")));
        }
        Ok(Submanifold { charts, grids, dim, ambient_n, cone: None, base_point: None })
    }

    pub fn with_base_point(mut self, p: AmbientVector) -> Self {
        self.base_point = Some(p);
        self
    }

    pub(crate) fn with_cone_tail(mut self, tail: ConeTail) -> Self {
        self.cone = Some(tail);
        self
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn charts_with_grids(&self) -> impl Iterator<Item = (&Chart, &QuadratureGrid)> {
        self.charts.iter().zip(&self.grids)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n` for an ambient `C^{n+1}`.
    pub fn ambient_n(&self) -> usize {
        self.ambient_n
    }

    pub fn node_count(&self) -> usize {
        self.grids.iter().map(QuadratureGrid::len).sum()
    }

    pub fn cone_tail(&self) -> Option<ConeTail> {
        self.cone
    }

    /// A distinguished point (the vertex of a cone, the image of the
    /// origin for a radial family), if the constructor supplied one.
    pub fn base_point(&self) -> Option<&AmbientVector> {
        self.base_point.as_ref()
    }

    /// Same charts with `nodes` points on every axis.
    pub fn with_nodes(&self, nodes: usize) -> Result<Self> {
        let charts = self.charts.iter().map(|c| c.clone().with_nodes(nodes)).collect();
        let mut out = Submanifold::new(charts)?;
        out.cone = self.cone;
        out.base_point = self.base_point.clone();
        Ok(out)
    }

    /// The image under an ambient map, chart by chart.
    pub fn map(&self, f: Arc<dyn Fn(&AmbientVector) -> AmbientVector + Send + Sync>, target: Target) -> Result<Self> {
        let charts = self.charts.iter().map(|c| c.map(Arc::clone(&f), target)).collect();
        let mut out = Submanifold::new(charts)?;
        out.base_point = self.base_point.as_ref().map(|p| f(p));
        Ok(out)
    }

    /// Largest condition number of a coordinate frame over all nodes.
    pub fn max_condition_number(&self) -> f64 {
        self.charts_with_grids()
            .flat_map(|(chart, grid)| grid.nodes.iter().map(move |u| chart.jacobian(u)))
            .map(|jac| {
                if jac.ncols() == 0 {
                    return 1.0;
                }
                let sv = jac.singular_values();
                sv.max() / sv.min()
            })
            .fold(1.0, f64::max)
    }
}

/// Points of a submanifold with their volume weights (quadrature weight
/// times the induced volume density).
#[derive(Clone, Debug, Default)]
pub struct NodeCloud {
    pub points: Vec<AmbientVector>,
    pub weights: Vec<f64>,
}

impl NodeCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn metric_or_identity(kind: MetricKind, x: &AmbientVector) -> Result<DMatrix<f64>> {
    match kind {
        MetricKind::RoundSphere => Ok(DMatrix::identity(x.len(), x.len())),
        _ => models::metric_matrix(kind, x),
    }
}

/// `sqrt(det(J^T M J))` at a chart node.
pub fn volume_density(kind: MetricKind, chart: &Chart, u: &[f64]) -> Result<f64> {
    if chart.param_dim() == 0 {
        return Ok(1.0);
    }
    let x = chart.embed(u);
    let jac = chart.jacobian(u);
    let gram = jac.transpose() * metric_or_identity(kind, &x)? * &jac;
    let chol = gram.cholesky().ok_or_else(|| Error::Singular(format!("rank-deficient frame at node {u:?}")))?;
    Ok(chol.l().diagonal().product())
}

pub fn volume_cloud(sigma: &Submanifold, kind: MetricKind) -> Result<NodeCloud> {
    let mut cloud = NodeCloud::default();
    for (chart, grid) in sigma.charts_with_grids() {
        let pieces: Vec<(AmbientVector, f64)> = grid
            .nodes
            .par_iter()
            .zip(grid.weights.par_iter())
            .map(|(u, &w)| Ok((chart.embed(u), volume_density(kind, chart, u)? * w * chart.weight())))
            .collect::<Result<_>>()?;
        for (x, w) in pieces {
            cloud.points.push(x);
            cloud.weights.push(w);
        }
    }
    Ok(cloud)
}

/// Sum in a fixed binary-tree order, so parallel and serial evaluation
/// agree bit for bit.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sum of `f` against the volume weights of a node cloud.
pub fn integrate_cloud(cloud: &NodeCloud, f: impl Fn(&AmbientVector) -> f64 + Sync) -> Result<f64> {
    let terms: Vec<f64> = cloud
        .points
        .par_iter()
        .zip(cloud.weights.par_iter())
        .map(|(x, &w)| {
            let v = f(x) * w;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { node: x.iter().copied().collect() })
            }
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// `int_Sigma f dVol` in the metric `kind`. Cones built by
/// [`cone_over_link`] get the excised vertex ball added back to leading
/// order in its radius.
pub fn integrate(sigma: &Submanifold, kind: MetricKind, f: impl Fn(&AmbientVector) -> f64 + Sync) -> Result<f64> {
    let cloud = volume_cloud(sigma, kind)?;
    let mut total = integrate_cloud(&cloud, &f)?;
    if let Some(tail) = sigma.cone_tail() {
        let m = sigma.dim() as i32;
        let c: f64 = match kind {
            MetricKind::Poincare | MetricKind::ModifiedBergman => 2.0,
            _ => 1.0,
        };
        let vertex = AmbientVector::zeros(2 * sigma.ambient_n() + 2);
        total += f(&vertex) * tail.link_volume * (c * tail.s0).powi(m) / m as f64;
    }
    Ok(total)
}

/// Default inner radius for cones.
pub const CONE_DELTA: f64 = 1e-3;

/// The Euclidean cone `(sigma, u) -> sigma Gamma(u)` over a link in the
/// sphere, for `s0 <= sigma <= s1`.
pub fn cone_over_link(link: &Submanifold, s_range: (f64, f64)) -> Result<Submanifold> {
    let (s0, s1) = s_range;
    if !(0.0 < s0 && s0 < s1 && s1 < 1.0) {
        return Err(Error::Domain(format!("cone range must satisfy 0 < s0 < s1 < 1, got ({s0}, {s1})")));
    }
    let mut charts = Vec::with_capacity(link.charts().len());
    for chart in link.charts() {
        if chart.target() != Target::Sphere {
            return Err(Error::Validation("cone links must be charts in the sphere".into()));
        }
        let mut axes = vec![Axis::interval(s0, s1)];
        axes.extend_from_slice(chart.axes());
        let (embed_link, jac_link) = (chart.clone(), chart.clone());
        let cone = Chart::new(axes, Target::Interior, move |u: &[f64]| embed_link.embed(&u[1..]) * u[0])
            .with_jacobian(move |u: &[f64]| {
                let x = jac_link.embed(&u[1..]);
                let jac = jac_link.jacobian(&u[1..]);
                let mut out = DMatrix::zeros(x.len(), jac.ncols() + 1);
                out.set_column(0, &x);
                out.columns_mut(1, jac.ncols()).copy_from(&(jac * u[0]));
                out
            })
            .with_weight(chart.weight());
        charts.push(cone);
    }
    let link_volume = integrate(link, MetricKind::RoundSphere, |_| 1.0)?;
    let origin = AmbientVector::zeros(2 * link.ambient_n() + 2);
    Ok(Submanifold::new(charts)?.with_base_point(origin).with_cone_tail(ConeTail { link_volume, s0 }))
}

/// A random quadratic graph over a random 2-plane in `B^4`, for oracle
/// suites.
pub fn random_graph(rng: &mut impl rand::Rng) -> Chart {
    let basis = nalgebra::DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
    let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.4..0.4)).collect();
    let offset: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.15..0.15)).collect();
    Chart::new(vec![Axis::interval(-0.2, 0.2); 2], Target::Interior, move |u: &[f64]| {
        let (a, b) = (u[0] + offset[0], u[1] + offset[1]);
        let w0 = c[0] * a * a + c[1] * a * b + c[2] * b * b + c[6] * a;
        let w1 = c[3] * a * a + c[4] * a * b + c[5] * b * b + c[7] * b;
        basis.column(0) * a + basis.column(1) * b + basis.column(2) * w0 + basis.column(3) * w1
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use std::f64::consts::PI;

    pub(crate) fn great_circle() -> Submanifold {
        let chart = Chart::new(vec![Axis::periodic(0.0, 2.0 * PI)], Target::Sphere, |u: &[f64]| {
            DVector::from_vec(vec![u[0].cos(), 0.0, u[0].sin(), 0.0])
        });
        Submanifold::new(vec![chart]).unwrap()
    }

    #[test]
    fn pairwise_sum_matches_naive_sum() {
        let values: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        let naive: f64 = values.iter().sum();
        assert!((pairwise_sum(&values) - naive).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn node_validation_rejects_wrong_targets() {
        let chart = Chart::new(vec![Axis::interval(0.0, 1.0)], Target::Sphere, |u: &[f64]| {
            DVector::from_vec(vec![0.5 * u[0], 0.0, 0.0, 0.0])
        });
        assert!(Submanifold::new(vec![chart]).is_err());
        assert!(Submanifold::new(vec![]).is_err());
    }

    #[test]
    fn sphere_area() {
        // (theta, phi) on the real 2-sphere of S^5.
        let chart =
            Chart::new(vec![Axis::interval(0.0, PI), Axis::periodic(0.0, 2.0 * PI)], Target::Sphere, |u: &[f64]| {
                DVector::from_vec(vec![u[0].sin() * u[1].cos(), 0.0, u[0].sin() * u[1].sin(), 0.0, u[0].cos(), 0.0])
            });
        let sphere = Submanifold::new(vec![chart]).unwrap();
        let area = integrate(&sphere, MetricKind::RoundSphere, |_| 1.0).unwrap();
        assert!((area - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn hyperbolic_disk_area() {
        let s = (0.5f64).tanh();
        let chart =
            Chart::new(vec![Axis::interval(0.0, s), Axis::periodic(0.0, 2.0 * PI)], Target::Interior, |u: &[f64]| {
                DVector::from_vec(vec![u[0] * u[1].cos(), 0.0, u[0] * u[1].sin(), 0.0])
            });
        let disk = Submanifold::new(vec![chart]).unwrap();
        let area = integrate(&disk, MetricKind::ModifiedBergman, |_| 1.0).unwrap();
        assert!((area - 2.0 * PI * (1f64.cosh() - 1.0)).abs() < 1e-5);
    }

    #[test]
    fn reparametrization_invariance() {
        // u -> u + 0.3 sin(u) is a diffeomorphism of the circle.
        let base = great_circle();
        let chart = Chart::new(vec![Axis::periodic(0.0, 2.0 * PI)], Target::Sphere, |u: &[f64]| {
            let t = u[0] + 0.3 * u[0].sin();
            DVector::from_vec(vec![t.cos(), 0.0, t.sin(), 0.0])
        });
        let twisted = Submanifold::new(vec![chart]).unwrap();
        let f = |x: &AmbientVector| (x[0] + 2.0 * x[2]).exp();
        let a = integrate(&base, MetricKind::RoundSphere, f).unwrap();
        let b = integrate(&twisted, MetricKind::RoundSphere, f).unwrap();
        assert!((a - b).abs() < 1e-6 * a);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(&great_circle(), MetricKind::RoundSphere, |x| 1.0 / (x[0] - 1.0)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn cone_area_includes_vertex_tail() {
        // The cone over the great circle is a flat disk.
        let cone = cone_over_link(&great_circle(), (CONE_DELTA, 0.5)).unwrap();
        assert_eq!(cone.dim(), 2);
        let area = integrate(&cone, MetricKind::Euclidean, |_| 1.0).unwrap();
        assert!((area - PI * 0.25).abs() < 1e-8);
        let hyperbolic = integrate(&cone, MetricKind::Poincare, |_| 1.0).unwrap();
        let exact = 2.0 * PI * ((2.0 * 0.5f64.atanh()).cosh() - 1.0);
        assert!((hyperbolic - exact).abs() < 1e-6 * exact);
        assert!(cone_over_link(&great_circle(), (0.5, 0.2)).is_err());
    }
}
