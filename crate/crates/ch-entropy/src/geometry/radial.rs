use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{volume_cloud, Axis, Chart, Submanifold, Target};
use crate::ambient::{self, AmbientVector};
use crate::error::{Error, Result};
use crate::models::{self, MetricKind};
use crate::moebius::MoebiusMap;

/// Panel boundaries in hyperbolic radius; denser near the vertex where
/// small-scale kernels concentrate.
pub const DEFAULT_RADIAL_BREAKS: [f64; 19] =
    [0.0, 0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0, 32.0];

const DEFAULT_RADIAL_NODES: usize = 16;

/// Points in Bergman coordinates with their defects `1 - |z|^2` and
/// volume weights for the complex hyperbolic metric.
#[derive(Clone, Debug, Default)]
pub struct BergmanCloud {
    pub points: Vec<AmbientVector>,
    pub defects: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BergmanCloud {
    /// From a submanifold charted in modified Bergman coordinates.
    pub fn from_modified(sigma: &Submanifold) -> Result<Self> {
        let cloud = volume_cloud(sigma, MetricKind::ModifiedBergman)?;
        let mut out = BergmanCloud::default();
        for (s, w) in cloud.points.iter().zip(cloud.weights) {
            let (z, defect) = models::modified_to_bergman_with_defect(s);
            out.points.push(z);
            out.defects.push(defect);
            out.weights.push(w);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Image under an isometry; volume weights are unchanged and defects
    /// follow `1 - |Phi(z)|^2 = W(z) (1 - |z|^2)`.
    pub fn transform(&self, map: &MoebiusMap) -> Self {
        let (points, defects): (Vec<_>, Vec<_>) = self
            .points
            .par_iter()
            .zip(self.defects.par_iter())
            .map(|(z, &d)| (map.apply_raw(z), map.weight(z) * d))
            .unzip();
        BergmanCloud { points, defects, weights: self.weights.clone() }
    }

    /// Distances from a Bergman point with defect `d0`.
    pub fn distances(&self, x0: &AmbientVector, d0: f64) -> Vec<f64> {
        self.points
            .par_iter()
            .zip(self.defects.par_iter())
            .map(|(z, &d)| models::bergman_distance_parts(z, d, x0, d0))
            .collect()
    }
}

/// Per-node data of the link needed for the cone volume density.
#[derive(Clone, Debug)]
struct LinkNode {
    point: AmbientVector,
    weight: f64,
    sqrt_det: f64,
    // theta^T G^{-1} theta for the link frame
    theta_sq: f64,
}

/// The hyperbolic cone `(rho, u) -> tanh(rho / 2) Gamma(u)` over a link in
/// the sphere (modified Bergman coordinates), optionally moved by an
/// isometry. Its induced metric is `drho^2 + sinh^2 rho g_Gamma +
/// sinh^4 rho theta^2`, so clouds are built from the link alone.
#[derive(Clone, Debug)]
pub struct RadialFamily {
    link: Submanifold,
    isometry: Option<MoebiusMap>,
    breaks: Vec<f64>,
    radial_nodes: usize,
}

impl RadialFamily {
    pub fn new(link: Submanifold) -> Result<Self> {
        if link.charts().iter().any(|c| c.target() != Target::Sphere) {
            return Err(Error::Validation("radial families need a link in the sphere".into()));
        }
        Ok(RadialFamily {
            link,
            isometry: None,
            breaks: DEFAULT_RADIAL_BREAKS.to_vec(),
            radial_nodes: DEFAULT_RADIAL_NODES,
        })
    }

    /// Compose with an automorphism acting in Bergman coordinates.
    pub fn with_isometry(mut self, map: MoebiusMap) -> Self {
        self.isometry = Some(match self.isometry.take() {
            Some(prev) => map.compose(&prev),
            None => map,
        });
        self
    }

    pub fn with_radial_nodes(mut self, nodes: usize) -> Self {
        self.radial_nodes = nodes;
        self
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn link(&self) -> &Submanifold {
        &self.link
    }

    pub fn isometry(&self) -> Option<&MoebiusMap> {
        self.isometry.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.link.dim() + 1
    }

    pub fn ambient_n(&self) -> usize {
        self.link.ambient_n()
    }

    pub fn max_radius(&self) -> f64 {
        self.breaks.last().copied().unwrap_or(0.0)
    }

    /// Image of the origin, in modified coordinates.
    pub fn base_point(&self) -> AmbientVector {
        let origin = AmbientVector::zeros(2 * self.ambient_n() + 2);
        match &self.isometry {
            Some(map) => models::s_map(&map.apply_raw(&origin)).expect("automorphisms preserve the ball"),
            None => origin,
        }
    }

    /// Bergman coordinates and defect of the point at radius `rho` over the
    /// link point `xi`.
    pub fn bergman_point(&self, rho: f64, xi: &AmbientVector) -> (AmbientVector, f64) {
        let z = xi * rho.tanh();
        let defect = 1.0 / rho.cosh().powi(2);
        match &self.isometry {
            Some(map) => (map.apply_raw(&z), map.weight(&z) * defect),
            None => (z, defect),
        }
    }

    pub fn modified_point(&self, rho: f64, xi: &AmbientVector) -> AmbientVector {
        match &self.isometry {
            None => xi * (0.5 * rho).tanh(),
            Some(map) => {
                let z = map.apply_raw(&(xi * rho.tanh()));
                let defect = map.weight(&(xi * rho.tanh())) / rho.cosh().powi(2);
                z / (1.0 + defect.sqrt())
            }
        }
    }

    /// The piece `rho_a <= rho <= rho_b` as a chart-based submanifold in
    /// modified coordinates.
    pub fn submanifold(&self, rho_a: f64, rho_b: f64) -> Result<Submanifold> {
        if !(0.0 <= rho_a && rho_a < rho_b) {
            return Err(Error::Domain(format!("radial range ({rho_a}, {rho_b})")));
        }
        let mut charts = Vec::new();
        for chart in self.link.charts() {
            let mut axes = vec![Axis::interval(rho_a, rho_b).with_nodes(self.radial_nodes)];
            axes.extend_from_slice(chart.axes());
            let (family, link_chart) = (self.clone(), chart.clone());
            charts.push(
                Chart::new(axes, Target::Interior, move |u: &[f64]| {
                    family.modified_point(u[0], &link_chart.embed(&u[1..]))
                })
                .with_weight(chart.weight()),
            );
        }
        Ok(Submanifold::new(charts)?.with_base_point(self.base_point()))
    }

    /// The piece `0 <= rho <= rho_max` over the link, after the isometry.
    pub fn bergman_cloud(&self, rho_max: f64) -> Result<BergmanCloud> {
        let links = self.link_nodes()?;
        let mut panels: Vec<(f64, f64)> =
            self.breaks.windows(2).filter(|w| w[0] < rho_max).map(|w| (w[0], w[1].min(rho_max))).collect();
        if panels.is_empty() {
            panels.push((0.0, rho_max));
        }
        let m = self.dim() as i32;
        let mut radial = Vec::new();
        for (a, b) in panels {
            radial.extend(Axis::interval(a, b).with_nodes(self.radial_nodes).rule()?);
        }
        let mut cloud = BergmanCloud::default();
        for &(rho, w_rho) in &radial {
            let sinh = rho.sinh();
            for node in &links {
                let density = sinh.powi(m - 1) * node.sqrt_det * (1.0 + sinh * sinh * node.theta_sq).sqrt();
                let z = &node.point * rho.tanh();
                cloud.points.push(z);
                cloud.defects.push(1.0 / rho.cosh().powi(2));
                cloud.weights.push(w_rho * node.weight * density);
            }
        }
        Ok(match &self.isometry {
            Some(map) => cloud.transform(map),
            None => cloud,
        })
    }

    fn link_nodes(&self) -> Result<Vec<LinkNode>> {
        let mut out = Vec::new();
        for (chart, grid) in self.link.charts_with_grids() {
            for (u, &w) in grid.nodes.iter().zip(&grid.weights) {
                let point = chart.embed(u);
                let jac = chart.jacobian(u);
                let (sqrt_det, theta_sq) = if jac.ncols() == 0 {
                    (1.0, 0.0)
                } else {
                    let gram: DMatrix<f64> = jac.transpose() * &jac;
                    let chol = gram
                        .cholesky()
                        .ok_or_else(|| Error::Singular(format!("rank-deficient link frame at {u:?}")))?;
                    let theta = jac.transpose() * ambient::reeb_field(&point);
                    let solved = chol.solve(&theta);
                    (chol.l().diagonal().product(), theta.dot(&solved))
                };
                out.push(LinkNode { point, weight: w * chart.weight(), sqrt_det, theta_sq });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{integrate, pairwise_sum};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn real_circle() -> Submanifold {
        let chart = Chart::new(vec![Axis::periodic(0.0, 2.0 * PI).with_nodes(64)], Target::Sphere, |u: &[f64]| {
            DVector::from_vec(vec![u[0].cos(), 0.0, u[0].sin(), 0.0])
        });
        Submanifold::new(vec![chart]).unwrap()
    }

    // A small circle of latitude in a Hopf fibre direction; not horizontal.
    fn latitude_circle() -> Submanifold {
        let (a, b) = (0.5f64.cos(), 0.5f64.sin());
        let chart =
            Chart::new(vec![Axis::periodic(0.0, 2.0 * PI).with_nodes(64)], Target::Sphere, move |u: &[f64]| {
                DVector::from_vec(vec![a * u[0].cos(), a * u[0].sin(), b, 0.0])
            });
        Submanifold::new(vec![chart]).unwrap()
    }

    #[test]
    fn real_disk_cloud_has_hyperbolic_area() {
        let family = RadialFamily::new(real_circle()).unwrap();
        let cloud = family.bergman_cloud(3.0).unwrap();
        let area = pairwise_sum(&cloud.weights);
        assert!((area - 2.0 * PI * (3f64.cosh() - 1.0)).abs() < 1e-8 * area);
    }

    #[test]
    fn cloud_matches_chart_quadrature() {
        for (label, link) in [("real", real_circle()), ("latitude", latitude_circle())] {
            let family = RadialFamily::new(link).unwrap();
            let cloud = family.bergman_cloud(2.0).unwrap();
            let piece = family.submanifold(0.0, 2.0).unwrap();
            let direct = integrate(&piece, MetricKind::ModifiedBergman, |_| 1.0).unwrap();
            let analytic = pairwise_sum(&cloud.weights);
            assert!((direct - analytic).abs() < 1e-6 * direct, "{label}: {direct} vs {analytic}");
        }
    }

    #[test]
    fn isometries_move_points_but_not_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = MoebiusMap::random(&mut rng, 1, 0.6);
        let family = RadialFamily::new(real_circle()).unwrap();
        let moved = family.clone().with_isometry(map.clone());
        let a = family.bergman_cloud(4.0).unwrap();
        let b = moved.bergman_cloud(4.0).unwrap();
        assert_eq!(a.weights, b.weights);
        for k in (0..a.len()).step_by(97) {
            assert!((b.defects[k] - (1.0 - b.points[k].norm_squared())).abs() < 1e-12);
            assert!((b.points[k].clone() - map.apply_raw(&a.points[k])).norm() < 1e-12);
        }
        let base = moved.base_point();
        let expected = models::s_map(&map.apply_raw(&DVector::zeros(4))).unwrap();
        assert!((base - expected).norm() < 1e-14);
        // modified points agree with S o Phi o S^-1 in the well-conditioned range
        let xi = DVector::from_vec(vec![0.6, 0.0, 0.8, 0.0]);
        let direct = models::s_map(&map.apply_raw(&models::s_map_inv(&(&xi * 0.5f64.tanh())).unwrap())).unwrap();
        assert!((moved.modified_point(1.0, &xi) - direct).norm() < 1e-13);
    }
}
