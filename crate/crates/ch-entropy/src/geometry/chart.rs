use std::fmt;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ambient::AmbientVector;
use crate::error::{Error, Result};
use crate::fd;

pub const DEFAULT_NODES: usize = 48;

/// One coordinate interval of a chart domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
    pub nodes: usize,
}

impl Axis {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Axis { lo, hi, periodic: false, nodes: DEFAULT_NODES }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Axis { lo, hi, periodic: true, nodes: DEFAULT_NODES }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Gauss-Legendre on intervals, the trapezoid rule on periodic axes.
    pub fn rule(&self) -> Result<Vec<(f64, f64)>> {
        if !(self.hi > self.lo) || self.nodes == 0 {
            return Err(Error::Validation(format!("degenerate axis {self:?}")));
        }
        let half = 0.5 * self.length();
        if self.periodic {
            let h = self.length() / self.nodes as f64;
            return Ok((0..self.nodes).map(|k| (self.lo + h * k as f64, h)).collect());
        }
        if self.nodes == 1 {
            return Ok(vec![(self.lo + half, self.length())]);
        }
        let rule = GaussLegendre::new(self.nodes).map_err(|e| Error::Validation(e.to_string()))?;
        let mut pairs: Vec<(f64, f64)> =
            rule.as_node_weight_pairs().iter().map(|&(x, w)| (self.lo + half * (x + 1.0), half * w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(pairs)
    }
}

/// Tensor-product quadrature over a chart box. Nodes are ordered with the
/// first axis varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn tensor(axes: &[Axis]) -> Result<Self> {
        let mut nodes = vec![Vec::with_capacity(axes.len())];
        let mut weights = vec![1.0];
        for axis in axes {
            let rule = axis.rule()?;
            let mut next_nodes = Vec::with_capacity(nodes.len() * rule.len());
            let mut next_weights = Vec::with_capacity(nodes.len() * rule.len());
            for (node, weight) in nodes.iter().zip(&weights) {
                for &(x, w) in &rule {
                    let mut extended = node.clone();
                    extended.push(x);
                    next_nodes.push(extended);
                    next_weights.push(weight * w);
                }
            }
            nodes = next_nodes;
            weights = next_weights;
        }
        Ok(QuadratureGrid { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Whether a chart parametrizes a piece of the open ball or of the unit
/// sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Interior,
    Sphere,
}

pub type EmbedFn = dyn Fn(&[f64]) -> AmbientVector + Send + Sync;
pub type JacobianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A parametrized piece of submanifold. Without an analytic Jacobian the
/// tangent frame comes from central differences of `embed`.
#[derive(Clone)]
pub struct Chart {
    axes: Vec<Axis>,
    target: Target,
    embed: Arc<EmbedFn>,
    jacobian: Option<Arc<JacobianFn>>,
    weight: f64,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("axes", &self.axes)
            .field("target", &self.target)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("weight", &self.weight)
            .finish()
    }
}

impl Chart {
    pub fn new(
        axes: Vec<Axis>,
        target: Target,
        embed: impl Fn(&[f64]) -> AmbientVector + Send + Sync + 'static,
    ) -> Self {
        Chart { axes, target, embed: Arc::new(embed), jacobian: None, weight: 1.0 }
    }

    pub fn with_jacobian(mut self, jacobian: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Partition-of-unity multiplicity of this chart.
    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        for axis in &mut self.axes {
            axis.nodes = nodes;
        }
        self
    }

    pub fn param_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::tensor(&self.axes)
    }

    pub fn embed(&self, u: &[f64]) -> AmbientVector {
        (self.embed)(u)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Columns are the coordinate tangent vectors.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        if let Some(jac) = &self.jacobian {
            return jac(u);
        }
        let x = self.embed(u);
        let mut out = DMatrix::zeros(x.len(), u.len());
        let mut shifted = u.to_vec();
        for i in 0..u.len() {
            let h = fd::FIRST_STEP * u[i].abs().max(1.0);
            shifted[i] = u[i] + h;
            let plus = self.embed(&shifted);
            shifted[i] = u[i] - h;
            let minus = self.embed(&shifted);
            shifted[i] = u[i];
            out.set_column(i, &((plus - minus) / (2.0 * h)));
        }
        out
    }

    /// `d^2 F / du_i du_j` by central differences.
    pub fn second_derivative(&self, u: &[f64], i: usize, j: usize) -> AmbientVector {
        let h = fd::SECOND_STEP;
        if let Some(jac) = &self.jacobian {
            // Differentiate the analytic frame once.
            let mut p = u.to_vec();
            p[i] += fd::FIRST_STEP;
            let plus = jac(&p).column(j).clone_owned();
            p[i] = u[i] - fd::FIRST_STEP;
            let minus = jac(&p).column(j).clone_owned();
            return (plus - minus) / (2.0 * fd::FIRST_STEP);
        }
        let eval = |di: f64, dj: f64| {
            let mut p = u.to_vec();
            p[i] += di;
            p[j] += dj;
            self.embed(&p)
        };
        if i == j {
            (eval(h, 0.0) - self.embed(u) * 2.0 + eval(-h, 0.0)) / (h * h)
        } else {
            (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h)
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.axes.len() && self.axes.iter().zip(u).all(|(a, &x)| a.periodic || (a.lo <= x && x <= a.hi))
    }

    /// Compose the embedding with an ambient map. The Jacobian of the
    /// result is taken by finite differences.
    pub fn map(&self, f: Arc<dyn Fn(&AmbientVector) -> AmbientVector + Send + Sync>, target: Target) -> Chart {
        let inner = Arc::clone(&self.embed);
        Chart {
            axes: self.axes.clone(),
            target,
            embed: Arc::new(move |u: &[f64]| f(&inner(u))),
            jacobian: None,
            weight: self.weight,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn grids_integrate_constants_to_box_volume() {
        let axes = [Axis::interval(0.0, 2.0).with_nodes(7), Axis::periodic(0.0, 3.0).with_nodes(5)];
        let grid = QuadratureGrid::tensor(&axes).unwrap();
        assert_eq!(grid.len(), 35);
        assert!((grid.weights.iter().sum::<f64>() - 6.0).abs() < 1e-12);
        assert!(grid.weights.iter().all(|&w| w > 0.0));
        let empty = QuadratureGrid::tensor(&[]).unwrap();
        assert_eq!(empty.nodes, vec![Vec::<f64>::new()]);
        assert_eq!(empty.weights, vec![1.0]);
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let rule = Axis::interval(-1.0, 3.0).with_nodes(6).rule().unwrap();
        let value: f64 = rule.iter().map(|(x, w)| w * x.powi(11)).sum();
        let exact = (3f64.powi(12) - 1.0) / 12.0;
        assert!((value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn finite_difference_jacobian_matches_analytic() {
        let embed = |u: &[f64]| DVector::from_vec(vec![u[0].cos(), u[0].sin() * u[1], u[1] * u[1], 0.0]);
        let chart = Chart::new(vec![Axis::interval(0.0, 1.0); 2], Target::Interior, embed);
        let u = [0.3, 0.7];
        let jac = chart.jacobian(&u);
        let exact =
            DMatrix::from_row_slice(4, 2, &[-0.3f64.sin(), 0.0, 0.3f64.cos() * 0.7, 0.3f64.sin(), 0.0, 1.4, 0.0, 0.0]);
        assert!((jac - exact).norm() < 1e-9);
        let mixed = chart.second_derivative(&u, 0, 1);
        assert!((mixed[1] - 0.3f64.cos()).abs() < 1e-6);
        let pure = chart.second_derivative(&u, 1, 1);
        assert!((pure[2] - 2.0).abs() < 1e-6);
    }
}
