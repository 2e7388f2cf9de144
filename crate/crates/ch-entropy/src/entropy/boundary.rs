use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentRoot;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::ambient::{self, AmbientVector};
use crate::error::{Error, Result};
use crate::geometry::{pairwise_sum, RadialFamily};
use crate::models::{self, ModelPoint};

/// Smallest admissible `d_rho dist` on the slice.
pub const TRANSVERSALITY_TOL: f64 = 1e-3;

const FD_STEP: f64 = 1e-6;

struct SliceEquation<'a> {
    dist: &'a (dyn Fn(f64) -> f64 + Sync),
    r: f64,
}

impl CostFunction for SliceEquation<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, rho: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.dist)(*rho) - self.r)
    }
}

/// `Vol(Sigma cap dB_r(p0)) / sinh^{m-1}(r)` for a radial family.
///
/// Along each ray of the family the slice radius `rho*(u)` solves
/// `dist(F(rho, u), p0) = r`; its gradient follows from the implicit
/// function theorem, and the slice metric is the family metric
/// `drho^2 + sinh^2 rho g_Gamma + sinh^4 rho theta^2` restricted to the
/// graph `rho = rho*(u)`.
pub fn boundary_volume_ratio(family: &RadialFamily, p0: &ModelPoint, r: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("slice radius must be positive, got {r}")));
    }
    let (z0, d0) = p0.bergman_with_defect();
    // work on the unmoved cone with the centre pulled back
    let (q, dq) = match family.isometry() {
        Some(map) => {
            let inv = map.invert();
            (inv.apply_raw(&z0), inv.weight(&z0) * d0)
        }
        None => (z0, d0),
    };
    let dist = |rho: f64, xi: &AmbientVector| {
        let rho = rho.abs();
        models::bergman_distance_parts(&(xi * rho.tanh()), 1.0 / rho.cosh().powi(2), &q, dq)
    };
    let vertex = models::bergman_distance_parts(&AmbientVector::zeros(q.len()), 1.0, &q, dq);
    if vertex >= r {
        return Err(Error::Precondition(format!("the vertex lies at distance {vertex} >= r = {r} from p0")));
    }
    let m = family.dim();
    let mut terms = Vec::new();
    for (chart, grid) in family.link().charts_with_grids() {
        let k = chart.param_dim();
        let chunk: Vec<f64> = grid
            .nodes
            .par_iter()
            .zip(grid.weights.par_iter())
            .map(|(u, &w)| {
                let xi = chart.embed(u);
                let along = |rho: f64| dist(rho, &xi);
                let rho = slice_radius(&along, r, vertex)?;
                let d_rho = (along(rho + FD_STEP) - along(rho - FD_STEP)) / (2.0 * FD_STEP);
                if d_rho < TRANSVERSALITY_TOL {
                    return Err(Error::Precondition(format!(
                        "sphere of radius {r} is tangent to the surface near u = {u:?} (d_rho dist = {d_rho:e})"
                    )));
                }
                if k == 0 {
                    return Ok(w * chart.weight());
                }
                let mut grad = DVector::zeros(k);
                let mut v = u.clone();
                for i in 0..k {
                    v[i] = u[i] + FD_STEP;
                    let plus = dist(rho, &chart.embed(&v));
                    v[i] = u[i] - FD_STEP;
                    let minus = dist(rho, &chart.embed(&v));
                    v[i] = u[i];
                    grad[i] = -(plus - minus) / (2.0 * FD_STEP) / d_rho;
                }
                let jac = chart.jacobian(u);
                let theta: DVector<f64> = jac.transpose() * ambient::reeb_field(&xi);
                let sh2 = rho.sinh().powi(2);
                let h: DMatrix<f64> =
                    &grad * grad.transpose() + (jac.transpose() * &jac + &theta * theta.transpose() * sh2) * sh2;
                let chol = h.cholesky().ok_or_else(|| Error::Singular(format!("degenerate slice metric at {u:?}")))?;
                Ok(w * chart.weight() * chol.l().diagonal().product())
            })
            .collect::<Result<_>>()?;
        terms.extend(chunk);
    }
    Ok(pairwise_sum(&terms) / r.sinh().powi(m as i32 - 1))
}

fn slice_radius(dist: &(dyn Fn(f64) -> f64 + Sync), r: f64, vertex: f64) -> Result<f64> {
    // dist(rho) >= rho - vertex, so the root lies below r + vertex
    let solver = BrentRoot::new(0.0, r + vertex + 1.0, 1e-13);
    let res = Executor::new(SliceEquation { dist, r }, solver)
        .configure(|s| s.max_iters(200))
        .run()
        .map_err(|e| Error::Optimizer(format!("slice root: {e}")))?;
    res.state().get_best_param().copied().ok_or_else(|| Error::Optimizer("slice root not found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make, ExampleSpec};
    use std::f64::consts::PI;

    fn family(name: &str) -> RadialFamily {
        make(&ExampleSpec::new(name)).unwrap().family().unwrap().clone()
    }

    #[test]
    fn real_slice_from_its_centre() {
        let f = family("real_slice");
        let centre = ModelPoint::modified(AmbientVector::zeros(4)).unwrap();
        for r in [0.5, 2.0, 6.0] {
            let ratio = boundary_volume_ratio(&f, &centre, r).unwrap();
            assert!((ratio - 2.0 * PI).abs() < 1e-8, "r = {r}: {ratio}");
        }
    }

    #[test]
    fn off_centre_slice_of_the_real_disk() {
        // A circle of radius r about a point of H^2 still has length 2 pi sinh r.
        let f = family("real_slice");
        let p = ModelPoint::modified(AmbientVector::from_vec(vec![0.3, 0.0, 0.1, 0.0])).unwrap();
        let ratio = boundary_volume_ratio(&f, &p, 4.0).unwrap();
        assert!((ratio - 2.0 * PI).abs() < 1e-6, "{ratio}");
    }

    #[test]
    fn clifford_cone_from_its_vertex() {
        let f = family("cone:clifford_legendrian_torus");
        let vertex = ModelPoint::modified(AmbientVector::zeros(6)).unwrap();
        let area = 4.0 * PI * PI / 3f64.sqrt();
        for r in [2.0, 4.0, 6.0] {
            let ratio = boundary_volume_ratio(&f, &vertex, r).unwrap();
            assert!((ratio - area).abs() < 1e-8 * area, "r = {r}: {ratio}");
        }
    }

    #[test]
    fn centre_outside_the_ball_is_rejected() {
        let f = family("real_slice");
        let p = ModelPoint::modified(AmbientVector::from_vec(vec![0.0, 0.9, 0.0, 0.0])).unwrap();
        assert!(boundary_volume_ratio(&f, &p, 1.0).is_err());
    }
}
