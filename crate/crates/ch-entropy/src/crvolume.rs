//! CR-volume of horizontal submanifolds of the sphere: the supremum of the
//! round volume over CR automorphisms, reduced to a supremum over the
//! translation part `b` of the weighted volume `int W_b^{m/2}`.

use std::cell::RefCell;
use std::sync::Arc;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::{horizontality_report, AmbientVector};
use crate::error::{Error, Result};
use crate::geometry::{pairwise_sum, volume_cloud, NodeCloud, Submanifold, Target};
use crate::models::MetricKind;
use crate::moebius::{self, MoebiusMap, MAX_B};

/// Horizontality threshold for the reduction to `int W^{m/2}`.
pub const HORIZONTALITY_TOL: f64 = 1e-6;

/// The weighted-volume integrand of a fixed link, with the round volume
/// weights computed once.
#[derive(Clone, Debug)]
pub struct WeightedVolume {
    cloud: NodeCloud,
    half_m: f64,
    len: usize,
}

impl WeightedVolume {
    pub fn new(gamma: &Submanifold) -> Result<Self> {
        let report = horizontality_report(gamma, HORIZONTALITY_TOL)?;
        if !report.is_horizontal {
            return Err(Error::Precondition(format!(
                "link is not horizontal: max |theta(e)| = {:e}",
                report.max_theta
            )));
        }
        Ok(WeightedVolume {
            cloud: volume_cloud(gamma, MetricKind::RoundSphere)?,
            half_m: gamma.dim() as f64 / 2.0,
            len: 2 * gamma.ambient_n() + 2,
        })
    }

    pub fn ambient_len(&self) -> usize {
        self.len
    }

    /// `int (1 - |b|^2)^{m/2} / |1 + conj(b) z|^m dV`.
    pub fn eval(&self, b: &AmbientVector) -> f64 {
        let terms: Vec<f64> = self
            .cloud
            .points
            .iter()
            .zip(&self.cloud.weights)
            .map(|(z, w)| w * moebius::weight(b, z).powf(self.half_m))
            .collect();
        pairwise_sum(&terms)
    }

    /// The same value as a function of the unconstrained parameter.
    fn eval_u(&self, u: &[f64]) -> f64 {
        self.eval(&ball_from_u(u))
    }
}

/// `b = tanh(|u|) u / |u|`, clamped to `|b| <= MAX_B`.
pub fn ball_from_u(u: &[f64]) -> AmbientVector {
    let u = AmbientVector::from_column_slice(u);
    let r = u.norm();
    if r == 0.0 {
        return u;
    }
    u * (r.tanh().min(MAX_B) / r)
}

/// Inverse of [`ball_from_u`] for `|b| < 1`.
pub fn u_from_ball(b: &AmbientVector) -> Vec<f64> {
    let r = b.norm();
    if r == 0.0 {
        return b.as_slice().to_vec();
    }
    (b * (r.min(MAX_B).atanh() / r)).as_slice().to_vec()
}

/// `int_Gamma W_b^{m/2} dV_Gamma`, the round volume of `Psi_b(Gamma)`.
pub fn cr_weighted_volume(gamma: &Submanifold, b: &AmbientVector) -> Result<f64> {
    let wv = WeightedVolume::new(gamma)?;
    if b.len() != wv.len {
        return Err(Error::Dimension { expected: wv.len, got: b.len() });
    }
    if b.norm() >= 1.0 {
        return Err(Error::Domain(format!("|b| = {} is outside the ball", b.norm())));
    }
    Ok(wv.eval(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrVolOptions {
    /// Random starts in addition to `b = 0`.
    pub random_starts: usize,
    pub start_radius: f64,
    pub seed: u64,
    /// Central-difference step in `u`.
    pub fd_step: f64,
    pub max_iters: u64,
    pub grad_tol: f64,
}

impl Default for CrVolOptions {
    fn default() -> Self {
        CrVolOptions { random_starts: 8, start_radius: 0.5, seed: 7, fd_step: 1e-5, max_iters: 200, grad_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start: Vec<f64>,
    pub value: f64,
    pub b: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrVolResult {
    /// Best start value; starts within a relative `1e-9` of each other
    /// count as ties and the earlier one is kept.
    pub value: f64,
    pub argmax_b: Vec<f64>,
    pub starts: Vec<StartRecord>,
    pub gradient_norm_at_argmax: f64,
    /// The best trajectory ran into `|b| > 0.999` without converging; the
    /// supremum may only be approached at the boundary.
    pub sup_at_infinity: bool,
}

struct Problem<'a> {
    wv: &'a WeightedVolume,
    step: f64,
    best: &'a RefCell<(f64, Vec<f64>)>,
}

impl Problem<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        let v = self.wv.eval_u(u);
        let mut best = self.best.borrow_mut();
        if v > best.0 {
            *best = (v, u.to_vec());
        }
        v
    }

    fn ascent_gradient(&self, u: &[f64]) -> Vec<f64> {
        let mut x = u.to_vec();
        (0..u.len())
            .map(|i| {
                x[i] = u[i] + self.step;
                let fp = self.wv.eval_u(&x);
                x[i] = u[i] - self.step;
                let fm = self.wv.eval_u(&x);
                x[i] = u[i];
                (fp - fm) / (2.0 * self.step)
            })
            .collect()
    }
}

impl CostFunction for Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(-self.value(u))
    }
}

impl Gradient for Problem<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, u: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.ascent_gradient(u).into_iter().map(|g| -g).collect())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn ascend(wv: &WeightedVolume, start: &[f64], opts: &CrVolOptions) -> Result<StartRecord> {
    let best = RefCell::new((f64::NEG_INFINITY, start.to_vec()));
    let problem = Problem { wv, step: opts.fd_step, best: &best };
    problem.value(start);
    let initial_grad = norm(&problem.ascent_gradient(start));
    let mut iterations = 0;
    if initial_grad > opts.grad_tol {
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7)
            .with_tolerance_grad(opts.grad_tol)
            .and_then(|s| s.with_tolerance_cost(1e-14))
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let run = Executor::new(problem, solver).configure(|s| s.param(start.to_vec()).max_iters(opts.max_iters)).run();
        // line searches can stall on finite-difference noise once the
        // gradient is tiny; the best point seen is kept either way
        match run {
            Ok(res) => iterations = res.state().get_iter(),
            Err(e) => warn!("line search stopped early: {e}"),
        }
    }
    let (value, u) = best.into_inner();
    let scratch = RefCell::new((f64::NEG_INFINITY, u.clone()));
    let probe = Problem { wv, step: opts.fd_step, best: &scratch };
    let gradient_norm = norm(&probe.ascent_gradient(&u));
    Ok(StartRecord {
        start: ball_from_u(start).as_slice().to_vec(),
        value,
        b: ball_from_u(&u).as_slice().to_vec(),
        gradient_norm,
        iterations,
    })
}

/// Uniform direction on the unit sphere of `R^len`.
pub fn random_direction(rng: &mut impl Rng, len: usize) -> AmbientVector {
    loop {
        let v = AmbientVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
        let r = v.norm();
        if r > 1e-12 {
            return v / r;
        }
    }
}

/// `lambda_CR` by multistart quasi-Newton ascent in `u`.
pub fn cr_volume(gamma: &Submanifold, opts: &CrVolOptions) -> Result<CrVolResult> {
    let wv = WeightedVolume::new(gamma)?;
    let len = wv.ambient_len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![0.0; len]];
    for _ in 0..opts.random_starts {
        let b = random_direction(&mut rng, len) * opts.start_radius;
        starts.push(u_from_ball(&b));
    }
    let records = starts.par_iter().map(|s| ascend(&wv, s, opts)).collect::<Result<Vec<_>>>()?;

    // first found wins ties
    let mut best = 0;
    for (i, r) in records.iter().enumerate().skip(1) {
        if r.value > records[best].value * (1.0 + 1e-9) {
            best = i;
        }
    }
    let top = &records[best];
    let sup_at_infinity = norm(&top.b) > 0.999 && top.gradient_norm > opts.grad_tol.max(1e-6);
    if sup_at_infinity {
        warn!("CR-volume maximizer runs into |b| = {}; the supremum is not attained", norm(&top.b));
    }
    Ok(CrVolResult {
        value: top.value,
        argmax_b: top.b.clone(),
        gradient_norm_at_argmax: top.gradient_norm,
        sup_at_infinity,
        starts: records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseSearch {
    pub value: f64,
    pub b: Vec<f64>,
    pub samples: usize,
}

/// Independent check of the supremum: best of `samples` random `b` with
/// uniform direction and `|b|` uniform in `[0, 1)`, plus `b = 0`.
pub fn dense_search(gamma: &Submanifold, samples: usize, seed: u64) -> Result<DenseSearch> {
    let wv = WeightedVolume::new(gamma)?;
    let len = wv.ambient_len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bs = vec![AmbientVector::zeros(len)];
    for _ in 0..samples {
        let r: f64 = rng.gen();
        bs.push(random_direction(&mut rng, len) * r.min(MAX_B));
    }
    let values: Vec<f64> = bs.par_iter().map(|b| wv.eval(b)).collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok(DenseSearch { value: values[best], b: bs[best].as_slice().to_vec(), samples })
}

/// The link pushed forward by an automorphism acting on the sphere.
pub fn push_link(gamma: &Submanifold, map: &MoebiusMap) -> Result<Submanifold> {
    let map = map.clone();
    gamma.map(Arc::new(move |x: &AmbientVector| map.apply_raw(x)), Target::Sphere)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub original: f64,
    pub pushed: f64,
    pub relative_discrepancy: f64,
    pub pushed_max_theta: f64,
}

/// `|lambda_CR(Gamma) - lambda_CR(Psi(Gamma))| / lambda_CR(Gamma)`.
pub fn cr_invariance_check(gamma: &Submanifold, map: &MoebiusMap, opts: &CrVolOptions) -> Result<InvarianceReport> {
    let pushed = push_link(gamma, map)?;
    let pushed_max_theta = horizontality_report(&pushed, HORIZONTALITY_TOL)?.max_theta;
    let a = cr_volume(gamma, opts)?.value;
    let b = cr_volume(&pushed, opts)?.value;
    Ok(InvarianceReport { original: a, pushed: b, relative_discrepancy: (a - b).abs() / a, pushed_max_theta })
}
