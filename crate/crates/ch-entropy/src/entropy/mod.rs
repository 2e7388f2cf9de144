//! Colding-Minicozzi entropy of submanifolds of complex hyperbolic space:
//! the heat-kernel weighted volume at a centre and scale, its supremum,
//! the large-scale diagnostics and the monotonicity quantity.

mod boundary;
mod kernel;
mod monotonicity;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use boundary::{boundary_volume_ratio, TRANSVERSALITY_TOL};
pub use kernel::{heat_kernel, kernel_mass, ln_sinh, tail_normalization, KernelAtTime, KernelSpec, MAX_KERNEL_DIM};
pub use monotonicity::{hessian_fd, hessian_radial, laplacian_radial, monotonicity_q, MonotonicityTerms};

use crate::ambient::{AmbientVector, BallPoint};
use crate::error::{Error, Result};
use crate::geometry::{pairwise_sum, BergmanCloud, RadialFamily, Submanifold};
use crate::models::{self, ModelPoint};
use crate::moebius::MoebiusMap;

/// A centre and scale for the entropy functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyQuery {
    pub x0: ModelPoint,
    pub tau: f64,
}

impl EntropyQuery {
    pub fn new(x0: ModelPoint, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("entropy scale must be positive, got tau = {tau}")));
        }
        Ok(EntropyQuery { x0, tau })
    }
}

/// `K_m(tau, dist(x, x0))`.
pub fn phi_kernel(spec: KernelSpec, q: &EntropyQuery, x: &ModelPoint) -> Result<f64> {
    spec.kernel(q.tau, models::dist_ch(x, &q.x0))
}

/// A submanifold prepared for entropy evaluation: its volume cloud in
/// Bergman coordinates, plus the radial family it came from when there is
/// one (needed for the large-scale proxy).
#[derive(Clone, Debug)]
pub struct EntropySurface {
    cloud: BergmanCloud,
    dim: usize,
    base: AmbientVector,
    family: Option<RadialFamily>,
}

impl EntropySurface {
    /// The family cut at hyperbolic radius `rho_max` from its base point.
    pub fn from_family(family: &RadialFamily, rho_max: f64) -> Result<Self> {
        let cloud = family.bergman_cloud(rho_max)?;
        Ok(EntropySurface { cloud, dim: family.dim(), base: family.base_point(), family: Some(family.clone()) })
    }

    /// A compact piece given by charts in modified coordinates. The search
    /// centre is the declared base point, or the centroid of the nodes.
    pub fn from_submanifold(sigma: &Submanifold) -> Result<Self> {
        let cloud = BergmanCloud::from_modified(sigma)?;
        let base = match sigma.base_point() {
            Some(p) => p.clone(),
            None => {
                let dim = 2 * sigma.ambient_n() + 2;
                let modified: Vec<AmbientVector> =
                    cloud.points.iter().map(|z| models::s_map(z).expect("interior")).collect();
                modified.iter().fold(AmbientVector::zeros(dim), |acc, p| acc + p) / modified.len().max(1) as f64
            }
        };
        Ok(EntropySurface { cloud, dim: sigma.dim(), base, family: None })
    }

    /// The image under an automorphism acting in Bergman coordinates.
    pub fn transform(&self, map: &MoebiusMap) -> Self {
        let (z, d) = models::modified_to_bergman_with_defect(&self.base);
        let moved = map.apply_raw(&z);
        let defect = map.weight(&z) * d;
        let base = &moved / (1.0 + defect.sqrt());
        EntropySurface {
            cloud: self.cloud.transform(map),
            dim: self.dim,
            base,
            family: self.family.clone().map(|f| f.with_isometry(map.clone())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// Search centre in modified coordinates.
    pub fn base_point(&self) -> &AmbientVector {
        &self.base
    }

    pub fn family(&self) -> Option<&RadialFamily> {
        self.family.as_ref()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.dim)
    }

    fn distances(&self, x0: &ModelPoint) -> Vec<f64> {
        let (z0, d0) = x0.bergman_with_defect();
        self.cloud.distances(&z0, d0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationOptions {
    pub first_radius: f64,
    pub radius_step: f64,
    pub r_max: f64,
    pub rel_tol: f64,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        TruncationOptions { first_radius: 6.0, radius_step: 2.0, r_max: 24.0, rel_tol: 1e-6 }
    }
}

impl TruncationOptions {
    /// `R_0 < R_1 < ... <= r_max`; a single radius when `r_max` is below the
    /// first shell.
    pub fn radii(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut r = self.first_radius;
        while r <= self.r_max + 1e-12 {
            out.push(r);
            r += self.radius_step;
        }
        if out.is_empty() {
            out.push(self.r_max);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    /// Last increment of the truncation sequence.
    pub truncation_error: f64,
    /// Radius at which the sequence was accepted.
    pub radius: f64,
}

/// `int_{Sigma cap B_R(x0)} K_m(tau, dist(x, x0)) dVol` with `R` grown until
/// the relative increment drops below tolerance.
pub fn entropy_functional(
    surface: &EntropySurface,
    q: &EntropyQuery,
    opts: &TruncationOptions,
) -> Result<FunctionalValue> {
    let kernel = surface.kernel_spec()?.at_time(q.tau, opts.r_max + 1.0)?;
    let dists = surface.distances(&q.x0);
    truncated_sum(&dists, &surface.cloud.weights, &kernel, opts)
}

fn truncated_sum(
    dists: &[f64],
    weights: &[f64],
    kernel: &KernelAtTime,
    opts: &TruncationOptions,
) -> Result<FunctionalValue> {
    let radii = opts.radii();
    let last = *radii.last().expect("nonempty radii");
    let terms: Vec<(usize, f64)> = dists
        .par_iter()
        .zip(weights.par_iter())
        .filter(|(&d, _)| d <= last)
        .map(|(&d, &w)| (radii.partition_point(|&r| r < d), w * kernel.value(d)))
        .collect();
    if terms.is_empty() {
        return Err(Error::Domain(format!("no quadrature node within the truncation radius {last}")));
    }
    let beyond = dists.len() - terms.len();
    let mut shells = vec![Vec::new(); radii.len()];
    let mut outermost = 0;
    for (k, v) in terms {
        if !v.is_finite() {
            return Err(Error::NonFinite { node: vec![radii[k]] });
        }
        shells[k].push(v);
        outermost = outermost.max(k);
    }
    let mut partial = pairwise_sum(&shells[0]);
    for k in 1..radii.len() {
        let increment = pairwise_sum(&shells[k]);
        partial += increment;
        if beyond == 0 && k >= outermost {
            return Ok(FunctionalValue { value: partial, truncation_error: 0.0, radius: radii[k] });
        }
        if partial > 0.0 && increment.abs() < opts.rel_tol * partial {
            return Ok(FunctionalValue { value: partial, truncation_error: increment.abs(), radius: radii[k] });
        }
        if k + 1 == radii.len() {
            return Err(Error::Truncation {
                increment: increment.abs() / partial.abs().max(f64::MIN_POSITIVE),
                radius: radii[k],
            });
        }
    }
    if beyond == 0 {
        return Ok(FunctionalValue { value: partial, truncation_error: 0.0, radius: radii[0] });
    }
    Err(Error::Truncation { increment: f64::INFINITY, radius: radii[0] })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyOptions {
    pub tau_min_exp: i32,
    pub tau_max_exp: i32,
    pub tau_points: usize,
    /// Every `coarse_stride`-th grid scale is used while searching for `x0`.
    pub coarse_stride: usize,
    pub random_starts: usize,
    pub seed: u64,
    /// Largest hyperbolic distance of `x0` from the surface's base point.
    pub search_radius: f64,
    pub nm_max_iters: u64,
    pub nm_tol: f64,
    pub golden_iters: usize,
    /// Slice radius and scale of the large-scale proxy.
    pub proxy_radius: f64,
    pub proxy_tau: f64,
    pub truncation: TruncationOptions,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        EntropyOptions {
            tau_min_exp: -6,
            tau_max_exp: 6,
            tau_points: 25,
            coarse_stride: 4,
            random_starts: 4,
            seed: 0,
            search_radius: 3.0,
            nm_max_iters: 60,
            nm_tol: 1e-7,
            golden_iters: 24,
            proxy_radius: 8.0,
            proxy_tau: 64.0,
            truncation: TruncationOptions::default(),
        }
    }
}

impl EntropyOptions {
    pub fn tau_grid(&self) -> Vec<f64> {
        let (a, b) = (self.tau_min_exp as f64, self.tau_max_exp as f64);
        let k = self.tau_points.max(2);
        (0..k).map(|i| 2f64.powf(a + (b - a) * i as f64 / (k - 1) as f64)).collect()
    }

    fn coarse_grid(&self) -> Vec<f64> {
        let grid = self.tau_grid();
        let stride = self.coarse_stride.max(1);
        let mut out: Vec<f64> = grid.iter().copied().step_by(stride).collect();
        if (grid.len() - 1) % stride != 0 {
            out.push(*grid.last().expect("nonempty grid"));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.tau_min_exp > self.tau_max_exp || self.tau_points < 2 {
            return Err(Error::Validation("empty tau grid".into()));
        }
        if !(self.search_radius >= 0.0 && self.proxy_radius > 0.0 && self.proxy_tau > 0.0) {
            return Err(Error::Validation("search radius, proxy radius and proxy scale must be positive".into()));
        }
        if !(self.truncation.rel_tol > 0.0 && self.truncation.radius_step > 0.0) {
            return Err(Error::Validation("truncation tolerance and step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub query: EntropyQuery,
    /// `None` when the truncation did not converge at this scale.
    pub value: Option<f64>,
    pub truncation_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub value: f64,
    pub argmax: EntropyQuery,
    /// Evaluations at the optimal centre.
    pub trace: Vec<TraceEntry>,
    pub truncation_error: f64,
    /// The large-scale proxy at the optimal centre, for radial families.
    pub tail_proxy: Option<f64>,
    /// The supremum was attained by the proxy rather than a finite scale.
    pub attained_at_tail: bool,
    pub objective_evaluations: usize,
}

struct KernelCache {
    spec: KernelSpec,
    rho_max: f64,
    tables: Mutex<HashMap<u64, Arc<KernelAtTime>>>,
}

impl KernelCache {
    fn new(spec: KernelSpec, rho_max: f64) -> Self {
        KernelCache { spec, rho_max, tables: Mutex::new(HashMap::new()) }
    }

    fn get(&self, tau: f64) -> Result<Arc<KernelAtTime>> {
        if let Some(k) = self.tables.lock().expect("kernel cache").get(&tau.to_bits()) {
            return Ok(k.clone());
        }
        let table = Arc::new(self.spec.at_time(tau, self.rho_max)?);
        self.tables.lock().expect("kernel cache").insert(tau.to_bits(), table.clone());
        Ok(table)
    }
}

/// Everything needed to score a centre.
struct Scorer<'a> {
    surface: &'a EntropySurface,
    opts: &'a EntropyOptions,
    kernels: KernelCache,
    tail_factor: f64,
    centre: MoebiusMap,
    evaluations: Mutex<usize>,
}

impl<'a> Scorer<'a> {
    fn new(surface: &'a EntropySurface, opts: &'a EntropyOptions) -> Result<Self> {
        let spec = surface.kernel_spec()?;
        let (c, _) = models::modified_to_bergman_with_defect(surface.base_point());
        Ok(Scorer {
            surface,
            opts,
            kernels: KernelCache::new(spec, opts.truncation.r_max + 1.0),
            tail_factor: tail_normalization(spec, opts.proxy_radius, opts.proxy_tau)?,
            centre: MoebiusMap::translation(&BallPoint::new(c)?),
            evaluations: Mutex::new(0),
        })
    }

    /// Centre from coordinates `w` in the Bergman ball recentred at the base
    /// point, so `dist(x0, base) = atanh |w|`.
    fn centre_point(&self, w: &[f64]) -> Option<ModelPoint> {
        let w = AmbientVector::from_column_slice(w);
        if !(w.norm() <= self.opts.search_radius.tanh()) {
            return None;
        }
        let z = self.centre.apply_raw(&w);
        let defect = self.centre.weight(&w) * (1.0 - w.norm_squared());
        Some(ModelPoint::modified(&z / (1.0 + defect.sqrt())).ok()?)
    }

    fn functional(&self, dists: &[f64], x0: &ModelPoint, tau: f64) -> TraceEntry {
        let query = EntropyQuery { x0: x0.clone(), tau };
        let value = self
            .kernels
            .get(tau)
            .and_then(|k| truncated_sum(dists, &self.surface.cloud.weights, &k, &self.opts.truncation));
        match value {
            Ok(v) => TraceEntry { query, value: Some(v.value), truncation_error: Some(v.truncation_error) },
            Err(_) => TraceEntry { query, value: None, truncation_error: None },
        }
    }

    fn proxy(&self, x0: &ModelPoint) -> Option<f64> {
        let family = self.surface.family()?;
        boundary_volume_ratio(family, x0, self.opts.proxy_radius).ok().map(|r| r * self.tail_factor)
    }

    /// Best of the coarse scales and the proxy at `w`.
    fn objective(&self, w: &[f64]) -> f64 {
        *self.evaluations.lock().expect("counter") += 1;
        let Some(x0) = self.centre_point(w) else {
            return f64::NEG_INFINITY;
        };
        let dists = self.surface.distances(&x0);
        let coarse = self.opts.coarse_grid();
        let best =
            coarse.iter().filter_map(|&tau| self.functional(&dists, &x0, tau).value).fold(f64::NEG_INFINITY, f64::max);
        best.max(self.proxy(&x0).unwrap_or(f64::NEG_INFINITY))
    }
}

struct SearchProblem<'a, 'b> {
    scorer: &'a Scorer<'b>,
}

/// Stand-in cost for centres outside the search ball.
const OUTSIDE_PENALTY: f64 = 1e10;

impl CostFunction for SearchProblem<'_, '_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, w: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let v = self.scorer.objective(w);
        Ok(if v.is_finite() { -v } else { OUTSIDE_PENALTY })
    }
}

fn nelder_mead(scorer: &Scorer, start: Vec<f64>) -> (Vec<f64>, f64) {
    let step = 0.1 * scorer.opts.search_radius.tanh().max(1e-3);
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut v = start.clone();
        v[i] += if v[i] > 0.0 { -step } else { step };
        simplex.push(v);
    }
    let fallback = (start.clone(), scorer.objective(&start));
    let solver = match NelderMead::new(simplex).with_sd_tolerance(scorer.opts.nm_tol) {
        Ok(s) => s,
        Err(_) => return fallback,
    };
    let run =
        Executor::new(SearchProblem { scorer }, solver).configure(|s| s.max_iters(scorer.opts.nm_max_iters)).run();
    match run {
        Ok(res) => {
            let state = res.state();
            match state.get_best_param() {
                Some(p) if -state.get_best_cost() >= fallback.1 => (p.clone(), -state.get_best_cost()),
                _ => fallback,
            }
        }
        Err(_) => fallback,
    }
}

/// Golden-section maximization of `f` over `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `lambda = sup_{x0, tau} int_Sigma K_m(tau, dist(x, x0)) dVol`.
///
/// Centres are searched by Nelder-Mead within `search_radius` of the base
/// point, scoring each by the coarse scales and the large-scale proxy; the
/// winner is then scanned on the full grid and refined in `log tau`.
pub fn entropy(surface: &EntropySurface, opts: &EntropyOptions) -> Result<EntropyResult> {
    opts.validate()?;
    let scorer = Scorer::new(surface, opts)?;
    let dim = surface.base_point().len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![vec![0.0; dim]];
    for _ in 0..opts.random_starts {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let len = (opts.search_radius.min(1.0) * rng.gen::<f64>()).tanh();
        starts.push(dir.iter().map(|x| x * len / norm).collect());
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let (w, v) = nelder_mead(&scorer, start);
        if best.as_ref().map_or(true, |(_, b)| v > *b * (1.0 + 1e-12)) {
            best = Some((w, v));
        }
    }
    let (w, _) = best.expect("at least one start");
    let x0 = scorer.centre_point(&w).ok_or_else(|| Error::Optimizer("centre search left the ball".into()))?;

    let dists = surface.distances(&x0);
    let grid = opts.tau_grid();
    let mut trace: Vec<TraceEntry> = grid.par_iter().map(|&tau| scorer.functional(&dists, &x0, tau)).collect();
    let best_grid = trace.iter().enumerate().filter_map(|(i, e)| e.value.map(|v| (i, v))).fold(
        None,
        |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        },
    );
    if let Some((i, _)) = best_grid {
        let lo = grid[i.saturating_sub(1)].ln();
        let hi = grid[(i + 1).min(grid.len() - 1)].ln();
        if hi > lo {
            let refined = Mutex::new(Vec::new());
            golden_section(
                |s| {
                    let entry = scorer.functional(&dists, &x0, s.exp());
                    let v = entry.value.unwrap_or(f64::NEG_INFINITY);
                    refined.lock().expect("trace").push(entry);
                    v
                },
                lo,
                hi,
                opts.golden_iters,
            );
            trace.extend(refined.into_inner().expect("trace"));
        }
    }
    let finite =
        trace.iter().filter_map(|e| e.value.map(|v| (v, e))).fold(None, |acc: Option<(f64, &TraceEntry)>, (v, e)| {
            match acc {
                Some((bv, _)) if bv >= v => acc,
                _ => Some((v, e)),
            }
        });
    let proxy = scorer.proxy(&x0);
    let evaluations = *scorer.evaluations.lock().expect("counter");
    match (finite, proxy) {
        (None, None) => Err(Error::Truncation { increment: f64::INFINITY, radius: opts.truncation.r_max }),
        (Some((v, e)), p) if p.map_or(true, |p| v >= p) => Ok(EntropyResult {
            value: v,
            argmax: e.query.clone(),
            truncation_error: e.truncation_error.unwrap_or(0.0),
            tail_proxy: p,
            attained_at_tail: false,
            trace,
            objective_evaluations: evaluations,
        }),
        (_, Some(p)) => Ok(EntropyResult {
            value: p,
            argmax: EntropyQuery { x0, tau: opts.proxy_tau },
            truncation_error: 0.0,
            tail_proxy: Some(p),
            attained_at_tail: true,
            trace,
            objective_evaluations: evaluations,
        }),
        (Some(_), None) => unreachable!("handled by the guarded arm"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make, ExampleSpec};

    fn real_slice_surface() -> EntropySurface {
        let ex = make(&ExampleSpec::new("real_slice").with("n", 1.0)).unwrap();
        EntropySurface::from_family(ex.family().unwrap(), 28.0).unwrap()
    }

    #[test]
    fn real_slice_functional_at_centre_is_one() {
        let surface = real_slice_surface();
        let centre = ModelPoint::modified(AmbientVector::zeros(4)).unwrap();
        for tau in [0.25, 1.0, 4.0] {
            let v = entropy_functional(&surface, &EntropyQuery::new(centre.clone(), tau).unwrap(), &Default::default())
                .unwrap();
            assert!((v.value - 1.0).abs() < 1e-4, "tau = {tau}: {v:?}");
        }
    }

    #[test]
    fn off_slice_centre_sees_less() {
        let surface = real_slice_surface();
        let x0 = ModelPoint::modified(AmbientVector::from_vec(vec![0.0, 0.3, 0.0, 0.0])).unwrap();
        for tau in [0.25, 1.0, 4.0] {
            let v = entropy_functional(&surface, &EntropyQuery::new(x0.clone(), tau).unwrap(), &Default::default())
                .unwrap();
            assert!(v.value < 1.0, "tau = {tau}: {v:?}");
        }
    }

    #[test]
    fn truncation_below_every_node_is_an_error() {
        let surface = real_slice_surface();
        let far = ModelPoint::modified(AmbientVector::from_vec(vec![0.0, 0.999, 0.0, 0.0])).unwrap();
        let opts = TruncationOptions { r_max: 1.0, ..Default::default() };
        assert!(entropy_functional(&surface, &EntropyQuery::new(far, 1.0).unwrap(), &opts).is_err());
    }

    #[test]
    fn large_scales_do_not_converge_within_the_cap() {
        let surface = real_slice_surface();
        let centre = ModelPoint::modified(AmbientVector::zeros(4)).unwrap();
        let q = EntropyQuery::new(centre, 64.0).unwrap();
        assert!(matches!(entropy_functional(&surface, &q, &Default::default()), Err(Error::Truncation { .. })));
    }

    #[test]
    fn query_rejects_nonpositive_scale() {
        let centre = ModelPoint::modified(AmbientVector::zeros(4)).unwrap();
        assert!(EntropyQuery::new(centre, 0.0).is_err());
    }

    #[test]
    fn golden_section_finds_interior_maximum() {
        let (x, v) = golden_section(|x| -(x - 0.3) * (x - 0.3), -1.0, 1.0, 60);
        assert!((x - 0.3).abs() < 1e-8 && v.abs() < 1e-15);
    }

    #[test]
    fn tau_grid_is_log_spaced() {
        let opts = EntropyOptions::default();
        let grid = opts.tau_grid();
        assert_eq!(grid.len(), 25);
        assert!((grid[0] - 1.0 / 64.0).abs() < 1e-15 && (grid[24] - 64.0).abs() < 1e-12);
        assert_eq!(opts.coarse_grid().len(), 7);
    }
}
