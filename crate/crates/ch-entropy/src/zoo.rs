//! The example catalog: exact submanifolds with known ground truth.
//!
//! Link examples live in the sphere; interior examples are hyperbolic cones
//! over a link, possibly moved by an automorphism, so that minimality and
//! the boundary at infinity are exact.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ambient::{AmbientVector, BallPoint};
use crate::error::{Error, Result};
use crate::geometry::{cone_over_link, Axis, Chart, RadialFamily, Submanifold, Target};
use crate::models::MetricKind;
use crate::moebius::MoebiusMap;

/// Bumped whenever a registered example or a ground-truth value changes.
pub const CATALOG_VERSION: &str = "1";

/// Default displacement for the displaced examples.
pub const DEFAULT_DISPLACEMENT: f64 = 0.3;

/// `|S^k|` for the unit round sphere.
pub fn sphere_volume(k: usize) -> f64 {
    // |S^0| = 2, |S^1| = 2 pi, |S^{k+2}| = 2 pi |S^k| / (k + 1)
    let (mut even, mut odd) = (2.0, 2.0 * PI);
    for j in 0..k / 2 {
        even *= 2.0 * PI / (2 * j + 1) as f64;
        odd *= 2.0 * PI / (2 * j + 2) as f64;
    }
    if k % 2 == 0 {
        even
    } else {
        odd
    }
}

/// A catalog name with numeric parameters, e.g. `cone:clifford_legendrian_torus`
/// or `real_slice` with `n = 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl ExampleSpec {
    pub fn new(name: impl Into<String>) -> Self {
        ExampleSpec { name: name.into(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Validation(format!("parameter `{key}` must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }
}

impl fmt::Display for ExampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "[PAPER]")]
    Paper,
    #[serde(rename = "[DERIVED]")]
    Derived,
    #[serde(rename = "[TRIVIAL]")]
    Trivial,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Paper => "[PAPER]",
            Provenance::Derived => "[DERIVED]",
            Provenance::Trivial => "[TRIVIAL]",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `lambda_CH` of the interior submanifold.
    Entropy,
    /// `lambda_CR` of the link (or of the boundary at infinity).
    CrVolume,
    /// Round volume of the link.
    RoundVolume,
    /// Largest `|theta^(e)|` over unit tangents of the link.
    Horizontality,
    /// Limit of the boundary volume ratio about the vertex.
    BoundaryVolumeRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Equal,
    AtLeast,
}

/// A comparison value together with where it comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub quantity: Quantity,
    pub value: f64,
    pub bound: Bound,
    /// Absolute tolerance for [`Bound::Equal`].
    pub tolerance: f64,
    pub provenance: Provenance,
    pub note: String,
}

impl GroundTruth {
    fn equal(quantity: Quantity, value: f64, tolerance: f64, provenance: Provenance, note: &str) -> Self {
        GroundTruth { quantity, value, bound: Bound::Equal, tolerance, provenance, note: note.into() }
    }

    fn at_least(quantity: Quantity, value: f64, provenance: Provenance, note: &str) -> Self {
        GroundTruth { quantity, value, bound: Bound::AtLeast, tolerance: 0.0, provenance, note: note.into() }
    }

    pub fn accepts(&self, x: f64) -> bool {
        match self.bound {
            Bound::Equal => (x - self.value).abs() <= self.tolerance,
            Bound::AtLeast => x >= self.value - self.tolerance,
        }
    }
}

/// The interior part of an example.
#[derive(Clone, Debug)]
pub struct Interior {
    /// Hyperbolic cone over `family.link()` moved by its isometry.
    pub family: RadialFamily,
    /// The family has no isometry, so the interior is a Euclidean cone
    /// with vertex at the origin.
    pub is_cone: bool,
}

#[derive(Clone, Debug)]
pub struct Example {
    pub spec: ExampleSpec,
    /// Intrinsic dimension of the link examples' link, or of the interior.
    pub dim: usize,
    pub ambient_n: usize,
    /// For link examples the link itself; for interior examples the
    /// boundary at infinity, when it is a smooth submanifold of the sphere.
    pub link: Option<Submanifold>,
    pub interior: Option<Interior>,
    /// Metric in which the example is minimal, if it is.
    pub minimal_in: Option<MetricKind>,
    pub truths: Vec<GroundTruth>,
}

impl Example {
    pub fn truth(&self, quantity: Quantity) -> Option<&GroundTruth> {
        self.truths.iter().find(|t| t.quantity == quantity)
    }

    pub fn family(&self) -> Option<&RadialFamily> {
        self.interior.as_ref().map(|i| &i.family)
    }

    /// The interior for `s0 <= s <= s1` in modified coordinates. Cones use
    /// the Euclidean cone chart with its vertex tail; displaced examples
    /// use the radial chart in hyperbolic radius.
    pub fn interior_submanifold(&self, s_range: (f64, f64)) -> Result<Submanifold> {
        let interior = self
            .interior
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("`{}` has no interior part", self.spec.name)))?;
        if interior.is_cone {
            cone_over_link(interior.family.link(), s_range)
        } else {
            let rho = |s: f64| 2.0 * s.atanh();
            interior.family.submanifold(rho(s_range.0), rho(s_range.1))
        }
    }
}

/// Static description for listings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub defaults: BTreeMap<String, f64>,
    pub dim: usize,
    pub ambient_n: usize,
    pub has_link: bool,
    pub has_interior: bool,
    pub truths: Vec<GroundTruth>,
}

const NAMES: [(&str, &str); 10] = [
    ("real_slice", "real points of the ball, a totally geodesic Lagrangian"),
    ("legendrian_great_sphere", "real points of the sphere, a totally geodesic Legendrian"),
    ("legendrian_great_circle_twisted", "(e^{it}, e^{-it})/sqrt 2, unitarily equivalent to the real great circle"),
    ("clifford_legendrian_torus", "(e^{ia}, e^{ib}, e^{-i(a+b)})/sqrt 3 in S^5"),
    ("cone:<link>", "hyperbolic cone with vertex 0 over a registered Legendrian link"),
    ("geodesic", "the geodesic through 0 in direction i e_1, translated by b e_1"),
    ("displaced_slice", "the real slice translated by b i e_1"),
    ("reeb_orbit", "a Hopf circle; negative control for horizontality"),
    ("complex_line", "{(z, 0)}; negative control for isotropy and horizontality"),
    ("castro_urbano", "rotationally symmetric minimal Lagrangians (not implemented)"),
];

/// Every registered example with default parameters.
pub fn catalog() -> Result<Vec<CatalogEntry>> {
    let mut out = Vec::new();
    for (name, description) in NAMES {
        let spec = match name {
            "cone:<link>" => ExampleSpec::new("cone:clifford_legendrian_torus"),
            _ => ExampleSpec::new(name),
        };
        let entry = match make(&spec) {
            Ok(ex) => CatalogEntry {
                name: name.into(),
                description: description.into(),
                defaults: default_params(name),
                dim: ex.dim,
                ambient_n: ex.ambient_n,
                has_link: ex.link.is_some(),
                has_interior: ex.interior.is_some(),
                truths: ex.truths,
            },
            Err(Error::NotImplemented(_)) => CatalogEntry {
                name: name.into(),
                description: description.into(),
                defaults: BTreeMap::new(),
                dim: 2,
                ambient_n: 1,
                has_link: false,
                has_interior: true,
                truths: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        out.push(entry);
    }
    Ok(out)
}

fn default_params(name: &str) -> BTreeMap<String, f64> {
    let pairs: &[(&str, f64)] = match name {
        "real_slice" | "legendrian_great_sphere" | "reeb_orbit" | "complex_line" => &[("n", 1.0)],
        "geodesic" | "displaced_slice" => &[("n", 1.0), ("b", DEFAULT_DISPLACEMENT)],
        _ => &[],
    };
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Builds a registered example. The optional `nodes` parameter sets the
/// quadrature nodes per link axis.
pub fn make(spec: &ExampleSpec) -> Result<Example> {
    let nodes = spec.params.get("nodes").map(|_| spec.get_usize("nodes", 0)).transpose()?;
    let with_nodes = |link: Submanifold| -> Result<Submanifold> {
        match nodes {
            Some(k) => link.with_nodes(k),
            None => Ok(link),
        }
    };
    let name = spec.name.as_str();
    if let Some(link_name) = name.strip_prefix("cone:") {
        let inner = make(&ExampleSpec { name: link_name.to_string(), params: spec.params.clone() })?;
        let link = inner
            .link
            .filter(|_| inner.interior.is_none())
            .ok_or_else(|| Error::Validation(format!("`{link_name}` is not a link example")))?;
        let mut ex = cone_example(spec.clone(), link, inner.minimal_in == Some(MetricKind::RoundSphere))?;
        ex.truths.extend(inner.truths.into_iter().filter(|t| t.quantity == Quantity::CrVolume));
        return Ok(ex);
    }
    match name {
        "real_slice" => {
            let n = spec.get_usize("n", 1)?;
            let link = with_nodes(great_sphere(n)?)?;
            let mut ex = cone_example(spec.clone(), link, true)?;
            ex.truths.retain(|t| t.quantity != Quantity::Entropy);
            ex.truths.extend(great_sphere_truths(n).into_iter().filter(|t| t.quantity == Quantity::CrVolume));
            ex.truths.push(GroundTruth::equal(
                Quantity::Entropy,
                1.0,
                1e-3,
                Provenance::Paper,
                "totally geodesic Lagrangian",
            ));
            Ok(ex)
        }
        "legendrian_great_sphere" => {
            let n = spec.get_usize("n", 1)?;
            let link = with_nodes(great_sphere(n)?)?;
            Ok(link_example(spec.clone(), link, great_sphere_truths(n)))
        }
        "legendrian_great_circle_twisted" => {
            let link = with_nodes(twisted_circle()?)?;
            Ok(link_example(spec.clone(), link, great_sphere_truths(1)))
        }
        "clifford_legendrian_torus" => {
            let link = with_nodes(clifford_torus()?)?;
            let area = 4.0 * PI * PI / 3f64.sqrt();
            let truths = vec![
                GroundTruth::equal(
                    Quantity::RoundVolume,
                    area,
                    1e-8,
                    Provenance::Derived,
                    "induced metric determinant 1/sqrt 3 on the square",
                ),
                GroundTruth::equal(
                    Quantity::Horizontality,
                    0.0,
                    1e-10,
                    Provenance::Derived,
                    "theta vanishes on tangents",
                ),
                GroundTruth::at_least(Quantity::CrVolume, area, Provenance::Derived, "the supremum dominates b = 0"),
            ];
            Ok(link_example(spec.clone(), link, truths))
        }
        "geodesic" => {
            let n = spec.get_usize("n", 1)?;
            let b = spec.get("b", DEFAULT_DISPLACEMENT);
            let mut dir = AmbientVector::zeros(2 * n + 2);
            dir[1] = 1.0;
            let link = Submanifold::new(vec![point_chart(dir.clone()), point_chart(-dir)])?;
            let mut shift = AmbientVector::zeros(2 * n + 2);
            shift[0] = b;
            let mut ex = displaced_example(spec.clone(), link, shift)?;
            ex.truths = vec![
                GroundTruth::equal(
                    Quantity::Entropy,
                    1.0,
                    1e-3,
                    Provenance::Derived,
                    "unit mass of the line heat kernel",
                ),
                GroundTruth::equal(Quantity::CrVolume, 2.0, 1e-12, Provenance::Trivial, "two points, W^0 = 1"),
            ];
            Ok(ex)
        }
        "displaced_slice" => {
            let n = spec.get_usize("n", 1)?;
            let b = spec.get("b", DEFAULT_DISPLACEMENT);
            let mut shift = AmbientVector::zeros(2 * n + 2);
            shift[1] = b;
            let mut ex = displaced_example(spec.clone(), with_nodes(great_sphere(n)?)?, shift)?;
            ex.truths = vec![
                GroundTruth::equal(Quantity::Entropy, 1.0, 1e-3, Provenance::Paper, "totally geodesic Lagrangian"),
                GroundTruth::equal(
                    Quantity::CrVolume,
                    sphere_volume(n),
                    if n == 1 { 1e-3 } else { 1e-2 },
                    Provenance::Paper,
                    "CR image of a totally geodesic Legendrian",
                ),
            ];
            Ok(ex)
        }
        "reeb_orbit" => {
            let n = spec.get_usize("n", 1)?;
            let link = with_nodes(hopf_circle(n)?)?;
            let mut ex = link_example(spec.clone(), link, Vec::new());
            ex.minimal_in = None;
            ex.truths = vec![
                GroundTruth::equal(
                    Quantity::Horizontality,
                    1.0,
                    1e-10,
                    Provenance::Trivial,
                    "tangent is the Reeb field",
                ),
                GroundTruth::equal(Quantity::RoundVolume, 2.0 * PI, 1e-10, Provenance::Trivial, "unit circle"),
            ];
            Ok(ex)
        }
        "complex_line" => {
            let n = spec.get_usize("n", 1)?;
            let link = with_nodes(hopf_circle(n)?)?;
            let family = RadialFamily::new(link.clone())?;
            Ok(Example {
                spec: spec.clone(),
                dim: 2,
                ambient_n: n,
                link: Some(link),
                interior: Some(Interior { family, is_cone: true }),
                minimal_in: Some(MetricKind::ModifiedBergman),
                truths: vec![GroundTruth::equal(
                    Quantity::Horizontality,
                    1.0,
                    1e-10,
                    Provenance::Derived,
                    "boundary is a Hopf circle",
                )],
            })
        }
        "castro_urbano" => Err(Error::NotImplemented(
            "the Castro-Urbano rotationally symmetric minimal Lagrangians need their explicit profile curves, \
             which this catalog does not carry"
                .into(),
        )),
        other => Err(Error::UnknownExample(other.to_string())),
    }
}

fn great_sphere_truths(n: usize) -> Vec<GroundTruth> {
    vec![
        GroundTruth::equal(
            Quantity::CrVolume,
            sphere_volume(n),
            if n == 1 { 1e-3 } else { 1e-2 },
            Provenance::Paper,
            "totally geodesic Legendrian; equality case with entropy 1",
        ),
        GroundTruth::equal(Quantity::RoundVolume, sphere_volume(n), 1e-8, Provenance::Trivial, "unit sphere"),
        GroundTruth::equal(Quantity::Horizontality, 0.0, 1e-10, Provenance::Derived, "real tangents are horizontal"),
    ]
}

fn link_example(spec: ExampleSpec, link: Submanifold, truths: Vec<GroundTruth>) -> Example {
    Example {
        spec,
        dim: link.dim(),
        ambient_n: link.ambient_n(),
        link: Some(link),
        interior: None,
        minimal_in: Some(MetricKind::RoundSphere),
        truths,
    }
}

fn cone_example(spec: ExampleSpec, link: Submanifold, minimal_link: bool) -> Result<Example> {
    let volume = crate::geometry::integrate(&link, MetricKind::RoundSphere, |_| 1.0)?;
    let m = link.dim() + 1;
    let mut truths = vec![GroundTruth::equal(
        Quantity::BoundaryVolumeRatio,
        volume,
        1e-4 * volume,
        Provenance::Derived,
        "slices of a cone about its vertex are scaled copies of the link",
    )];
    if minimal_link {
        truths.push(GroundTruth::equal(
            Quantity::Entropy,
            volume / sphere_volume(m - 1),
            0.01 * volume / sphere_volume(m - 1),
            Provenance::Derived,
            "equality case for a minimal cone: link volume over |S^{m-1}|",
        ));
    }
    Ok(Example {
        spec,
        dim: m,
        ambient_n: link.ambient_n(),
        interior: Some(Interior { family: RadialFamily::new(link.clone())?, is_cone: true }),
        link: Some(link),
        minimal_in: minimal_link.then_some(MetricKind::ModifiedBergman),
        truths,
    })
}

/// The cone over `link` translated by the automorphism with translation
/// part `shift` (Bergman coordinates).
fn displaced_example(spec: ExampleSpec, link: Submanifold, shift: AmbientVector) -> Result<Example> {
    let map = MoebiusMap::translation(&BallPoint::new(shift)?);
    let boundary_map = map.clone();
    let boundary = link.map(Arc::new(move |x: &AmbientVector| boundary_map.apply_raw(x)), Target::Sphere)?;
    let family = RadialFamily::new(link)?.with_isometry(map);
    Ok(Example {
        spec,
        dim: family.dim(),
        ambient_n: family.ambient_n(),
        link: Some(boundary),
        interior: Some(Interior { family, is_cone: false }),
        minimal_in: Some(MetricKind::ModifiedBergman),
        truths: Vec::new(),
    })
}

fn point_chart(p: AmbientVector) -> Chart {
    Chart::new(Vec::new(), Target::Sphere, move |_| p.clone())
}

/// Real points of `S^{2n+1}` in hyperspherical angles `phi_1..phi_{n-1}`
/// in `[0, pi]` and `phi_n` periodic.
pub fn great_sphere(n: usize) -> Result<Submanifold> {
    if n == 0 {
        return Err(Error::Validation("great spheres need n >= 1".into()));
    }
    let mut axes = vec![Axis::interval(0.0, PI); n - 1];
    axes.push(Axis::periodic(0.0, 2.0 * PI));
    let embed = move |phi: &[f64]| real_embed(&hyperspherical(phi), n);
    let jacobian = move |phi: &[f64]| {
        let mut out = DMatrix::zeros(2 * n + 2, n);
        for k in 0..n {
            let d = hyperspherical_derivative(phi, k);
            for (j, x) in d.iter().enumerate() {
                out[(2 * j, k)] = *x;
            }
        }
        out
    };
    Submanifold::new(vec![Chart::new(axes, Target::Sphere, embed).with_jacobian(jacobian)])
}

fn real_embed(x: &[f64], n: usize) -> AmbientVector {
    let mut out = AmbientVector::zeros(2 * n + 2);
    for (j, v) in x.iter().enumerate() {
        out[2 * j] = *v;
    }
    out
}

/// `x_j = sin phi_1 ... sin phi_{j-1} cos phi_j`, last `x = prod sin phi_i`.
fn hyperspherical(phi: &[f64]) -> Vec<f64> {
    hyperspherical_factors(phi, None)
}

fn hyperspherical_derivative(phi: &[f64], k: usize) -> Vec<f64> {
    hyperspherical_factors(phi, Some(k))
}

fn hyperspherical_factors(phi: &[f64], diff: Option<usize>) -> Vec<f64> {
    let n = phi.len();
    let sin = |i: usize| if diff == Some(i) { phi[i].cos() } else { phi[i].sin() };
    let cos = |i: usize| if diff == Some(i) { -phi[i].sin() } else { phi[i].cos() };
    let mut out = Vec::with_capacity(n + 1);
    let mut prefix = 1.0;
    for j in 0..n {
        // a coordinate that does not depend on the differentiated angle vanishes
        let depends = diff.map_or(true, |k| k <= j);
        out.push(if depends { prefix * cos(j) } else { 0.0 });
        prefix *= sin(j);
    }
    out.push(prefix);
    out
}

fn twisted_circle() -> Result<Submanifold> {
    let c = 0.5f64.sqrt();
    let chart = Chart::new(vec![Axis::periodic(0.0, 2.0 * PI)], Target::Sphere, move |t: &[f64]| {
        let (s, co) = t[0].sin_cos();
        DVector::from_vec(vec![c * co, c * s, c * co, -c * s])
    })
    .with_jacobian(move |t: &[f64]| {
        let (s, co) = t[0].sin_cos();
        DMatrix::from_column_slice(4, 1, &[-c * s, c * co, -c * s, -c * co])
    });
    Submanifold::new(vec![chart])
}

fn clifford_torus() -> Result<Submanifold> {
    let c = 1.0 / 3f64.sqrt();
    let axes = vec![Axis::periodic(0.0, 2.0 * PI); 2];
    let chart = Chart::new(axes, Target::Sphere, move |u: &[f64]| {
        let (a, b) = (u[0], u[1]);
        let ab = -(a + b);
        DVector::from_vec(vec![c * a.cos(), c * a.sin(), c * b.cos(), c * b.sin(), c * ab.cos(), c * ab.sin()])
    })
    .with_jacobian(move |u: &[f64]| {
        let (a, b) = (u[0], u[1]);
        let ab = -(a + b);
        let mut j = DMatrix::zeros(6, 2);
        j[(0, 0)] = -c * a.sin();
        j[(1, 0)] = c * a.cos();
        j[(2, 1)] = -c * b.sin();
        j[(3, 1)] = c * b.cos();
        for k in 0..2 {
            j[(4, k)] = c * ab.sin();
            j[(5, k)] = -c * ab.cos();
        }
        j
    });
    Submanifold::new(vec![chart])
}

/// `t -> e^{it} e_1`, whose tangent is the Reeb field.
fn hopf_circle(n: usize) -> Result<Submanifold> {
    if n == 0 {
        return Err(Error::Validation("the ambient needs n >= 1".into()));
    }
    let len = 2 * n + 2;
    let chart = Chart::new(vec![Axis::periodic(0.0, 2.0 * PI)], Target::Sphere, move |t: &[f64]| {
        let mut out = AmbientVector::zeros(len);
        out[0] = t[0].cos();
        out[1] = t[0].sin();
        out
    })
    .with_jacobian(move |t: &[f64]| {
        let mut out = DMatrix::zeros(len, 1);
        out[(0, 0)] = -t[0].sin();
        out[(1, 0)] = t[0].cos();
        out
    });
    Submanifold::new(vec![chart])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::horizontality_report;
    use crate::geometry::{integrate, isotropy_report, mean_curvature};

    #[test]
    fn sphere_volumes() {
        let expected = [2.0, 2.0 * PI, 4.0 * PI, 2.0 * PI * PI, 8.0 * PI * PI / 3.0];
        for (k, v) in expected.iter().enumerate() {
            assert!((sphere_volume(k) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperspherical_jacobian_matches_differences() {
        let phi = [0.7, 1.9, 4.0];
        for k in 0..3 {
            let d = hyperspherical_derivative(&phi, k);
            let mut p = phi;
            let mut q = phi;
            p[k] += 1e-6;
            q[k] -= 1e-6;
            let (a, b) = (hyperspherical(&p), hyperspherical(&q));
            for j in 0..4 {
                assert!(((a[j] - b[j]) / 2e-6 - d[j]).abs() < 1e-8, "k = {k}, j = {j}");
            }
        }
    }

    #[test]
    fn link_volumes_and_horizontality() {
        for (spec, volume, horizontal) in [
            (ExampleSpec::new("legendrian_great_sphere"), 2.0 * PI, true),
            (ExampleSpec::new("legendrian_great_sphere").with("n", 2.0), 4.0 * PI, true),
            (ExampleSpec::new("legendrian_great_sphere").with("n", 3.0), 2.0 * PI * PI, true),
            (ExampleSpec::new("legendrian_great_circle_twisted"), 2.0 * PI, true),
            (ExampleSpec::new("clifford_legendrian_torus"), 4.0 * PI * PI / 3f64.sqrt(), true),
            (ExampleSpec::new("reeb_orbit"), 2.0 * PI, false),
        ] {
            let ex = make(&spec).unwrap();
            let link = ex.link.as_ref().unwrap();
            let v = integrate(link, MetricKind::RoundSphere, |_| 1.0).unwrap();
            assert!((v - volume).abs() < 1e-8, "{spec}: {v}");
            let report = horizontality_report(link, 1e-8).unwrap();
            assert_eq!(report.is_horizontal, horizontal, "{spec}");
            if let Some(t) = ex.truth(Quantity::Horizontality) {
                assert!(t.accepts(report.max_theta), "{spec}: {}", report.max_theta);
            }
        }
    }

    #[test]
    fn registered_minimal_examples_are_minimal() {
        for name in [
            "legendrian_great_sphere",
            "legendrian_great_circle_twisted",
            "clifford_legendrian_torus",
            "real_slice",
            "cone:clifford_legendrian_torus",
            "displaced_slice",
            "complex_line",
        ] {
            let ex = make(&ExampleSpec::new(name)).unwrap();
            let kind = ex.minimal_in.unwrap();
            let sigma = match kind {
                MetricKind::RoundSphere => ex.link.clone().unwrap(),
                _ => ex.interior_submanifold((0.1, 0.8)).unwrap(),
            };
            let chart = &sigma.charts()[0];
            let grid = chart.grid().unwrap();
            for u in grid.nodes.iter().step_by(grid.len() / 7 + 1) {
                let h = mean_curvature(chart, kind, u).unwrap();
                assert!(h.norm() < 1e-5, "{name} at {u:?}: {}", h.norm());
            }
        }
    }

    #[test]
    fn negative_controls_fail_their_checks() {
        let line = make(&ExampleSpec::new("complex_line")).unwrap();
        let sigma = line.interior_submanifold((0.1, 0.8)).unwrap();
        assert!(!isotropy_report(&sigma, MetricKind::ModifiedBergman, 1e-8).unwrap().is_isotropic);
        let report = horizontality_report(line.link.as_ref().unwrap(), 1e-8).unwrap();
        assert!((report.max_theta - 1.0).abs() < 1e-10);
    }

    #[test]
    fn real_slice_is_lagrangian() {
        let ex = make(&ExampleSpec::new("real_slice")).unwrap();
        let sigma = ex.interior_submanifold((0.05, 0.9)).unwrap();
        let report = isotropy_report(&sigma, MetricKind::ModifiedBergman, 1e-12).unwrap();
        assert!(report.is_lagrangian, "{report:?}");
    }

    #[test]
    fn displaced_boundaries_stay_horizontal() {
        for spec in [ExampleSpec::new("displaced_slice"), ExampleSpec::new("displaced_slice").with("n", 2.0)] {
            let ex = make(&spec).unwrap();
            let report = horizontality_report(ex.link.as_ref().unwrap(), 1e-6).unwrap();
            assert!(report.max_theta < 1e-6, "{spec}: {}", report.max_theta);
        }
    }

    #[test]
    fn catalog_lists_every_name() {
        let entries = catalog().unwrap();
        assert_eq!(entries.len(), NAMES.len());
        assert!(matches!(make(&ExampleSpec::new("castro_urbano")), Err(Error::NotImplemented(_))));
        assert!(matches!(make(&ExampleSpec::new("nope")), Err(Error::UnknownExample(_))));
        let json = serde_json::to_string(&entries).unwrap();
        assert!(json.contains("[PAPER]") && json.contains("[DERIVED]") && json.contains("[TRIVIAL]"));
    }
}
