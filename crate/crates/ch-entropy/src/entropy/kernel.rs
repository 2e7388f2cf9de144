//! Heat kernels of the real hyperbolic space `H^m` of curvature `-1`.
//!
//! Odd dimensions come from the Gaussian by the descent
//! `K_{m+2} = -e^{-mt} / (2 pi sinh rho) d_rho K_m`; even dimensions from
//! `K_m(t, rho) = sqrt 2 e^{(2m-1)t/4} int_rho^inf K_{m+1}(t, s) sinh s / sqrt(cosh s - cosh rho) ds`.
//! Everything is evaluated as a logarithm so that far tails do not
//! underflow.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported intrinsic dimension.
pub const MAX_KERNEL_DIM: usize = 5;

/// Grid spacing for tabulated even-dimensional kernels.
const TABLE_STEP: f64 = 0.01;

/// `ln sinh x` for `x > 0` without overflow.
pub fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// `ln(rho / sinh rho)`, including `rho = 0`.
fn ln_rho_over_sinh(rho: f64) -> f64 {
    if rho < 1e-2 {
        let r2 = rho * rho;
        (1.0 - r2 / 6.0 + 7.0 * r2 * r2 / 360.0).ln()
    } else {
        rho.ln() - ln_sinh(rho)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    m: usize,
}

impl KernelSpec {
    pub fn new(m: usize) -> Result<Self> {
        if !(1..=MAX_KERNEL_DIM).contains(&m) {
            return Err(Error::Domain(format!("heat kernels are implemented for 1 <= m <= {MAX_KERNEL_DIM}, got {m}")));
        }
        Ok(KernelSpec { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `ln K_m(t, rho)`.
    pub fn ln_kernel(&self, t: f64, rho: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
        }
        if !(rho >= 0.0) {
            return Err(Error::Domain(format!("heat kernel needs rho >= 0, got {rho}")));
        }
        Ok(ln_kernel(self.m, t, rho))
    }

    pub fn kernel(&self, t: f64, rho: f64) -> Result<f64> {
        Ok(self.ln_kernel(t, rho)?.exp())
    }

    /// A fast evaluator of `rho -> ln K_m(t, rho)` at a fixed time.
    pub fn at_time(&self, t: f64, rho_max: f64) -> Result<KernelAtTime> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
        }
        let table = if self.m % 2 == 0 {
            let count = (rho_max / TABLE_STEP).ceil() as usize + 4;
            Some((0..count).map(|i| ln_kernel(self.m, t, i as f64 * TABLE_STEP)).collect())
        } else {
            None
        };
        Ok(KernelAtTime { m: self.m, t, table })
    }
}

/// `heat_kernel(spec, t, rho) = K_m(t, rho)`.
pub fn heat_kernel(spec: KernelSpec, t: f64, rho: f64) -> Result<f64> {
    spec.kernel(t, rho)
}

fn ln_kernel(m: usize, t: f64, rho: f64) -> f64 {
    match m {
        1 => -0.5 * (4.0 * PI * t).ln() - rho * rho / (4.0 * t),
        3 => -1.5 * (4.0 * PI * t).ln() - t - rho * rho / (4.0 * t) + ln_rho_over_sinh(rho),
        5 => {
            // K_5 = (4 pi t)^{-3/2} e^{-4t - rho^2/4t} / (2 pi) * bracket, with
            // bracket = (rho^2 / 2t + rho coth rho - 1) / sinh^2 rho
            let ln_bracket = if rho < 1e-2 {
                let r2 = rho * rho;
                let q = 1.0 - r2 / 6.0 + 7.0 * r2 * r2 / 360.0;
                (q * q / (2.0 * t) + 1.0 / 3.0 - 2.0 * r2 / 15.0 + 2.0 * r2 * r2 / 63.0).ln()
            } else {
                (rho * rho / (2.0 * t) + rho / rho.tanh() - 1.0).ln() - 2.0 * ln_sinh(rho)
            };
            -1.5 * (4.0 * PI * t).ln() - (2.0 * PI).ln() - 4.0 * t - rho * rho / (4.0 * t) + ln_bracket
        }
        _ => ln_kernel_even(m, t, rho),
    }
}

/// Even dimensions from the next odd one, after `s = rho + u^2`.
fn ln_kernel_even(m: usize, t: f64, rho: f64) -> f64 {
    let odd = m + 1;
    // Exponent of the integrand apart from the endpoint factor 2u / sqrt(sinh(u^2/2)).
    let exponent = |s: f64| {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_kernel(odd, t, s) + ln_sinh(s) - 0.5 * (LN_2 + ln_sinh(0.5 * (s + rho)))
    };
    let e0 = ln_kernel(odd, t, rho) + 0.5 * rho;
    let integrand = |u: f64| {
        let u2 = u * u;
        let endpoint = if u < 1e-4 { 2.0 * 2f64.sqrt() } else { 2.0 * u / (0.5 * u2).sinh().sqrt() };
        endpoint * (exponent(rho + u2) - e0).exp()
    };
    // integrate to where the exponent has dropped far below its peak
    let mut upper = 0.25;
    while exponent(rho + upper * upper) - e0 > -60.0 || upper < 4.0 * t.sqrt().min(1.0) {
        upper *= 1.5;
    }
    let mut total = 0.0;
    // split at the bulk of the mass so the adaptive rule sees smooth panels
    let panels = 8;
    for k in 0..panels {
        let a = upper * k as f64 / panels as f64;
        let b = upper * (k + 1) as f64 / panels as f64;
        total += quadrature::integrate(integrand, a, b, 1e-15).integral;
    }
    0.5 * LN_2 + (2 * m - 1) as f64 * t / 4.0 + e0 + total.ln()
}

/// `rho -> ln K_m(t, rho)` at a fixed `t`; even dimensions are read from a
/// four-point Lagrange interpolation of a fine table.
#[derive(Clone, Debug)]
pub struct KernelAtTime {
    m: usize,
    t: f64,
    table: Option<Vec<f64>>,
}

impl KernelAtTime {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn ln_value(&self, rho: f64) -> f64 {
        let Some(table) = &self.table else {
            return ln_kernel(self.m, self.t, rho);
        };
        let x = rho / TABLE_STEP;
        let i = (x.floor() as usize).max(1);
        if i + 2 >= table.len() {
            return ln_kernel(self.m, self.t, rho);
        }
        let s = x - i as f64;
        let (f0, f1, f2, f3) = (table[i - 1], table[i], table[i + 1], table[i + 2]);
        // nodes at -1, 0, 1, 2
        -s * (s - 1.0) * (s - 2.0) / 6.0 * f0 + (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0 * f1
            - (s + 1.0) * s * (s - 2.0) / 2.0 * f2
            + (s + 1.0) * s * (s - 1.0) / 6.0 * f3
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.ln_value(rho).exp()
    }
}

/// `int_R^inf K_m(T, r) sinh^{m-1} r dr`, which tends to `1 / |S^{m-1}|`
/// as `T -> inf` for fixed `R`.
pub fn tail_normalization(spec: KernelSpec, r: f64, big_t: f64) -> Result<f64> {
    if !(r >= 0.0 && big_t > 0.0) {
        return Err(Error::Domain(format!("tail normalization needs R >= 0 and T > 0, got R = {r}, T = {big_t}")));
    }
    let m = spec.m();
    let ln_density = |x: f64| {
        let ln_vol = if m == 1 { 0.0 } else { (m - 1) as f64 * ln_sinh(x.max(1e-300)) };
        ln_kernel(m, big_t, x) + ln_vol
    };
    // the radial mass travels at speed m - 1 with spread sqrt(2T)
    let centre = (m - 1) as f64 * big_t;
    let spread = (2.0 * big_t).sqrt();
    let upper = centre.max(r) + 20.0 * spread + 20.0;
    let lower = r;
    let panels = 64;
    let mut total = 0.0;
    for k in 0..panels {
        let a = lower + (upper - lower) * k as f64 / panels as f64;
        let b = lower + (upper - lower) * (k + 1) as f64 / panels as f64;
        total += quadrature::integrate(|x| ln_density(x).exp(), a, b, 1e-15).integral;
    }
    Ok(total)
}

/// `|S^{m-1}| int_0^inf K_m(t, r) sinh^{m-1} r dr`.
pub fn kernel_mass(spec: KernelSpec, t: f64) -> Result<f64> {
    let m = spec.m();
    let sphere = crate::zoo::sphere_volume(m - 1);
    Ok(sphere * tail_normalization(spec, 0.0, t)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_base_and_three_dimensional_kernel() {
        let k1 = KernelSpec::new(1).unwrap();
        assert!((k1.kernel(1.0, 0.0).unwrap() - 0.282_094_791_773_878_1).abs() < 1e-15);
        let k3 = KernelSpec::new(3).unwrap();
        let (t, rho) = (0.7, 1.3);
        let closed = (4.0 * PI * t).powf(-1.5) * rho / rho.sinh() * (-t - rho * rho / (4.0 * t)).exp();
        assert!((k3.kernel(t, rho).unwrap() - closed).abs() < 1e-15 * closed.max(1.0));
    }

    #[test]
    fn descent_relation_from_three_to_five() {
        let (k3, k5) = (KernelSpec::new(3).unwrap(), KernelSpec::new(5).unwrap());
        for &(t, rho) in &[(0.5, 0.3), (1.0, 1.0), (2.0, 4.0), (0.3, 0.02)] {
            let h = 1e-5;
            let d = (k3.kernel(t, rho + h).unwrap() - k3.kernel(t, rho - h).unwrap()) / (2.0 * h);
            let expected = -(-3.0 * t).exp() / (2.0 * PI * rho.sinh()) * d;
            let got = k5.kernel(t, rho).unwrap();
            assert!((got - expected).abs() < 1e-6 * expected, "t = {t}, rho = {rho}: {got} vs {expected}");
        }
    }

    #[test]
    fn k5_is_continuous_across_the_series_switch() {
        let k5 = KernelSpec::new(5).unwrap();
        let (a, b) = (k5.kernel(1.0, 0.01 - 1e-12).unwrap(), k5.kernel(1.0, 0.01 + 1e-12).unwrap());
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        for m in [2, 4] {
            let spec = KernelSpec::new(m).unwrap();
            for t in [0.05, 1.0, 8.0] {
                let table = spec.at_time(t, 10.0).unwrap();
                for rho in [0.0, 0.013, 0.5, 2.345, 7.77, 12.0] {
                    let direct = spec.ln_kernel(t, rho).unwrap();
                    assert!((table.ln_value(rho) - direct).abs() < 1e-8 * direct.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(KernelSpec::new(0).is_err());
        assert!(KernelSpec::new(6).is_err());
        let k = KernelSpec::new(2).unwrap();
        assert!(k.kernel(0.0, 1.0).is_err());
        assert!(k.kernel(1.0, -1.0).is_err());
    }
}
