//! Gauss–Legendre rules, half-line Gaussian-weight integrals and periodic means.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::exact::{to_f64, twice_as_integer, Rational};
use super::{CHiPrec, HiPrec, DEFAULT_PRECISION_BITS};
use crate::error::{Error, Result};

type Rule = Arc<Vec<(HiPrec, HiPrec)>>;

fn rule_cache() -> &'static Mutex<HashMap<(usize, usize), Rule>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn legendre_with_derivative(n: usize, x: &HiPrec) -> (HiPrec, HiPrec) {
    let bits = x.precision();
    let mut p0 = HiPrec::one(bits);
    let mut p1 = x.clone();
    for k in 1..n {
        let k = k as i64;
        let p2 = (&x.mul_i64(2 * k + 1) * &p1 - p0.mul_i64(k)).div_i64(k + 1);
        p0 = p1;
        p1 = p2;
    }
    let one = HiPrec::one(bits);
    let dp = (&(x * &p1) - &p0).mul_i64(n as i64) / (x * x - one);
    (p1, dp)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1], cached per precision.
pub fn gauss_legendre(n: usize, bits: usize) -> Rule {
    assert!(n >= 1, "rule needs at least one node");
    if let Some(rule) = rule_cache().lock().unwrap().get(&(n, bits)) {
        return rule.clone();
    }
    let tol = HiPrec::one(bits).div_i64(1i64 << 40).powi((bits as u32).saturating_sub(16) / 40);
    let nodes: Vec<(HiPrec, HiPrec)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut xf = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..8 {
                let (p, dp) = legendre_f64(n, xf);
                xf -= p / dp;
            }
            let mut x = HiPrec::from_f64(xf, bits);
            for _ in 0..30 {
                let (p, dp) = legendre_with_derivative(n, &x);
                let dx = &p / &dp;
                x = &x - &dx;
                if dx.abs() <= tol {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, &x);
            let one = HiPrec::one(bits);
            let weight = HiPrec::from_i64(2, bits) / (&(&one - &(&x * &x)) * &(&dp * &dp));
            (x, weight)
        })
        .collect();
    let rule = Arc::new(nodes);
    rule_cache().lock().unwrap().insert((n, bits), rule.clone());
    rule
}

fn legendre_f64(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Tuning knobs for [`halfline_weighted_quadrature_with`].
#[derive(Clone, Debug)]
pub struct HalflineOptions {
    pub bits: usize,
    /// Polynomial growth of the callback, used to place the truncation point.
    pub degree_hint: u32,
    pub nodes_per_panel: usize,
    pub max_panels: usize,
}

impl Default for HalflineOptions {
    fn default() -> Self {
        HalflineOptions { bits: DEFAULT_PRECISION_BITS, degree_hint: 0, nodes_per_panel: 24, max_panels: 1024 }
    }
}

/// ∫₀^∞ e^{−wz²} z^{2s} f(z) dz with default options.
pub fn halfline_weighted_quadrature<F>(f: F, s: &Rational, w: &Rational, target_reldigits: u32) -> Result<HiPrec>
where
    F: Fn(&HiPrec) -> HiPrec + Sync,
{
    halfline_weighted_quadrature_with(f, s, w, target_reldigits, &HalflineOptions::default())
}

fn truncation_point(w: f64, power: f64, digits: u32) -> f64 {
    let target = (digits as f64 + 5.0) * std::f64::consts::LN_10;
    let mut z = (1.0f64).max((power / (2.0 * w)).sqrt());
    while w * z * z - power * z.ln() < target {
        z *= 1.02;
    }
    z
}

pub fn halfline_weighted_quadrature_with<F>(
    f: F,
    s: &Rational,
    w: &Rational,
    target_reldigits: u32,
    opts: &HalflineOptions,
) -> Result<HiPrec>
where
    F: Fn(&HiPrec) -> HiPrec + Sync,
{
    let two_s = match twice_as_integer(s) {
        Some(m) if m >= 0 => m as u32,
        _ => return Err(Error::Domain(format!("weight exponent 2s must be a nonnegative integer, got s={s}"))),
    };
    let wf = to_f64(w);
    if !(wf > 0.0) {
        return Err(Error::Domain(format!("w must be positive, got {w}")));
    }
    let bits = opts.bits;
    let w_hp = HiPrec::from_rational(w, bits);
    let rule = gauss_legendre(opts.nodes_per_panel, bits);
    let tol = 10f64.powi(-(target_reldigits as i32));
    let integrand = |z: &HiPrec| -> HiPrec {
        let gauss = (-(&(&w_hp * z) * z)).exp();
        &(&gauss * &z.powi(two_s)) * &f(z)
    };

    let mut degree = opts.degree_hint as f64;
    for _ in 0..8 {
        let z_max = truncation_point(wf, two_s as f64 + degree, target_reldigits);
        let (value, l1) = panels_until_converged(&integrand, &rule, z_max, tol, opts.max_panels, bits)?;
        let edge = integrand(&HiPrec::from_f64(z_max, bits)).abs().to_f64() * z_max;
        if edge <= tol * 1e-3 * l1.max(f64::MIN_POSITIVE) || l1 == 0.0 {
            return Ok(value);
        }
        degree = degree * 2.0 + 8.0;
    }
    Err(Error::Convergence { what: "half-line truncation point".into(), last_change: f64::NAN, tolerance: tol })
}

fn composite<G>(g: &G, rule: &Rule, z_max: f64, panels: usize, bits: usize) -> (HiPrec, f64)
where
    G: Fn(&HiPrec) -> HiPrec + Sync,
{
    let width = HiPrec::from_f64(z_max, bits).div_i64(panels as i64);
    let half = width.div_i64(2);
    let parts: Vec<(HiPrec, f64)> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let mid = &width.mul_i64(p as i64) + &half;
            let mut acc = HiPrec::zero(bits);
            let mut l1 = 0.0;
            for (x, wt) in rule.iter() {
                let z = &mid + &(&half * x);
                let term = wt * &g(&z);
                l1 += term.abs().to_f64();
                acc = &acc + &term;
            }
            (&acc * &half, l1 * half.to_f64())
        })
        .collect();
    parts.into_iter().fold((HiPrec::zero(bits), 0.0), |(a, l), (b, m)| (&a + &b, l + m))
}

fn panels_until_converged<G>(
    g: &G,
    rule: &Rule,
    z_max: f64,
    tol: f64,
    max_panels: usize,
    bits: usize,
) -> Result<(HiPrec, f64)>
where
    G: Fn(&HiPrec) -> HiPrec + Sync,
{
    let mut panels = 2;
    let (mut prev, _) = composite(g, rule, z_max, panels, bits);
    let mut last_change = f64::INFINITY;
    while panels < max_panels {
        panels *= 2;
        let (next, l1) = composite(g, rule, z_max, panels, bits);
        last_change = (&next - &prev).abs().to_f64();
        if last_change <= tol * l1 {
            return Ok((next, l1));
        }
        prev = next;
    }
    Err(Error::Convergence { what: "half-line panel refinement".into(), last_change, tolerance: tol })
}

fn theta(j: usize, m: usize, two_pi: &HiPrec) -> HiPrec {
    two_pi.mul_i64(j as i64).div_i64(m as i64)
}

/// Mean of a real 2π-periodic function by the trapezoid rule, doubling `m` until two
/// successive means agree to `tol` relative to the mean absolute value.
pub fn circle_mean<G>(g: G, m: usize, tol: f64, bits: usize) -> Result<HiPrec>
where
    G: Fn(&HiPrec) -> HiPrec + Sync,
{
    let out = circle_mean_complex(|t| CHiPrec::real(g(t)), m, tol, bits)?;
    Ok(out.re)
}

/// Complex-valued version of [`circle_mean`].
pub fn circle_mean_complex<G>(g: G, m: usize, tol: f64, bits: usize) -> Result<CHiPrec>
where
    G: Fn(&HiPrec) -> CHiPrec + Sync,
{
    if m < 8 {
        return Err(Error::Validation(format!("circle grid needs at least 8 points, got {m}")));
    }
    const MAX_POINTS: usize = 1 << 20;
    let two_pi = HiPrec::pi(bits).mul_i64(2);
    let sum_over = |idx: Vec<usize>, m: usize| -> (CHiPrec, f64) {
        idx.into_par_iter()
            .map(|j| {
                let v = g(&theta(j, m, &two_pi));
                let a = v.abs().to_f64();
                (v, a)
            })
            .reduce(|| (CHiPrec::real(HiPrec::zero(bits)), 0.0), |(a, x), (b, y)| (&a + &b, x + y))
    };
    let (mut sum, mut abs_sum) = sum_over((0..m).collect(), m);
    let mut m = m;
    let mut mean = sum.scale(&HiPrec::one(bits).div_i64(m as i64));
    let mut last_change = f64::INFINITY;
    while 2 * m <= MAX_POINTS {
        let (odd, odd_abs) = sum_over((0..m).map(|j| 2 * j + 1).collect(), 2 * m);
        sum = &sum + &odd;
        abs_sum += odd_abs;
        m *= 2;
        let next = sum.scale(&HiPrec::one(bits).div_i64(m as i64));
        last_change = (&next - &mean).abs().to_f64();
        mean = next;
        if last_change <= tol * (abs_sum / m as f64) {
            return Ok(mean);
        }
    }
    Err(Error::Convergence { what: "circle mean refinement".into(), last_change, tolerance: tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::exact::{int, rat};

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = gauss_legendre(10, 192);
        let total: f64 = rule.iter().map(|(_, w)| w.to_f64()).sum();
        assert!((total - 2.0).abs() < 1e-15);
        let mut acc = HiPrec::zero(192);
        for (x, w) in rule.iter() {
            acc = &acc + &(w * &x.powi(18));
        }
        assert!((acc.to_f64() - 2.0 / 19.0).abs() < 1e-15);
    }

    #[test]
    fn halfline_examples() {
        let one = |z: &HiPrec| HiPrec::one(z.precision());
        let v = halfline_weighted_quadrature(one, &rat(3, 2), &int(1), 20).unwrap();
        assert!((v.to_f64() - 0.5).abs() < 1e-15);
        let sq = |z: &HiPrec| z * z;
        let v = halfline_weighted_quadrature(sq, &rat(3, 2), &int(1), 20).unwrap();
        assert!((v.to_f64() - 1.0).abs() < 1e-15);
        let v = halfline_weighted_quadrature(one, &rat(3, 2), &int(4), 20).unwrap();
        assert!((v.to_f64() - 1.0 / 32.0).abs() < 1e-17);
    }

    #[test]
    fn halfline_rejects_bad_weight() {
        let one = |z: &HiPrec| HiPrec::one(z.precision());
        assert!(halfline_weighted_quadrature(one, &rat(3, 2), &int(0), 10).is_err());
        assert!(halfline_weighted_quadrature(one, &rat(1, 3), &int(1), 10).is_err());
    }

    #[test]
    fn circle_examples() {
        let bits = 128;
        let c = circle_mean(|t| HiPrec::from_f64(2.5, t.precision()), 8, 1e-20, bits).unwrap();
        assert!((c.to_f64() - 2.5).abs() < 1e-30);
        let c = circle_mean(|t| t.cos(), 8, 1e-20, bits).unwrap();
        assert!(c.to_f64().abs() < 1e-30);
        let c = circle_mean(
            |t| {
                let a = &HiPrec::one(t.precision()) + &t.cos();
                &a * &a
            },
            8,
            1e-20,
            bits,
        )
        .unwrap();
        assert!((c.to_f64() - 1.5).abs() < 1e-30);
        assert!(circle_mean(|t| t.cos(), 4, 1e-20, bits).is_err());
    }
}
