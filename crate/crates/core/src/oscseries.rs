//! Alternating binomial series S₁, S₂, S₃: exact direct sums and their circle-integral forms.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::exact::{binomial, binomial_row, factorial, pow_i, sum_rationals, twice_as_integer, Rational};
use crate::numerics::quadrature::gauss_legendre;
use crate::numerics::{circle_mean_complex, Base, CHiPrec, HiPrec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Which {
    S1,
    S2,
    S3,
}

impl Which {
    pub fn as_str(self) -> &'static str {
        match self {
            Which::S1 => "S1",
            Which::S2 => "S2",
            Which::S3 => "S3",
        }
    }
}

impl std::str::FromStr for Which {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Which::S1),
            "s2" => Ok(Which::S2),
            "s3" => Ok(Which::S3),
            other => Err(Error::Parse(format!("unknown series {other:?}; expected s1, s2 or s3"))),
        }
    }
}

/// A direct sum: exact when every factor is rational (base 2), floating otherwise.
#[derive(Clone, Debug)]
pub struct DirectValue {
    pub exact: Option<Rational>,
    pub value: HiPrec,
}

/// Accuracy knobs for the integral forms.
#[derive(Clone, Debug)]
pub struct SeriesOptions {
    pub bits: usize,
    /// Relative agreement required between successive grid refinements.
    pub tol: f64,
    /// Largest acceptable imaginary part of a mean that must be real.
    pub imag_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { bits: 256, tol: 1e-30, imag_tol: 1e-20 }
    }
}

fn t_of(s: &Rational) -> Result<u32> {
    match twice_as_integer(s) {
        Some(m) if m >= 3 && m % 2 == 1 => Ok(((m - 1) / 2) as u32),
        _ => Err(Error::Domain(format!("s must be a half-odd-integer >= 3/2, got {s}"))),
    }
}

/// (−1)^k C(u,k) C(2t+2k, t+k) · k^weight_power, the base-free part of the S₁/S₂ terms.
fn series_terms(u: u32, t: u32, weight_k: bool) -> Vec<BigInt> {
    binomial_row(u as u64)
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut term = c * binomial(2 * (t as u64 + k as u64), t as u64 + k as u64);
            if weight_k {
                term *= k;
            }
            if k % 2 == 1 {
                -term
            } else {
                term
            }
        })
        .collect()
}

fn direct_sum(u: u32, s: &Rational, base: Base, bits: usize, weight_k: bool) -> Result<DirectValue> {
    let t = t_of(s)?;
    let terms = series_terms(u, t, weight_k);
    match base {
        Base::Two => {
            // Σ term_k 4^{−k} = (Σ term_k 4^{u−k}) / 4^u
            let num = terms
                .iter()
                .enumerate()
                .fold(BigInt::zero(), |acc, (k, c)| acc + c * num_traits::pow(BigInt::from(4), u as usize - k));
            let exact = Rational::new(num, num_traits::pow(BigInt::from(4), u as usize));
            let value = HiPrec::from_rational(&exact, bits);
            Ok(DirectValue { exact: Some(exact), value })
        }
        Base::E => {
            let largest = terms.iter().map(|c| c.bits()).max().unwrap_or(1) as usize;
            let work = bits + largest + 64;
            let e_m2 = (HiPrec::one(work) / HiPrec::e(work)).powi(2);
            let mut acc = HiPrec::zero(work);
            let mut factor = HiPrec::one(work);
            for c in &terms {
                acc = &acc + &(&HiPrec::from_bigint(c, work) * &factor);
                factor = &factor * &e_m2;
            }
            acc.set_precision(bits);
            Ok(DirectValue { exact: None, value: acc })
        }
    }
}

/// S₁ = Σₖ base^{−2k} (−1)^k C(u,k) (2s+2k−1)!/((s+k−1/2)!²).
pub fn s1_direct(u: u32, s: &Rational, base: Base, bits: usize) -> Result<DirectValue> {
    direct_sum(u, s, base, bits, false)
}

/// S₂: as S₁ with an extra factor k in each term.
pub fn s2_direct(u: u32, s: &Rational, base: Base, bits: usize) -> Result<DirectValue> {
    direct_sum(u, s, base, bits, true)
}

fn real_part_checked(z: CHiPrec, imag_tol: f64) -> Result<HiPrec> {
    let residue = z.im.abs().to_f64();
    if residue > imag_tol {
        return Err(Error::ImaginaryResidue { residue, tolerance: imag_tol });
    }
    Ok(z.re)
}

/// e^{i·phase·θ} (1+e^{−iθ})^{power} [1 − (1+e^{−iθ})² e^{iθ}/base²]^{exponent}
fn series_integrand(theta: &HiPrec, phase: u32, power: u32, exponent: u32, inv_base_sq: &HiPrec) -> CHiPrec {
    let bits = theta.precision();
    let x = CHiPrec::cis(theta);
    let one_plus = &CHiPrec::one(bits) + &x.conj();
    let bracket = &CHiPrec::one(bits) - &(&one_plus.powi(2) * &x).scale(inv_base_sq);
    let lead = &x.powi(phase) * &one_plus.powi(power);
    &lead * &bracket.powi(exponent)
}

fn grid_start(u: u32, t: u32) -> usize {
    ((u + 2 * t + 4) as usize).next_power_of_two().max(8)
}

/// S₁ as the circle mean of e^{itθ}(1+e^{−iθ})^{2t}[1 − (1+e^{−iθ})²e^{iθ}/base²]^u.
pub fn s1_integral(u: u32, s: &Rational, base: Base, opts: &SeriesOptions) -> Result<HiPrec> {
    let t = t_of(s)?;
    let bits = opts.bits;
    let inv_b2 = HiPrec::one(bits) / base.value(bits).powi(2);
    let mean = circle_mean_complex(|th| series_integrand(th, t, 2 * t, u, &inv_b2), grid_start(u, t), opts.tol, bits)?;
    real_part_checked(mean, opts.imag_tol)
}

/// S₂ = −(u/base²) · mean of e^{i(t+1)θ}(1+e^{−iθ})^{2t+2}[…]^{u−1}.
pub fn s2_integral(u: u32, s: &Rational, base: Base, opts: &SeriesOptions) -> Result<HiPrec> {
    let t = t_of(s)?;
    if u == 0 {
        return Ok(HiPrec::zero(opts.bits));
    }
    let bits = opts.bits;
    let inv_b2 = HiPrec::one(bits) / base.value(bits).powi(2);
    let mean = circle_mean_complex(
        |th| series_integrand(th, t + 1, 2 * t + 2, u - 1, &inv_b2),
        grid_start(u, t + 1),
        opts.tol,
        bits,
    )?;
    let re = real_part_checked(mean, opts.imag_tol)?;
    Ok(-(&(&re * &inv_b2) * &HiPrec::from_i64(u as i64, bits)))
}

/// S₃ = Σ_{j,k} (−1)^{j+k} C(u,j) C(u,k) (t+k+j)!/((t+k)!(t+j)!), summed exactly.
pub fn s3_direct(u: u32, t: u32) -> Result<Rational> {
    if t == 0 {
        return Err(Error::Domain("t must be a positive integer".into()));
    }
    let row = binomial_row(u as u64);
    let t = t as u64;
    let parts: Vec<Rational> = (0..=u as u64)
        .into_par_iter()
        .map(|j| {
            // Σ_k (−1)^k C(u,k) (t+k+1)(t+k+2)…(t+k+j), an integer.
            let mut rising: BigInt = ((t + 1)..=(t + j)).fold(BigInt::one(), |acc, v| acc * v);
            let mut inner = BigInt::zero();
            for (k, c) in row.iter().enumerate() {
                let k = k as u64;
                if k.is_multiple_of(2) {
                    inner += c * &rising;
                } else {
                    inner -= c * &rising;
                }
                rising = rising * (t + k + j + 1) / (t + k + 1);
            }
            let signed = if j % 2 == 0 { inner } else { -inner };
            Rational::new(signed * &row[j as usize], factorial(t + j))
        })
        .collect();
    Ok(sum_rationals(&parts))
}

/// u!/(u+t)!, the closed form the direct S₃ sum collapses to.
pub fn s3_closed_form(u: u32, t: u32) -> Rational {
    Rational::new(factorial(u as u64), factorial(u as u64 + t as u64))
}

/// Options for the S₃ tensor-product integral.
#[derive(Clone, Debug, Default)]
pub struct S3Options {
    pub series: SeriesOptions,
    /// Gauss nodes per v-axis; `None` picks the smallest count that is exact for the
    /// polynomial v-dependence, capped at 64.
    pub nodes_per_axis: Option<usize>,
}

/// Tensor-product Gauss points on [−1,0]^t: (weight × ∏(1+v_i)^{t−i}, V_t = ∏(1+v_i)).
fn s3_points(t: u32, nodes: usize, bits: usize) -> Vec<(HiPrec, HiPrec)> {
    let rule = gauss_legendre(nodes, bits);
    let half = HiPrec::one(bits).div_i64(2);
    // v = (x − 1)/2, so 1 + v = (x + 1)/2 and dv = dx/2.
    let axis: Vec<(HiPrec, HiPrec)> =
        rule.iter().map(|(x, w)| (&(x + &HiPrec::one(bits)) * &half, w * &half)).collect();
    let mut points = vec![(HiPrec::one(bits), HiPrec::one(bits))];
    for i in 1..=t {
        let power = t - i;
        let mut next = Vec::with_capacity(points.len() * axis.len());
        for (wp, vp) in &points {
            for (one_plus_v, w) in &axis {
                let weight = &(wp * w) * &one_plus_v.powi(power);
                next.push((weight, vp * one_plus_v));
            }
        }
        points = next;
    }
    points
}

/// S₃ as the circle mean over θ of (1+e^{−iθ})^t times the t-fold v-integral of
/// [v₁+1]^{t−1}···[v_{t−1}+1] [1 − V_t(1+e^{iθ})]^u [1 − V_t(1+e^{−iθ})]^u.
pub fn s3_integral(u: u32, t: u32, opts: &S3Options) -> Result<HiPrec> {
    if t == 0 {
        return Err(Error::Domain("t must be a positive integer".into()));
    }
    let bits = opts.series.bits;
    let nodes = opts.nodes_per_axis.unwrap_or_else(|| ((2 * u + t) as usize / 2 + 2).clamp(4, 64));
    let points = s3_points(t, nodes, bits);
    let mean = circle_mean_complex(
        |th| {
            // (1 − Va)(1 − Vā) = 1 − 2Vc + 2V²c with c = 1 + cos θ, a real factor.
            let c = &HiPrec::one(bits) + &th.cos();
            let inner = points
                .par_iter()
                .map(|(w, v)| {
                    let two_vc = (v * &c).mul_i64(2);
                    let f = &(&HiPrec::one(bits) - &two_vc) + &(&two_vc * v);
                    w * &f.powi(u)
                })
                .reduce(|| HiPrec::zero(bits), |a, b| &a + &b);
            let lead = (&CHiPrec::one(bits) + &CHiPrec::cis(th).conj()).powi(t);
            lead.scale(&inner)
        },
        grid_start(u, t),
        opts.series.tol,
        bits,
    )?;
    real_part_checked(mean, opts.series.imag_tol)
}

/// Both sides of the change-of-variables lemma for the iterated integral
/// Iₙ[g](z) = ∫_{−1}^{z}dz₁∫_{−1}^{z₁}dz₂ … ∫_{−1}^{z_{n−1}}dzₙ g(zₙ).
pub fn iterated_integral_check<G>(n: u32, g: G, z: &HiPrec, nodes: usize) -> Result<(HiPrec, HiPrec)>
where
    G: Fn(&HiPrec) -> HiPrec + Sync,
{
    if !(1..=4).contains(&n) {
        return Err(Error::Domain(format!("iterated integral depth must be 1..=4, got {n}")));
    }
    let bits = z.precision();
    let one = HiPrec::one(bits);
    if (z + &one).is_negative() {
        return Err(Error::Domain("upper limit must be at least −1".into()));
    }
    let rule = gauss_legendre(nodes, bits);

    fn nested<G: Fn(&HiPrec) -> HiPrec>(depth: u32, upper: &HiPrec, g: &G, rule: &[(HiPrec, HiPrec)]) -> HiPrec {
        let bits = upper.precision();
        let one = HiPrec::one(bits);
        let half = (upper + &one).div_i64(2);
        let mid = upper - &half;
        let mut acc = HiPrec::zero(bits);
        for (x, w) in rule {
            let y = &mid + &(&half * x);
            let inner = if depth == 1 { g(&y) } else { nested(depth - 1, &y, g, rule) };
            acc = &acc + &(w * &inner);
        }
        &acc * &half
    }
    let lhs = nested(n, z, &g, &rule);

    let scale = z + &one;
    let points = s3_points(n, nodes, bits);
    let rhs_inner =
        points.par_iter().map(|(w, v)| w * &g(&(&(v * &scale) - &one))).reduce(|| HiPrec::zero(bits), |a, b| &a + &b);
    let rhs = &scale.powi(n) * &rhs_inner;
    Ok((lhs, rhs))
}

/// Both sides of ∏_{j=1}^{k−1}(1+s+j)/(1/2+s+j) = C(s)·base^{−2k}(2s+2k)!/((s+k−1/2)!²),
/// with C(s) = base²((1/2+s)!)²/(2+2s)!.
#[derive(Clone, Debug)]
pub struct ProductIdentity {
    pub lhs: Rational,
    pub rhs_exact: Option<Rational>,
    pub residual: HiPrec,
}

/// C(s) in base 2.
pub fn c_of_s_base_two(s: &Rational) -> Result<Rational> {
    let t = t_of(s)? as u64;
    let fact_half = factorial(t + 1);
    Ok(Rational::new(BigInt::from(4) * &fact_half * &fact_half, factorial(2 * t + 3)))
}

pub fn product_identity_check(k: u32, s: &Rational, base: Base, bits: usize) -> Result<ProductIdentity> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let t = t_of(s)? as u64;
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    let lhs = (1..k as u64).fold(Rational::one(), |acc, j| {
        let j = Rational::from_integer(BigInt::from(j));
        acc * (Rational::one() + s + &j) / (&half + s + &j)
    });
    let k64 = k as u64;
    let fact_ratio = Rational::new(factorial(2 * t + 2 * k64 + 1), factorial(t + k64) * factorial(t + k64));
    let fact_half = factorial(t + 1);
    let c_rational = Rational::new(&fact_half * &fact_half, factorial(2 * t + 3));
    match base {
        Base::Two => {
            let rhs = c_rational * pow_i(&Rational::from_integer(BigInt::from(4)), 1 - k as i64) * fact_ratio;
            let residual = HiPrec::from_rational(&(&lhs - &rhs), bits);
            Ok(ProductIdentity { lhs, rhs_exact: Some(rhs), residual })
        }
        Base::E => {
            let e2 = HiPrec::e(bits).powi(2);
            let factor = HiPrec::one(bits) / e2.powi(k - 1);
            let rhs = &factor * &HiPrec::from_rational(&(c_rational * fact_ratio), bits);
            let residual = &HiPrec::from_rational(&lhs, bits) - &rhs;
            Ok(ProductIdentity { lhs, rhs_exact: None, residual })
        }
    }
}

/// Critical point of the S₁ integrand magnitude I₁(θ) = {2(1+cos θ)}^t [1 − 2(1+cos θ)/base²]^u.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    /// Predicted 1 + cos θ* = D/(t+u), D = base²·t/2.
    pub predicted_one_plus_cos: f64,
    /// Location of the maximum found by grid search on (0, π).
    pub grid_one_plus_cos: f64,
    /// Grid spacing in θ.
    pub resolution: f64,
}

pub fn critical_point(u: u32, t: u32, base: Base, grid: usize) -> CriticalPoint {
    let b2 = match base {
        Base::Two => 4.0,
        Base::E => std::f64::consts::E.powi(2),
    };
    let predicted = b2 * t as f64 / 2.0 / (t + u) as f64;
    let log_i1 = |th: f64| {
        let c = 1.0 + th.cos();
        let bracket = 1.0 - 2.0 * c / b2;
        t as f64 * (2.0 * c).ln() + u as f64 * bracket.abs().ln()
    };
    let h = std::f64::consts::PI / grid as f64;
    // Restrict to the arc where the bracket stays positive, which contains θ*.
    let (best, _) = (1..grid)
        .map(|i| i as f64 * h)
        .filter(|th| 2.0 * (1.0 + th.cos()) < b2)
        .map(|th| (th, log_i1(th)))
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
    CriticalPoint { predicted_one_plus_cos: predicted, grid_one_plus_cos: 1.0 + best.cos(), resolution: h }
}

/// Closed forms of the base-2 series, used as oracles:
/// S₁ = C(2t,t) C(2u,u) / (4^u C(t+u,u)).
pub fn s1_closed_form(u: u32, t: u32) -> Rational {
    let (u, t) = (u as u64, t as u64);
    Rational::new(
        binomial(2 * t, t) * binomial(2 * u, u),
        num_traits::pow(BigInt::from(4), u as usize) * binomial(t + u, u),
    )
}

/// One row of `series.csv`.
#[derive(Clone, Debug)]
pub struct SeriesRow {
    pub which: Which,
    pub u: u32,
    pub t_or_s: Rational,
    pub base: Base,
    pub direct: HiPrec,
    pub direct_exact: Option<Rational>,
    pub integral: HiPrec,
    pub abs_diff: f64,
    /// Local log-log slope between this row and the previous one (NaN for the first).
    pub slope_window: f64,
}

/// Direct and integral values of one series over a sweep of u.
pub fn series_sweep(which: Which, us: &[u32], t: u32, base: Base, opts: &S3Options) -> Result<Vec<SeriesRow>> {
    let s = Rational::new(BigInt::from(2 * t + 1), BigInt::from(2));
    let mut rows: Vec<SeriesRow> = Vec::with_capacity(us.len());
    for &u in us {
        let bits = opts.series.bits;
        let (direct, exact, integral, t_or_s) = match which {
            Which::S1 => {
                let d = s1_direct(u, &s, base, bits)?;
                (d.value, d.exact, s1_integral(u, &s, base, &opts.series)?, s.clone())
            }
            Which::S2 => {
                let d = s2_direct(u, &s, base, bits)?;
                (d.value, d.exact, s2_integral(u, &s, base, &opts.series)?, s.clone())
            }
            Which::S3 => {
                let d = s3_direct(u, t)?;
                let v = HiPrec::from_rational(&d, bits);
                (v, Some(d), s3_integral(u, t, opts)?, Rational::from_integer(BigInt::from(t)))
            }
        };
        let abs_diff = (&direct - &integral).abs().to_f64();
        let slope_window = match rows.last() {
            Some(prev) if prev.u > 0 && u > 0 => {
                let (a, b) = (prev.direct.to_f64().abs(), direct.to_f64().abs());
                (b.ln() - a.ln()) / ((u as f64).ln() - (prev.u as f64).ln())
            }
            _ => f64::NAN,
        };
        rows.push(SeriesRow { which, u, t_or_s, base, direct, direct_exact: exact, integral, abs_diff, slope_window });
    }
    Ok(rows)
}

/// |S₃| < 2^t, checked exactly.
pub fn s3_bound_holds(value: &Rational, t: u32) -> bool {
    value.abs() < Rational::from_integer(num_traits::pow(BigInt::from(2), t as usize))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::exact::{int, rat};

    fn opts() -> SeriesOptions {
        SeriesOptions { bits: 192, tol: 1e-30, imag_tol: 1e-25 }
    }

    #[test]
    fn s1_examples() {
        let s = rat(3, 2);
        assert_eq!(s1_direct(0, &s, Base::Two, 128).unwrap().exact.unwrap(), int(2));
        assert_eq!(s1_direct(1, &s, Base::Two, 128).unwrap().exact.unwrap(), rat(1, 2));
        assert!((s1_integral(0, &s, Base::Two, &opts()).unwrap().to_f64() - 2.0).abs() < 1e-25);
        assert!((s1_integral(1, &s, Base::Two, &opts()).unwrap().to_f64() - 0.5).abs() < 1e-25);
    }

    #[test]
    fn s2_examples() {
        let s = rat(3, 2);
        assert!(s2_direct(0, &s, Base::Two, 128).unwrap().exact.unwrap().is_zero());
        assert_eq!(s2_direct(1, &s, Base::Two, 128).unwrap().exact.unwrap(), rat(-3, 2));
        assert!((s2_integral(1, &s, Base::Two, &opts()).unwrap().to_f64() + 1.5).abs() < 1e-25);
    }

    #[test]
    fn printed_s2_phase_misses_the_direct_sum() {
        // With e^{i(s−1/2)θ} in place of e^{i(s+1/2)θ} the u = 1 mean gives −1, not −3/2.
        let bits = 128;
        let inv_b2 = HiPrec::one(bits).div_i64(4);
        let mean = circle_mean_complex(|th| series_integrand(th, 1, 4, 0, &inv_b2), 16, 1e-30, bits).unwrap();
        assert!((mean.re.to_f64() * -0.25 + 1.0).abs() < 1e-25);
    }

    #[test]
    fn direct_matches_integral_and_closed_form() {
        for &(u, s2) in &[(5u32, 3i64), (20, 3), (20, 5), (37, 7)] {
            let s = rat(s2, 2);
            let t = ((s2 - 1) / 2) as u32;
            let d1 = s1_direct(u, &s, Base::Two, 192).unwrap();
            assert_eq!(d1.exact.clone().unwrap(), s1_closed_form(u, t));
            let i1 = s1_integral(u, &s, Base::Two, &opts()).unwrap();
            assert!(((&d1.value - &i1).abs() / d1.value.abs()).to_f64() < 1e-25);
            let d2 = s2_direct(u, &s, Base::Two, 192).unwrap();
            let i2 = s2_integral(u, &s, Base::Two, &opts()).unwrap();
            assert!(((&d2.value - &i2).abs() / d2.value.abs()).to_f64() < 1e-25);
        }
    }

    #[test]
    fn base_e_series_also_match_their_integrals() {
        let s = rat(3, 2);
        let d = s1_direct(12, &s, Base::E, 192).unwrap();
        let i = s1_integral(12, &s, Base::E, &opts()).unwrap();
        assert!(d.exact.is_none());
        assert!(((&d.value - &i).abs() / d.value.abs()).to_f64() < 1e-25);
    }

    #[test]
    fn s3_examples() {
        assert_eq!(s3_direct(0, 1).unwrap(), int(1));
        assert_eq!(s3_direct(1, 1).unwrap(), rat(1, 2));
        for u in 0..40 {
            for t in 1..5 {
                let v = s3_direct(u, t).unwrap();
                assert_eq!(v, s3_closed_form(u, t));
                assert!(s3_bound_holds(&v, t));
            }
        }
        assert!(s3_direct(3, 0).is_err());
    }

    #[test]
    fn s3_integral_examples() {
        let o = S3Options { series: opts(), nodes_per_axis: None };
        assert!((s3_integral(0, 1, &o).unwrap().to_f64() - 1.0).abs() < 1e-25);
        assert!((s3_integral(1, 1, &o).unwrap().to_f64() - 0.5).abs() < 1e-25);
        let v = s3_integral(5, 2, &o).unwrap().to_f64();
        assert!((v - 1.0 / 42.0).abs() < 1e-20, "{v}");
    }

    #[test]
    fn iterated_integral_examples() {
        let bits = 128;
        let one = |z: &HiPrec| HiPrec::one(z.precision());
        let (l, r) = iterated_integral_check(1, one, &HiPrec::zero(bits), 8).unwrap();
        assert!((l.to_f64() - 1.0).abs() < 1e-25 && (r.to_f64() - 1.0).abs() < 1e-25);
        let (l, r) = iterated_integral_check(2, one, &HiPrec::one(bits), 8).unwrap();
        assert!((l.to_f64() - 2.0).abs() < 1e-25 && (r.to_f64() - 2.0).abs() < 1e-25);
        let (l, r) = iterated_integral_check(2, |x: &HiPrec| x.clone(), &HiPrec::zero(bits), 8).unwrap();
        // ∫_{−1}^{0}∫_{−1}^{z₁} z₂ = −1/3
        assert!((l.to_f64() + 1.0 / 3.0).abs() < 1e-25 && (&l - &r).abs().to_f64() < 1e-25);
        let (l, r) = iterated_integral_check(4, |x: &HiPrec| x.cos(), &HiPrec::from_f64(0.7, bits), 16).unwrap();
        assert!((&l - &r).abs().to_f64() < 1e-20);
        assert!(iterated_integral_check(5, one, &HiPrec::zero(bits), 8).is_err());
    }

    #[test]
    fn product_identity_examples() {
        let s = rat(3, 2);
        let p = product_identity_check(2, &s, Base::Two, 128).unwrap();
        assert_eq!(p.lhs, rat(7, 6));
        assert_eq!(p.rhs_exact.unwrap(), rat(7, 6));
        assert!(p.residual.is_zero());
        assert!(product_identity_check(2, &s, Base::E, 128).unwrap().residual.abs().to_f64() > 1e-2);
        for base in [Base::Two, Base::E] {
            assert!(product_identity_check(1, &s, base, 128).unwrap().residual.abs().to_f64() < 1e-30);
        }
        for s2 in [3i64, 5, 7, 9, 11] {
            for k in 1..=12 {
                let p = product_identity_check(k, &rat(s2, 2), Base::Two, 128).unwrap();
                assert_eq!(p.lhs, p.rhs_exact.unwrap());
            }
        }
        assert_eq!(c_of_s_base_two(&s).unwrap(), rat(2, 15));
    }

    #[test]
    fn critical_point_matches_prediction() {
        for &(u, t) in &[(50u32, 1u32), (200, 2), (400, 3)] {
            let cp = critical_point(u, t, Base::Two, 200_000);
            // d(1+cos θ) = sin θ dθ ≤ dθ
            assert!((cp.predicted_one_plus_cos - cp.grid_one_plus_cos).abs() < 2.0 * cp.resolution, "{cp:?}");
        }
    }

    #[test]
    fn s1_decays_faster_than_claimed() {
        // Exact ratio S₁(4u)/S₁(u) → 4^{−(t+1/2)}, not 4^{−t}.
        let r = to_f64(&(s1_closed_form(400, 1) / s1_closed_form(100, 1)));
        assert!((r - 0.125).abs() < 0.002, "{r}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn s3_is_bounded_and_closed_form(u in 0u32..300, t in 1u32..5) {
                let d = s3_direct(u, t).unwrap();
                prop_assert!(s3_bound_holds(&d, t));
                prop_assert_eq!(d, s3_closed_form(u, t));
            }
        }
    }
}
