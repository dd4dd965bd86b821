//! Exact spectral theory of the one-variable problem
//! −f'' + (q z⁻² + w² z²) f = μ f on the half-line, plus a finite-difference oracle.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::exact::{binomial_row, pow_i, rat, twice_as_integer, Rational};
use crate::numerics::{gamma_exact, HiPrec, Surd};

/// ∫₀^∞ e^{−wz²} z^m dz = ½ w^{−(m+1)/2} Γ((m+1)/2), exactly.
pub fn gaussian_moment(m: u32, w: &Rational) -> Surd {
    let arg = Rational::new(BigInt::from(m + 1), BigInt::from(2));
    let g = gamma_exact(&arg).expect("positive half-integer argument");
    let half_power = m as i64 + 1;
    let w_int = pow_i(w, -(half_power / 2));
    let root = if half_power % 2 == 1 { w.recip() } else { Rational::one() };
    Surd::new(&g.rational_part * &w_int * rat(1, 2), g.sqrtpi_power as u32, root)
}

/// Even moments σ₂ₖ of the weight γ(z) = e^{−wz²} z^{2 s_eff}, normalized by its mass.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub s_eff: Rational,
    pub w: Rational,
    /// `sigma[k]` = σ₂ₖ, with σ₀ = 1.
    pub sigma: Vec<Rational>,
    /// ∫₀^∞ γ(z) dz; d₀ is its reciprocal.
    pub gamma_mass: Surd,
}

pub fn moments(s_eff: &Rational, w: &Rational, k_max: usize) -> Result<MomentTable> {
    let two_s = match twice_as_integer(s_eff) {
        Some(m) if m >= 0 => m,
        _ => {
            return Err(Error::Domain(format!(
                "moment exponent must be a nonnegative integer or half-integer, got {s_eff}"
            )))
        }
    };
    if !w.is_positive() {
        return Err(Error::Domain(format!("w must be positive, got {w}")));
    }
    let mut sigma = Vec::with_capacity(k_max + 1);
    sigma.push(Rational::one());
    let inv_two_w = (w * BigInt::from(2)).recip();
    for j in 0..k_max {
        let factor = Rational::from_integer(BigInt::from(1 + two_s + 2 * j as i64)) * &inv_two_w;
        let next = &sigma[j] * factor;
        sigma.push(next);
    }
    Ok(MomentTable { s_eff: s_eff.clone(), w: w.clone(), sigma, gamma_mass: gaussian_moment(two_s as u32, w) })
}

impl MomentTable {
    pub fn k_max(&self) -> usize {
        self.sigma.len() - 1
    }

    /// Grows the table so that σ₂ₖ is available for k ≤ `k_max`.
    pub fn extend_to(&mut self, k_max: usize) {
        let two_s = twice_as_integer(&self.s_eff).expect("validated at construction");
        let inv_two_w = (&self.w * BigInt::from(2)).recip();
        while self.sigma.len() <= k_max {
            let j = self.sigma.len() - 1;
            let factor = Rational::from_integer(BigInt::from(1 + two_s + 2 * j as i64)) * &inv_two_w;
            let next = &self.sigma[j] * factor;
            self.sigma.push(next);
        }
    }

    pub fn sigma(&self, k: usize) -> &Rational {
        &self.sigma[k]
    }

    /// ∫₀^∞ γ(z) z^{2k} dz.
    pub fn moment(&self, k: usize) -> Surd {
        self.gamma_mass.scale(&self.sigma[k])
    }

    /// σ₂₍ₙ₊₁₎ − (−dσ₂ₙ/dw + σ₂ₙσ₂); σ₂ₙ ∝ w^{−n} so −dσ₂ₙ/dw = nσ₂ₙ/w.
    pub fn derivative_recursion_residual(&self, n: usize) -> Rational {
        let d = &self.sigma[n] * Rational::from_integer(BigInt::from(n)) / &self.w;
        &self.sigma[n + 1] - (d + &self.sigma[n] * &self.sigma[1])
    }
}

pub fn eigenvalue(n: u32, params: &ModelParams) -> Rational {
    let w = params.w();
    w * Rational::from_integer(BigInt::from(4 * n as i64 + params.one_plus_two_s()))
}

/// An unnormalized eigenstate ξₙ = e^{−wz²/2} z^s Pₙ(z) with a₂ = 1.
#[derive(Clone, Debug, PartialEq)]
pub struct OneVarState {
    pub n: u32,
    pub s: Rational,
    pub w: Rational,
    /// a₂ₖ for k = 1..=n (index k − 1).
    pub coeffs: Vec<Rational>,
    /// Pₙ in powers of z²: `poly[k]` multiplies z^{2k}; `poly[0]` = −Σ a₂ₖσ₂ₖ.
    pub poly: Vec<Rational>,
    pub mu: Rational,
}

/// Coefficients a₂ₖ from the two-term recursion, a₂ = 1.
pub fn recursion_coefficients(n: u32, params: &ModelParams) -> Vec<Rational> {
    let w = params.w();
    let c = params.one_plus_two_s();
    let mut coeffs = Vec::with_capacity(n as usize);
    if n == 0 {
        return coeffs;
    }
    coeffs.push(Rational::one());
    for k in 1..n as i64 {
        let num = w * BigInt::from(2 * (k - n as i64));
        let den = BigInt::from((k + 1) * (c + 2 * k));
        let next = &coeffs[(k - 1) as usize] * num / Rational::from_integer(den);
        coeffs.push(next);
    }
    coeffs
}

/// z⁰ row of the coefficient hierarchy with η = 4wn: 2(1+2s)a₂ − η Σ a₂ₖσ₂ₖ.
pub fn first_row_residual(coeffs: &[Rational], n: u32, params: &ModelParams, sigma: &MomentTable) -> Rational {
    if n == 0 {
        return Rational::zero();
    }
    let lhs = Rational::from_integer(BigInt::from(2 * params.one_plus_two_s())) * &coeffs[0];
    let sum = coeffs.iter().enumerate().fold(Rational::zero(), |acc, (i, a)| acc + a * sigma.sigma(i + 1));
    let eta = params.w() * BigInt::from(4 * n as i64);
    lhs - eta * sum
}

pub fn eigenstate(n: u32, params: &ModelParams) -> Result<OneVarState> {
    let sigma = moments(params.s(), params.w(), n as usize)?;
    eigenstate_with(n, params, &sigma)
}

/// As [`eigenstate`], reusing a moment table with `k_max ≥ n`.
pub fn eigenstate_with(n: u32, params: &ModelParams, sigma: &MomentTable) -> Result<OneVarState> {
    if sigma.k_max() < n as usize || sigma.s_eff != *params.s() || sigma.w != *params.w() {
        return Err(Error::Domain("moment table does not match the requested state".into()));
    }
    let coeffs = recursion_coefficients(n, params);
    let residual = first_row_residual(&coeffs, n, params, sigma);
    if !residual.is_zero() {
        return Err(Error::InternalConsistency(format!("first-row equation fails for n={n}: residual {residual}")));
    }
    let mut poly = Vec::with_capacity(n as usize + 1);
    if n == 0 {
        poly.push(Rational::one());
    } else {
        let constant = coeffs.iter().enumerate().fold(Rational::zero(), |acc, (i, a)| acc - a * sigma.sigma(i + 1));
        poly.push(constant);
        poly.extend(coeffs.iter().cloned());
    }
    Ok(OneVarState { n, s: params.s().clone(), w: params.w().clone(), coeffs, poly, mu: eigenvalue(n, params) })
}

/// States 0..=n_max sharing one moment table.
pub fn eigenstates(n_max: u32, params: &ModelParams) -> Result<Vec<OneVarState>> {
    let sigma = moments(params.s(), params.w(), n_max as usize)?;
    (0..=n_max).map(|n| eigenstate_with(n, params, &sigma)).collect()
}

impl OneVarState {
    pub fn degree(&self) -> u32 {
        2 * (self.poly.len() as u32 - 1)
    }

    /// Pₙ(z) in high precision.
    pub fn eval_poly(&self, z: &HiPrec) -> HiPrec {
        let bits = z.precision();
        let z2 = z * z;
        self.poly.iter().rev().fold(HiPrec::zero(bits), |acc, c| &(&acc * &z2) + &HiPrec::from_rational(c, bits))
    }

    /// Pₙ'(z) in high precision.
    pub fn eval_poly_derivative(&self, z: &HiPrec) -> HiPrec {
        let bits = z.precision();
        let z2 = z * z;
        let mut acc = HiPrec::zero(bits);
        for (k, c) in self.poly.iter().enumerate().skip(1).rev() {
            let term = HiPrec::from_rational(&(c * BigInt::from(2 * k)), bits);
            acc = &(&acc * &z2) + &term;
        }
        &acc * z
    }
}

/// ξₙ(z) at high precision.
pub fn evaluate_xi_hiprec(state: &OneVarState, z: &HiPrec) -> Result<HiPrec> {
    if z.is_negative() || z.is_zero() {
        return Err(Error::Domain("xi is defined for z > 0".into()));
    }
    let bits = z.precision();
    let w = HiPrec::from_rational(&state.w, bits);
    let gauss = (-(&(&w * z) * z).div_i64(2)).exp();
    let two_s = twice_as_integer(&state.s).expect("half-odd s") as u32;
    let z_s = z.powi(two_s).sqrt();
    Ok(&(&gauss * &z_s) * &state.eval_poly(z))
}

pub fn evaluate_xi(state: &OneVarState, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("xi is defined for finite z > 0, got {z}")));
    }
    Ok(evaluate_xi_hiprec(state, &HiPrec::from_f64(z, 128))?.to_f64())
}

/// 1 − u − Σ_{k=2}^{u} (−1)^{k−1} C(u,k).
pub fn binomial_identity_residual(u: u64) -> BigInt {
    let row = binomial_row(u);
    let mut acc = BigInt::from(1) - BigInt::from(u);
    for (k, c) in row.iter().enumerate().skip(2) {
        if k % 2 == 0 {
            acc += c;
        } else {
            acc -= c;
        }
    }
    acc
}

/// Σ_{k=0}^{u} (−1)^k C(u,k).
pub fn alternating_binomial_sum(u: u64) -> BigInt {
    binomial_row(u).iter().enumerate().fold(BigInt::zero(), |acc, (k, c)| if k % 2 == 0 { acc + c } else { acc - c })
}

/// Lowest `k_eigs` eigenvalues of the second-order finite-difference discretization with
/// Dirichlet ends at `z_min` and `z_max`, found by Sturm-sequence bisection.
pub fn fd_oracle_spectrum(
    params: &ModelParams,
    grid_points: usize,
    z_min: f64,
    z_max: f64,
    k_eigs: usize,
) -> Result<Vec<f64>> {
    fd_oracle_spectrum_scaled(params, grid_points, z_min, z_max, k_eigs, 1.0)
}

/// As [`fd_oracle_spectrum`] with the kinetic term −κ d²/dz².
pub fn fd_oracle_spectrum_scaled(
    params: &ModelParams,
    grid_points: usize,
    z_min: f64,
    z_max: f64,
    k_eigs: usize,
    kinetic_scale: f64,
) -> Result<Vec<f64>> {
    if grid_points < 200 {
        return Err(Error::Validation(format!("grid_points must be at least 200, got {grid_points}")));
    }
    if !(z_min > 0.0 && z_max > z_min && z_max.is_finite()) {
        return Err(Error::Validation(format!("need 0 < z_min < z_max, got {z_min}, {z_max}")));
    }
    if k_eigs == 0 || k_eigs > grid_points {
        return Err(Error::Validation(format!("k_eigs must be in 1..={grid_points}")));
    }
    if !(kinetic_scale > 0.0) {
        return Err(Error::Validation("kinetic scale must be positive".into()));
    }
    let w = params.w_f64();
    if !(w > 0.0) {
        return Err(Error::Validation("w must be positive".into()));
    }
    let q = params.q().to_f64().unwrap_or(f64::NAN);
    let h = (z_max - z_min) / (grid_points as f64 + 1.0);
    let off = -kinetic_scale / (h * h);
    let diag: Vec<f64> = (1..=grid_points)
        .map(|i| {
            let z = z_min + i as f64 * h;
            2.0 * kinetic_scale / (h * h) + q / (z * z) + w * w * z * z
        })
        .collect();
    let off2 = off * off;
    // Number of eigenvalues strictly below x.
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for &a in &diag[1..] {
            let prev = if d == 0.0 { f64::EPSILON * off.abs() } else { d };
            d = a - x - off2 / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let lo_bound = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * off.abs();
    let hi_bound = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off.abs();
    let mut eigs = Vec::with_capacity(k_eigs);
    for k in 0..k_eigs {
        let (mut lo, mut hi) = (lo_bound.min(0.0), hi_bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * hi.abs().max(1.0) {
                break;
            }
        }
        eigs.push(0.5 * (lo + hi));
    }
    Ok(eigs)
}

/// Oracle eigenvalues together with refinement diagnostics.
#[derive(Clone, Debug)]
pub struct FdOracleReport {
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues on the doubled grid.
    pub refined: Vec<f64>,
    /// Eigenvalues with `z_min` halved.
    pub halved_z_min: Vec<f64>,
    /// log2 of successive error ratios against the exact values (observed order).
    pub observed_order: Vec<f64>,
}

/// Runs the oracle on `grid_points` and `2·grid_points` and with `z_min/2`; fails if any
/// eigenvalue moves by more than `rel_tol` relative.
pub fn fd_oracle_checked(
    params: &ModelParams,
    grid_points: usize,
    z_min: f64,
    z_max: f64,
    k_eigs: usize,
    rel_tol: f64,
) -> Result<FdOracleReport> {
    let coarse = fd_oracle_spectrum(params, grid_points, z_min, z_max, k_eigs)?;
    let fine = fd_oracle_spectrum(params, 2 * grid_points + 1, z_min, z_max, k_eigs)?;
    let halved = fd_oracle_spectrum(params, grid_points, z_min / 2.0, z_max, k_eigs)?;
    for i in 0..k_eigs {
        for (label, other) in [("grid refinement", fine[i]), ("z_min halving", halved[i])] {
            let change = (other - coarse[i]).abs() / coarse[i].abs().max(1e-300);
            if change > rel_tol {
                return Err(Error::Convergence {
                    what: format!("finite-difference eigenvalue {i} under {label}"),
                    last_change: change,
                    tolerance: rel_tol,
                });
            }
        }
    }
    let observed_order = (0..k_eigs)
        .map(|i| {
            let exact = eigenvalue(i as u32, params).to_f64().unwrap_or(f64::NAN);
            ((coarse[i] - exact).abs() / (fine[i] - exact).abs()).log2()
        })
        .collect();
    Ok(FdOracleReport { eigenvalues: coarse, refined: fine, halved_z_min: halved, observed_order })
}

/// One row of `spectrum.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    pub n: u32,
    pub mu_exact: Rational,
    pub mu_float: f64,
    pub coeff_k: u32,
    pub coeff_value: Rational,
}

/// Rows for n = 0..=n_max, one per polynomial coefficient of z^{2k} in Pₙ.
pub fn spectrum_rows(n_max: u32, params: &ModelParams) -> Result<Vec<SpectrumRow>> {
    let mut rows = Vec::new();
    for st in eigenstates(n_max, params)? {
        let mu_float = st.mu.to_f64().unwrap_or(f64::NAN);
        for (k, c) in st.poly.iter().enumerate() {
            rows.push(SpectrumRow {
                n: st.n,
                mu_exact: st.mu.clone(),
                mu_float,
                coeff_k: k as u32,
                coeff_value: c.clone(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;
    use crate::numerics::exact::int;

    fn params(s: Rational, w: Rational) -> ModelParams {
        make_params(&s, &w, 1, &rat(1, 1000)).unwrap()
    }

    #[test]
    fn moment_examples() {
        let t = moments(&rat(3, 2), &int(1), 2).unwrap();
        assert_eq!(t.sigma(1).clone(), int(2));
        assert_eq!(t.sigma(2).clone(), int(6));
        assert_eq!(t.gamma_mass, Surd::rational(rat(1, 2)));
        let t = moments(&rat(3, 2), &int(2), 1).unwrap();
        assert_eq!(t.sigma(1).clone(), int(1));
        assert!(moments(&rat(1, 3), &int(1), 1).is_err());
    }

    #[test]
    fn moment_recursion_and_mass() {
        for s2 in [3i64, 4, 5, 8] {
            let t = moments(&rat(s2, 2), &rat(3, 7), 30).unwrap();
            for n in 0..30 {
                assert!(t.derivative_recursion_residual(n).is_zero());
            }
            // mass = ½ w^{−(s+1/2)} Γ(s+1/2)
            let direct = gaussian_moment(s2 as u32, &rat(3, 7));
            assert_eq!(t.gamma_mass, direct);
        }
        let m = gaussian_moment(4, &int(1));
        assert_eq!(m, Surd::new(rat(3, 8), 1, int(1)));
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(0, &params(rat(3, 2), int(1))), int(4));
        assert_eq!(eigenvalue(2, &params(rat(3, 2), int(2))), int(24));
        let p = params(rat(5, 2), rat(1, 3));
        for n in 0..20 {
            assert_eq!(eigenvalue(n + 1, &p) - eigenvalue(n, &p), rat(4, 3));
        }
    }

    #[test]
    fn eigenstate_examples() {
        let p = params(rat(3, 2), int(1));
        let s1 = eigenstate(1, &p).unwrap();
        assert_eq!(s1.poly, vec![int(-2), int(1)]);
        let s2 = eigenstate(2, &p).unwrap();
        assert_eq!(&s2.coeffs[1] / &s2.coeffs[0], rat(-1, 6));
        let s0 = eigenstate(0, &p).unwrap();
        assert_eq!(s0.poly, vec![int(1)]);
        assert_eq!(s0.mu, int(4));
        assert_eq!(s2.degree(), 4);
    }

    #[test]
    fn first_row_equation_holds() {
        for (s, w) in [(rat(3, 2), int(1)), (rat(7, 2), rat(2, 3))] {
            let p = params(s, w);
            let states = eigenstates(60, &p).unwrap();
            assert_eq!(states.len(), 61);
        }
    }

    #[test]
    fn identity_sums_vanish() {
        for u in 1..=120 {
            assert!(binomial_identity_residual(u).is_zero(), "u={u}");
            assert!(alternating_binomial_sum(u).is_zero(), "u={u}");
        }
        assert_eq!(alternating_binomial_sum(0), BigInt::one());
    }

    #[test]
    fn xi_values() {
        let p = params(rat(3, 2), int(1));
        let s0 = eigenstate(0, &p).unwrap();
        assert!((evaluate_xi(&s0, 1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        let s1 = eigenstate(1, &p).unwrap();
        assert!(evaluate_xi(&s1, 2f64.sqrt()).unwrap().abs() < 1e-14);
        assert!(evaluate_xi(&s1, 3.0).unwrap() > 0.0);
        assert!(evaluate_xi(&s1, 0.0).is_err());
        assert!(evaluate_xi(&s1, -1.0).is_err());
    }

    #[test]
    fn xi_solves_the_equation() {
        // Residual of −ξ'' + (q/z² + w²z²)ξ − μξ by central differences.
        let p = params(rat(5, 2), rat(1, 2));
        let st = eigenstate(3, &p).unwrap();
        let mu = st.mu.to_f64().unwrap();
        let q = p.q().to_f64().unwrap();
        let w = p.w_f64();
        let h = 1e-4;
        for &z in &[0.5, 1.3, 2.2, 3.1] {
            let f = |x: f64| evaluate_xi(&st, x).unwrap();
            let d2 = (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h);
            let res = -d2 + (q / (z * z) + w * w * z * z - mu) * f(z);
            let scale = mu * f(z).abs().max(1e-3);
            assert!(res.abs() < 1e-4 * scale, "z={z} res={res}");
        }
    }

    #[test]
    fn fd_oracle_matches_low_levels() {
        let p = params(rat(3, 2), int(1));
        let e = fd_oracle_spectrum(&p, 4000, 1e-3, 10.0, 2).unwrap();
        assert!((e[0] - 4.0).abs() < 1e-3, "{e:?}");
        assert!((e[1] - 8.0).abs() < 1e-2, "{e:?}");
        assert!(fd_oracle_spectrum(&p, 100, 1e-3, 10.0, 2).is_err());
        assert!(fd_oracle_spectrum(&p, 400, 0.0, 10.0, 2).is_err());
    }

    #[test]
    fn fd_oracle_second_order() {
        let p = params(rat(3, 2), int(1));
        let rep = fd_oracle_checked(&p, 1000, 1e-3, 10.0, 3, 1e-3).unwrap();
        for order in rep.observed_order {
            assert!((order - 2.0).abs() < 0.3, "{order}");
        }
    }

    #[test]
    fn spectrum_rows_layout() {
        let p = params(rat(3, 2), int(1));
        let rows = spectrum_rows(3, &p).unwrap();
        assert_eq!(rows.len(), 1 + 2 + 3 + 4);
        assert_eq!(rows[0].coeff_value, int(1));
        assert_eq!(rows[1].n, 1);
        assert_eq!(rows[1].coeff_value, int(-2));
    }

    mod props {
        use super::*;
        use crate::numerics::exact::rat;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn eigenvalues_follow_closed_form(t in 1i64..5, wn in 1i64..20, wd in 1i64..20, n in 0u32..12) {
                let p = make_params(&rat(2 * t + 1, 2), &rat(wn, wd), 1, &rat(1, 100)).unwrap();
                let st = eigenstate(n, &p).unwrap();
                let expect = p.w() * BigInt::from(4 * n as i64) + p.w() * BigInt::from(2 * t + 2);
                prop_assert_eq!(&st.mu, &expect);
                prop_assert_eq!(st.degree(), 2 * n);
            }
        }
    }
}
