//! Exact matrix elements ⟨ξ_u|K|ξ_v⟩ between one-variable eigenstates.
//!
//! Every integrand has the form e^{−wz²} z^{2s} × (Laurent polynomial in z), so each element is a
//! finite rational combination of Gaussian moments and therefore a [`Surd`].

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::exact::{binomial_row, factorial, rat, sum_rationals, Rational};
use crate::numerics::quadrature::{halfline_weighted_quadrature_with, HalflineOptions};
use crate::numerics::{Base, HiPrec, Surd};
use crate::oscseries::{c_of_s_base_two, s1_direct, s2_direct, s3_direct};
use crate::spectrum::{eigenstates, gaussian_moment, OneVarState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Identity,
    Z,
    ZSquared,
    ZInverse,
    DDz,
}

impl Kernel {
    pub const ALL: [Kernel; 5] = [Kernel::Identity, Kernel::Z, Kernel::ZSquared, Kernel::ZInverse, Kernel::DDz];

    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Identity => "identity",
            Kernel::Z => "z",
            Kernel::ZSquared => "z_squared",
            Kernel::ZInverse => "z_inverse",
            Kernel::DDz => "d_dz",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "1" => Ok(Kernel::Identity),
            "z" => Ok(Kernel::Z),
            "z_squared" | "z2" => Ok(Kernel::ZSquared),
            "z_inverse" | "zinv" => Ok(Kernel::ZInverse),
            "d_dz" | "ddz" => Ok(Kernel::DDz),
            other => Err(Error::Parse(format!(
                "unknown kernel {other:?}; expected identity, z, z_squared, z_inverse or d_dz"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MomentAlgebra,
    Quadrature,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MomentAlgebra => "moment_algebra",
            Method::Quadrature => "quadrature",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moment_algebra" | "moments" | "exact" => Ok(Method::MomentAlgebra),
            "quadrature" => Ok(Method::Quadrature),
            other => Err(Error::Parse(format!("unknown method {other:?}; expected moment_algebra or quadrature"))),
        }
    }
}

/// Σ_j c_j z^{offset + 2j}.
#[derive(Clone, Debug, PartialEq)]
struct Laurent {
    offset: i64,
    coeffs: Vec<Rational>,
}

impl Laurent {
    fn times_even(&self, poly: &[Rational]) -> Laurent {
        let mut out = vec![Rational::zero(); self.coeffs.len() + poly.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in poly.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Laurent { offset: self.offset, coeffs: out }
    }
}

/// K applied to a state polynomial, with the z^s e^{−wz²/2} prefactor stripped.
fn apply_kernel(kernel: Kernel, state: &OneVarState) -> Laurent {
    let b = &state.poly;
    match kernel {
        Kernel::Identity => Laurent { offset: 0, coeffs: b.clone() },
        Kernel::Z => Laurent { offset: 1, coeffs: b.clone() },
        Kernel::ZSquared => Laurent { offset: 2, coeffs: b.clone() },
        Kernel::ZInverse => Laurent { offset: -1, coeffs: b.clone() },
        Kernel::DDz => {
            // (−wz + s/z)P + P', collected on z^{2j−1}: (s + 2j) b_j − w b_{j−1}.
            let coeffs = (0..=b.len())
                .map(|j| {
                    let mut c = Rational::zero();
                    if j < b.len() {
                        c += (&state.s + Rational::from_integer(BigInt::from(2 * j))) * &b[j];
                    }
                    if j >= 1 {
                        c -= &state.w * &b[j - 1];
                    }
                    c
                })
                .collect();
            Laurent { offset: -1, coeffs }
        }
    }
}

/// ∫₀^∞ e^{−wz²} z^{2s} L(z) dz, exactly.
fn weighted_integral(l: &Laurent, s: &Rational, w: &Rational) -> Result<Surd> {
    let two_s = (s * BigInt::from(2)).to_integer();
    let m0 = &two_s + BigInt::from(l.offset);
    if m0.is_negative() {
        return Err(Error::Domain(format!("moment z^{m0} is not integrable at the origin")));
    }
    let m0: u32 = u32::try_from(&m0).map_err(|_| Error::Domain("moment order too large".into()))?;
    let base = gaussian_moment(m0, w);
    // G(m+2) = G(m)(m+1)/(2w)
    let inv_two_w = (w * BigInt::from(2)).recip();
    let mut ratio = Rational::one();
    let mut terms = Vec::with_capacity(l.coeffs.len());
    for (j, c) in l.coeffs.iter().enumerate() {
        if !c.is_zero() {
            terms.push(c * &ratio);
        }
        ratio *= Rational::from_integer(BigInt::from(m0 as u64 + 2 * j as u64 + 1)) * &inv_two_w;
    }
    Ok(base.scale(&sum_rationals(&terms)))
}

fn check_kernel_domain(kernel: Kernel, s: &Rational) -> Result<()> {
    if matches!(kernel, Kernel::ZInverse | Kernel::DDz) && *s < rat(3, 2) {
        return Err(Error::Domain(format!(
            "{} needs s >= 3/2 so the boundary terms vanish, got s={s}",
            kernel.as_str()
        )));
    }
    Ok(())
}

/// Unnormalized ⟨ξ_u|K|ξ_v⟩ (a₂ = 1 convention) by moment algebra.
pub fn raw_element(bra: &OneVarState, kernel: Kernel, ket: &OneVarState) -> Result<Surd> {
    check_kernel_domain(kernel, &bra.s)?;
    let l = apply_kernel(kernel, ket).times_even(&bra.poly);
    weighted_integral(&l, &bra.s, &bra.w)
}

/// Raw ⟨ξ_u|K|ξ_v⟩ for every pair of `states`. Each ket is contracted once against the moment
/// ratios G(m₀+2k)/G(m₀), after which an element is a single dot product with the bra.
fn raw_matrix(states: &[OneVarState], kernel: Kernel) -> Result<Vec<Vec<Surd>>> {
    let Some(first) = states.first() else { return Ok(Vec::new()) };
    let (s, w) = (&first.s, &first.w);
    check_kernel_domain(kernel, s)?;
    let kets: Vec<Laurent> = states.iter().map(|st| apply_kernel(kernel, st)).collect();
    let offset = kets[0].offset;
    let m0 = (s * BigInt::from(2)).to_integer() + BigInt::from(offset);
    if m0.is_negative() {
        return Err(Error::Domain(format!("moment z^{m0} is not integrable at the origin")));
    }
    let m0: u64 = u64::try_from(&m0).map_err(|_| Error::Domain("moment order too large".into()))?;
    let base = gaussian_moment(m0 as u32, w);
    let bra_len = states.iter().map(|st| st.poly.len()).max().unwrap_or(0);
    let ket_len = kets.iter().map(|l| l.coeffs.len()).max().unwrap_or(0);
    let inv_two_w = (w * BigInt::from(2)).recip();
    let mut ratios = Vec::with_capacity(bra_len + ket_len);
    let mut r = Rational::one();
    for k in 0..bra_len + ket_len {
        ratios.push(r.clone());
        r *= Rational::from_integer(BigInt::from(m0 + 2 * k as u64 + 1)) * &inv_two_w;
    }
    let contracted: Vec<Vec<Rational>> = kets
        .par_iter()
        .map(|l| {
            (0..bra_len)
                .map(|i| {
                    let terms: Vec<Rational> = l
                        .coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| !c.is_zero())
                        .map(|(j, c)| c * &ratios[i + j])
                        .collect();
                    sum_rationals(&terms)
                })
                .collect()
        })
        .collect();
    Ok(states
        .par_iter()
        .map(|bra| {
            contracted
                .iter()
                .map(|h| {
                    let terms: Vec<Rational> = bra.poly.iter().zip(h).map(|(b, x)| b * x).collect();
                    base.scale(&sum_rationals(&terms))
                })
                .collect()
        })
        .collect())
}

/// ⟨ξ_u|ξ_u⟩ in O(u): P_u is orthogonal to every lower power of z², so only its leading
/// coefficient survives on the left.
pub fn norm_squared(state: &OneVarState) -> Rational {
    let n = state.poly.len() - 1;
    let lead = &state.poly[n];
    let l = Laurent { offset: 2 * n as i64, coeffs: state.poly.clone() };
    let v = weighted_integral(&l, &state.s, &state.w).expect("nonnegative moment order");
    debug_assert!(v.pi_half == 0 && v.root.is_one(), "odd moments are rational");
    lead * v.coeff
}

fn normalizer(nu: &Rational, nv: &Rational) -> Surd {
    Surd::new(Rational::one(), 0, (nu * nv).recip())
}

pub fn inner_product(u: u32, v: u32, params: &ModelParams) -> Result<Rational> {
    let states = eigenstates(u.max(v), params)?;
    let val = raw_element(&states[u as usize], Kernel::Identity, &states[v as usize])?;
    Ok(val.coeff)
}

pub fn z_matrix_element(u: u32, v: u32, params: &ModelParams) -> Result<Surd> {
    let states = eigenstates(u.max(v), params)?;
    raw_element(&states[u as usize], Kernel::Z, &states[v as usize])
}

pub fn ddz_matrix_element(u: u32, v: u32, params: &ModelParams) -> Result<Surd> {
    let states = eigenstates(u.max(v), params)?;
    raw_element(&states[u as usize], Kernel::DDz, &states[v as usize])
}

pub fn z_inverse_matrix_element(u: u32, v: u32, params: &ModelParams) -> Result<Surd> {
    let states = eigenstates(u.max(v), params)?;
    raw_element(&states[u as usize], Kernel::ZInverse, &states[v as usize])
}

#[derive(Clone, Debug)]
pub struct MatrixElementReport {
    pub u: u32,
    pub v: u32,
    pub kernel: Kernel,
    pub method: Method,
    /// Present for the moment-algebra method.
    pub raw_exact: Option<Surd>,
    pub normalized_exact: Option<Surd>,
    pub raw: HiPrec,
    pub normalized: HiPrec,
}

impl MatrixElementReport {
    pub fn exact_string(&self) -> String {
        self.normalized_exact.as_ref().map(Surd::describe).unwrap_or_default()
    }
}

/// Quadrature route: evaluate P_u·(K P_v) pointwise and integrate against e^{−wz²}z^{2s}.
fn quadrature_raw(bra: &OneVarState, kernel: Kernel, ket: &OneVarState, bits: usize) -> Result<HiPrec> {
    check_kernel_domain(kernel, &bra.s)?;
    let l = apply_kernel(kernel, ket);
    let eval = move |z: &HiPrec| {
        let z2 = z * z;
        let mut acc = HiPrec::zero(bits);
        for c in l.coeffs.iter().rev() {
            acc = &(&acc * &z2) + &HiPrec::from_rational(c, bits);
        }
        match l.offset {
            0 => acc,
            1 => &acc * z,
            2 => &acc * &z2,
            -1 => &acc / z,
            _ => unreachable!("kernels shift by at most two powers"),
        }
    };
    let opts = HalflineOptions { bits, degree_hint: 2 * (bra.n + ket.n) + 3, ..HalflineOptions::default() };
    let digits = ((bits as f64) * std::f64::consts::LOG10_2 * 0.6) as u32;
    halfline_weighted_quadrature_with(|z| &bra.eval_poly(z) * &eval(z), &bra.s, &bra.w, digits, &opts)
}

pub fn matrix_element(
    u: u32,
    v: u32,
    kernel: Kernel,
    params: &ModelParams,
    method: Method,
    bits: usize,
) -> Result<MatrixElementReport> {
    let states = eigenstates(u.max(v), params)?;
    let (bra, ket) = (&states[u as usize], &states[v as usize]);
    let norm = normalizer(&norm_squared(bra), &norm_squared(ket));
    let (raw_exact, normalized_exact, raw) = match method {
        Method::MomentAlgebra => {
            let raw = raw_element(bra, kernel, ket)?;
            let normalized = raw.mul(&norm);
            let hp = raw.to_hiprec(bits);
            (Some(raw), Some(normalized), hp)
        }
        Method::Quadrature => (None, None, quadrature_raw(bra, kernel, ket, bits)?),
    };
    let normalized = match &normalized_exact {
        Some(x) => x.to_hiprec(bits),
        None => &raw * &norm.to_hiprec(bits),
    };
    Ok(MatrixElementReport { u, v, kernel, method, raw_exact, normalized_exact, raw, normalized })
}

/// Normalized z, z² and d/dz elements between the states 0..=n_max, shared by the many-body layer.
///
/// Floating tables come from the Laguerre form ξ̂_u = σ_u√(2w^{s+1/2}) z^s e^{−wz²/2} ℓ_u(wz²), with
/// ℓ_u the orthonormal Laguerre polynomials of order t and σ₀ = 1, σ_u = −1 otherwise:
/// - expanding ℓ^{(t)} in L^{(t+1/2)} turns z into Σ_k c_{u−k}c_{v−k}Γ(k+t+3/2)/k! with c_j = (−1/2)_j/j!;
/// - z² = x/w is tridiagonal;
/// - [H, z] = −2∂ gives ⟨u|∂|v⟩ = −2w(u−v)⟨u|z|v⟩.
///
/// Exact values are produced on demand by moment algebra.
#[derive(Clone, Debug)]
pub struct ElementTable {
    pub params: ModelParams,
    pub n_max: u32,
    z_f64: Vec<Vec<f64>>,
    z2_f64: Vec<Vec<f64>>,
    d_f64: Vec<Vec<f64>>,
    exact: std::sync::OnceLock<(Vec<OneVarState>, Vec<Rational>)>,
}

impl ElementTable {
    pub fn new(params: &ModelParams, n_max: u32) -> Result<Self> {
        check_kernel_domain(Kernel::DDz, params.s())?;
        let n = n_max as usize + 1;
        let t = params.t() as f64;
        let w = params.w_f64();
        let sigma = |u: usize| if u == 0 { 1.0 } else { -1.0 };
        let mut c = vec![1.0; n];
        let mut rho = vec![std::f64::consts::PI.sqrt() / 2.0; n];
        let mut q = vec![1.0; n];
        for j in 1..=params.t() {
            rho[0] *= (j as f64 + 0.5) / j as f64;
        }
        for k in 1..n {
            let kf = k as f64;
            c[k] = c[k - 1] * (kf - 1.5) / kf;
            rho[k] = rho[k - 1] * (kf + t + 0.5) / (kf + t);
            q[k] = q[k - 1] * (kf / (kf + t)).sqrt();
        }
        let scale = 1.0 / w.sqrt();
        let z_f64: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|u| {
                (0..n)
                    .map(|v| {
                        let sum: f64 = (0..=u.min(v)).map(|k| c[u - k] * c[v - k] * rho[k] / (q[k] * q[k])).sum();
                        sigma(u) * sigma(v) * scale * q[u] * q[v] * sum
                    })
                    .collect()
            })
            .collect();
        let z2_f64 = (0..n)
            .map(|u| {
                (0..n)
                    .map(|v| {
                        let (lo, hi) = (u.min(v) as f64, u.max(v));
                        if u == v {
                            (2.0 * lo + t + 1.0) / w
                        } else if hi - u.min(v) == 1 {
                            -sigma(u) * sigma(v) * ((lo + 1.0) * (lo + t + 1.0)).sqrt() / w
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let d_f64 = (0..n).map(|u| (0..n).map(|v| -2.0 * w * (u as f64 - v as f64) * z_f64[u][v]).collect()).collect();
        Ok(ElementTable { params: params.clone(), n_max, z_f64, z2_f64, d_f64, exact: Default::default() })
    }

    /// ⟨ξ̂_u|z|ξ̂_v⟩
    pub fn z(&self, u: u32, v: u32) -> f64 {
        self.z_f64[u as usize][v as usize]
    }

    /// ⟨ξ̂_u|z²|ξ̂_v⟩
    pub fn z2(&self, u: u32, v: u32) -> f64 {
        self.z2_f64[u as usize][v as usize]
    }

    /// ⟨ξ̂_u|∂_z|ξ̂_v⟩
    pub fn d(&self, u: u32, v: u32) -> f64 {
        self.d_f64[u as usize][v as usize]
    }

    fn exact_states(&self) -> &(Vec<OneVarState>, Vec<Rational>) {
        self.exact.get_or_init(|| {
            let states = eigenstates(self.n_max, &self.params).expect("parameters validated at construction");
            let norms = states.par_iter().map(norm_squared).collect();
            (states, norms)
        })
    }

    /// Exact ⟨ξ̂_u|z|ξ̂_v⟩ by moment algebra.
    pub fn z_exact(&self, u: u32, v: u32) -> Surd {
        let (states, norms) = self.exact_states();
        let (u, v) = (u as usize, v as usize);
        raw_element(&states[u], Kernel::Z, &states[v])
            .expect("z is defined for every admissible s")
            .mul(&normalizer(&norms[u], &norms[v]))
    }

    /// Exact ⟨ξ̂_u|∂_z|ξ̂_v⟩ = −2w(u−v)⟨ξ̂_u|z|ξ̂_v⟩.
    pub fn d_exact(&self, u: u32, v: u32) -> Surd {
        if u == v {
            return Surd::zero();
        }
        let k = self.params.w() * BigInt::from(-2 * (u as i64 - v as i64));
        self.z_exact(u, v).scale(&k)
    }
}

/// Raw ⟨ξ_u|K|ξ_v⟩ for all u, v ≤ n_max by moment algebra.
pub fn raw_element_matrix(params: &ModelParams, n_max: u32, kernel: Kernel) -> Result<Vec<Vec<Surd>>> {
    raw_matrix(&eigenstates(n_max, params)?, kernel)
}

#[derive(Clone, Debug, Serialize)]
pub struct ZDecayRow {
    pub u: u32,
    /// ⟨ξ̂_u|z|ξ̂₀⟩
    pub value: f64,
    pub u_times_value: f64,
    #[serde(skip)]
    pub exact: Surd,
    /// ⟨ξ_u|ξ_u⟩ in the a₂ = 1 convention.
    pub norm_squared: f64,
}

/// Exact ⟨ξ̂_u|z|ξ̂₀⟩ for each u; with P₀ = 1 each element costs O(u).
pub fn theorem2_sequence(params: &ModelParams, u_list: &[u32]) -> Result<Vec<ZDecayRow>> {
    if u_list.windows(2).any(|p| p[0] >= p[1]) || u_list.first() == Some(&0) {
        return Err(Error::Validation("u_list must be increasing positive integers".into()));
    }
    let u_max = u_list.last().copied().unwrap_or(0);
    let states = eigenstates(u_max, params)?;
    let n0 = norm_squared(&states[0]);
    u_list
        .par_iter()
        .map(|&u| {
            let st = &states[u as usize];
            let nu = norm_squared(st);
            let exact = raw_element(st, Kernel::Z, &states[0])?.mul(&normalizer(&nu, &n0));
            let value = exact.to_f64();
            Ok(ZDecayRow {
                u,
                value,
                u_times_value: u as f64 * value,
                exact,
                norm_squared: crate::numerics::exact::to_f64(&nu),
            })
        })
        .collect()
}

/// ⟨ξ̂_u|z|ξ̂₀⟩ for u = 0..=u_max from the exact u = 1 value and the ratio
/// m_{u+1}/m_u = (u − 1/2)/√((u+1)(u+t+1)), which follows from the Laguerre form of ξ_u.
/// Reaches u ~ 10⁴ where exact evaluation is too slow.
pub fn z_hat_column_recurrence(params: &ModelParams, u_max: u32) -> Result<Vec<f64>> {
    let states = eigenstates(1, params)?;
    let n0 = norm_squared(&states[0]);
    let n1 = norm_squared(&states[1]);
    let m0 = raw_element(&states[0], Kernel::Z, &states[0])?.mul(&normalizer(&n0, &n0)).to_f64();
    let mut out = vec![m0];
    if u_max == 0 {
        return Ok(out);
    }
    let mut m = raw_element(&states[1], Kernel::Z, &states[0])?.mul(&normalizer(&n1, &n0)).to_f64();
    out.push(m);
    let t = params.t() as f64;
    for u in 1..u_max {
        let uf = u as f64;
        m *= (uf - 0.5) / ((uf + 1.0) * (uf + t + 1.0)).sqrt();
        out.push(m);
    }
    Ok(out)
}

/// The denominator ⟨ξ_u|ξ_u⟩ rebuilt from S₃, next to the printed assembly.
#[derive(Clone, Debug)]
pub struct DenominatorAssembly {
    pub u: u32,
    /// ∫e^{−wz²}z^{2s}dz · t! ((1+2s)/(2wu))² S₃, which equals ⟨ξ_u|ξ_u⟩.
    pub s3_part: Rational,
    pub j0: Rational,
    pub j1: Rational,
    /// d₀(s)⁻¹((1+2s)/2w)²/(s+1/2), the constant carried by the printed formula.
    pub constant_part: Rational,
    /// d₀(s)⁻¹ t!/(2w(1+2s)u)² [S₃ − J₀ − J₁] + constant_part, as printed.
    pub printed_value: Rational,
    pub value: Rational,
    /// Direct moment algebra, for comparison.
    pub direct: Rational,
}

/// J₀ = 2Σ(−1)^kC(u,k)/t! and J₁ = −2uΣ(−1)^kC(u,k)(t+k+1)/(t+1)!, the two alternating sums the
/// printed denominator subtracts from S₃.
pub fn denominator_j_terms(params: &ModelParams, u: u32) -> (Rational, Rational) {
    let t = params.t() as u64;
    let row = binomial_row(u as u64);
    let alt = |f: &dyn Fn(u64) -> BigInt| -> BigInt {
        row.iter().enumerate().fold(BigInt::zero(), |acc, (k, cb)| {
            let term = cb * f(k as u64);
            if k % 2 == 0 {
                acc + term
            } else {
                acc - term
            }
        })
    };
    let j0 = Rational::new(BigInt::from(2) * alt(&|_| BigInt::one()), factorial(t));
    let j1 = -Rational::new(BigInt::from(2 * u as u64) * alt(&|k| BigInt::from(t + k + 1)), factorial(t + 1));
    (j0, j1)
}

pub fn denominator_assembly(params: &ModelParams, u: u32) -> Result<DenominatorAssembly> {
    if u == 0 {
        return Err(Error::Domain("denominator assembly needs u >= 1".into()));
    }
    let t = params.t() as u64;
    let w = params.w();
    let c = Rational::from_integer(BigInt::from(params.one_plus_two_s()));
    let mass = weight_mass(params.s(), w)?;
    let s3 = s3_direct(u, t as u32)?;
    let (j0, j1) = denominator_j_terms(params, u);
    // J₁(1) = 2/(t+1)! because Σ(−1)^k C(u,k) k = −u·0^{u−1} only vanishes for u ≥ 2.
    if !j0.is_zero() || (u >= 2 && !j1.is_zero()) {
        return Err(Error::InternalConsistency(format!("J0={j0}, J1={j1} for u={u}")));
    }
    let t_fact = Rational::from_integer(factorial(t));
    let two_w_u = w * BigInt::from(2 * u as u64);
    let s3_part = &mass * &t_fact * (&c / &two_w_u) * (&c / &two_w_u) * &s3;
    let half = rat(1, 2);
    let constant_part = &mass * (&c / (w * BigInt::from(2))) * (&c / (w * BigInt::from(2))) / (params.s() + &half);
    let printed_den = &two_w_u * &c;
    let printed_value = &mass * &t_fact / (&printed_den * &printed_den) * (&s3 - &j0 - &j1) + &constant_part;
    let states = eigenstates(u, params)?;
    let direct = norm_squared(&states[u as usize]);
    Ok(DenominatorAssembly { u, value: s3_part.clone(), s3_part, j0, j1, constant_part, printed_value, direct })
}

/// ∫₀^∞ e^{−wz²} z^{2s} dz (rational for half-odd s).
fn weight_mass(s: &Rational, w: &Rational) -> Result<Rational> {
    let l = Laurent { offset: 0, coeffs: vec![Rational::one()] };
    let m = weighted_integral(&l, s, w)?;
    Ok(m.coeff)
}

/// Several routes to the numerator ⟨ξ_u|z|ξ₀⟩ (a₂ = 1).
#[derive(Clone, Debug)]
pub struct NumeratorRoutes {
    pub u: u32,
    /// Direct moment algebra.
    pub direct: Surd,
    /// d₀(s+1/2)⁻¹{Σ_{k≥2}(a₂ₖ/a₂)[σ₂ₖ(s+1/2) − σ₂ₖ(s)] + 1/(2w)}.
    pub moment_difference: Surd,
    /// The S₁/S₂ assembly with H(u), G(u) and C(s) in the given base.
    pub series_assembly: HiPrec,
    /// Exact series assembly for base 2.
    pub series_assembly_exact: Option<Surd>,
    /// Bracket E(u) of the series assembly: numerator = d₀(s+1/2)⁻¹ E(u)/(2w).
    pub bracket: HiPrec,
}

pub fn numerator_routes(params: &ModelParams, u: u32, base: Base, bits: usize) -> Result<NumeratorRoutes> {
    if u == 0 {
        return Err(Error::Domain("numerator routes need u >= 1".into()));
    }
    let states = eigenstates(u, params)?;
    let st = &states[u as usize];
    let direct = raw_element(st, Kernel::Z, &states[0])?;
    let s = params.s();
    let w = params.w();
    let half = rat(1, 2);
    let shifted = s + &half;
    let mass_shift = gaussian_moment((&shifted * BigInt::from(2)).to_integer().try_into().unwrap_or(0), w);

    let sig_s = crate::spectrum::moments(s, w, u as usize)?;
    let sig_sh = crate::spectrum::moments(&shifted, w, u as usize)?;
    let mut brace = (w * BigInt::from(2)).recip();
    for k in 2..=u as usize {
        brace += &st.coeffs[k - 1] * (sig_sh.sigma(k) - sig_s.sigma(k));
    }
    let moment_difference = mass_shift.scale(&brace);

    // E(u) = 1 − ((1+2s)/u){((2+2s)/(1+2s))H − G}, G = B − (1 − u), B = 0.
    let sh = HiPrec::from_rational;
    let one_2s = Rational::from_integer(BigInt::from(params.one_plus_two_s()));
    let two_2s = &one_2s + Rational::one();
    let two_s = &one_2s - Rational::one();
    let uq = Rational::from_integer(BigInt::from(u));
    let s1 = s1_direct(u, s, base, bits)?;
    let s2 = s2_direct(u, s, base, bits)?;
    let s1_low = s1_direct(1, s, base, bits)?;
    let s2_low = s2_direct(1, s, base, bits)?;
    // terms k = 0, 1 of S₁(u) and S₂(u): k = 1 carries C(u,1) = u instead of 1.
    let s1_t0 = s1_direct(0, s, base, bits)?;
    let low_s1 = |full_u1: &HiPrec, t0: &HiPrec| t0 + &(&(full_u1 - t0) * &sh(&uq, bits));
    let low1 = low_s1(&s1_low.value, &s1_t0.value);
    let low2 = &s2_low.value * &sh(&uq, bits);
    let g = sh(&(&uq - Rational::one()), bits);
    let (c_s, c_exact) = match base {
        Base::Two => {
            let c = c_of_s_base_two(s)?;
            (sh(&c, bits), Some(c))
        }
        Base::E => {
            let c = c_of_s_base_two(s)?;
            (&sh(&c, bits) * &(HiPrec::e(bits).powi(2).div_i64(4)), None)
        }
    };
    let two_s_h = sh(&two_s, bits);
    let h_full = &c_s * &(&(&two_s_h * &s1.value) + &s2.value.mul_i64(2));
    let h_low = &c_s * &(&(&two_s_h * &low1) + &low2.mul_i64(2));
    let h = &h_full - &h_low;
    let inner = &(&h * &sh(&(&two_2s / &one_2s), bits)) - &g;
    let bracket = &HiPrec::one(bits) - &(&sh(&(&one_2s / &uq), bits) * &inner);
    let pref = (w * BigInt::from(2)).recip();
    let series_assembly = &mass_shift.scale(&pref).to_hiprec(bits) * &bracket;
    let series_assembly_exact = match (&c_exact, &s1.exact, &s2.exact) {
        (Some(c), Some(e1), Some(e2)) => {
            // Same bookkeeping in exact arithmetic.
            let l1 = s1_t0.exact.clone().unwrap_or_default()
                + (s1_low.exact.clone().unwrap_or_default() - s1_t0.exact.clone().unwrap_or_default()) * &uq;
            let l2 = s2_low.exact.clone().unwrap_or_default() * &uq;
            let h = c * (&two_s * (e1 - &l1) + (e2 - &l2) * BigInt::from(2));
            let e = Rational::one() - (&one_2s / &uq) * (&h * (&two_2s / &one_2s) - (&uq - Rational::one()));
            Some(mass_shift.scale(&(pref.clone() * e)))
        }
        _ => None,
    };
    Ok(NumeratorRoutes { u, direct, moment_difference, series_assembly, series_assembly_exact, bracket })
}

/// u⁻¹ coefficient of the bracket as printed, 4(1+s)C(s)(2s−1)!/((s−1/2)!²) − 1 − 2s, and with
/// the factor s that the 2sC(s)S₁ term contributes, 4s(1+s)C(s)(2s−1)!/((s−1/2)!²) − 1 − 2s.
pub fn inverse_u_coefficient(s: &Rational, base: Base, bits: usize) -> Result<(HiPrec, HiPrec)> {
    let c2 = c_of_s_base_two(s)?;
    let t = (s - rat(1, 2)).to_integer();
    let t: u64 = u64::try_from(&t).map_err(|_| Error::Domain("s must be >= 1/2".into()))?;
    let a0 = Rational::new(factorial(2 * t), factorial(t) * factorial(t));
    let one_s = Rational::one() + s;
    let tail = Rational::one() + s * BigInt::from(2);
    let mut c = HiPrec::from_rational(&c2, bits);
    if base == Base::E {
        c = &c * &HiPrec::e(bits).powi(2).div_i64(4);
    }
    let common = &c * &HiPrec::from_rational(&(&one_s * &a0 * BigInt::from(4)), bits);
    let printed = &common - &HiPrec::from_rational(&tail, bits);
    let with_s = &(&common * &HiPrec::from_rational(s, bits)) - &HiPrec::from_rational(&tail, bits);
    Ok((printed, with_s))
}

/// One row of `matelem.csv`.
pub fn csv_fields(r: &MatrixElementReport) -> [String; 6] {
    [
        r.u.to_string(),
        r.v.to_string(),
        r.kernel.as_str().to_string(),
        format!("{}", r.normalized.to_f64()),
        r.exact_string(),
        r.method.as_str().to_string(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;
    use crate::numerics::exact::int;

    fn reference() -> ModelParams {
        ModelParams::reference()
    }

    fn sqrt_pi_coeff(x: &Surd) -> Rational {
        assert_eq!(x.pi_half, 1, "{}", x.describe());
        assert!(x.root.is_one());
        x.coeff.clone()
    }

    #[test]
    fn inner_product_examples() {
        let p = reference();
        assert_eq!(inner_product(0, 0, &p).unwrap(), rat(1, 2));
        assert_eq!(inner_product(1, 1, &p).unwrap(), int(1));
        assert!(inner_product(0, 1, &p).unwrap().is_zero());
    }

    #[test]
    fn orthogonality_up_to_60() {
        let p = reference();
        let gram = raw_element_matrix(&p, 60, Kernel::Identity).unwrap();
        for (u, row) in gram.iter().enumerate() {
            for (v, x) in row.iter().enumerate() {
                assert_eq!(x.is_zero(), u != v, "{u} {v}");
            }
        }
    }

    #[test]
    fn norm_fast_path_matches_full_product() {
        for p in [reference(), make_params(&rat(5, 2), &rat(3, 2), 1, &rat(1, 1000)).unwrap()] {
            let states = eigenstates(15, &p).unwrap();
            for st in &states {
                let full = raw_element(st, Kernel::Identity, st).unwrap();
                assert_eq!(full.coeff, norm_squared(st));
            }
        }
        // closed form 2/(u²(u+1)) at s = 3/2, w = 1
        let states = eigenstates(30, &reference()).unwrap();
        for u in 1..=30i64 {
            assert_eq!(norm_squared(&states[u as usize]), rat(2, u * u * (u + 1)));
        }
    }

    #[test]
    fn z_examples() {
        let p = reference();
        assert_eq!(sqrt_pi_coeff(&z_matrix_element(1, 0, &p).unwrap()), rat(3, 16));
        assert_eq!(sqrt_pi_coeff(&z_matrix_element(0, 0, &p).unwrap()), rat(3, 8));
        assert_eq!(z_matrix_element(1, 0, &p).unwrap(), z_matrix_element(0, 1, &p).unwrap());
    }

    #[test]
    fn ddz_examples() {
        let p = reference();
        assert_eq!(sqrt_pi_coeff(&ddz_matrix_element(1, 0, &p).unwrap()), rat(-3, 8));
        for u in 0..6 {
            assert!(ddz_matrix_element(u, u, &p).unwrap().is_zero());
            for v in 0..u {
                let a = ddz_matrix_element(u, v, &p).unwrap();
                let b = ddz_matrix_element(v, u, &p).unwrap();
                assert_eq!(a, b.neg());
            }
        }
        let half = make_params(&rat(1, 2), &int(1), 1, &rat(1, 1000));
        if let Ok(half) = half {
            assert!(matches!(ddz_matrix_element(1, 0, &half), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn moment_algebra_matches_quadrature() {
        let p = reference();
        for kernel in Kernel::ALL {
            for (u, v) in [(0u32, 0u32), (1, 0), (3, 2), (5, 0), (7, 4), (10, 10), (10, 9)] {
                let a = matrix_element(u, v, kernel, &p, Method::MomentAlgebra, 256).unwrap();
                let b = matrix_element(u, v, kernel, &p, Method::Quadrature, 256).unwrap();
                let diff = (&a.normalized - &b.normalized).abs().to_f64();
                let scale = a.normalized.abs().to_f64().max(1e-300);
                if a.normalized_exact.as_ref().unwrap().is_zero() {
                    assert!(diff < 1e-40, "{kernel:?} {u} {v}: {diff}");
                } else {
                    assert!(diff / scale < 1e-12, "{kernel:?} {u} {v}: {}", diff / scale);
                }
            }
        }
    }

    #[test]
    fn element_table_matches_moment_algebra() {
        for (s, w) in [(rat(3, 2), rat(1, 1)), (rat(5, 2), rat(2, 1)), (rat(7, 2), rat(1, 3))] {
            let p = make_params(&s, &w, 1, &rat(1, 100)).unwrap();
            let n = 24;
            let t = ElementTable::new(&p, n).unwrap();
            let states = eigenstates(n, &p).unwrap();
            let norms: Vec<Rational> = states.iter().map(norm_squared).collect();
            for (kernel, get) in [
                (Kernel::Z, ElementTable::z as fn(&ElementTable, u32, u32) -> f64),
                (Kernel::ZSquared, ElementTable::z2),
                (Kernel::DDz, ElementTable::d),
            ] {
                let raw = raw_matrix(&states, kernel).unwrap();
                for u in 0..=n {
                    for v in 0..=n {
                        let exact = raw[u as usize][v as usize]
                            .mul(&normalizer(&norms[u as usize], &norms[v as usize]))
                            .to_f64();
                        let got = get(&t, u, v);
                        assert!(
                            (got - exact).abs() < 1e-12 * (1.0 + exact.abs()),
                            "{s} {w} {kernel:?} {u} {v}: {got} vs {exact}"
                        );
                    }
                }
            }
            for (u, v) in [(0, 3), (5, 2), (4, 4)] {
                let direct = raw_element(&states[u as usize], Kernel::DDz, &states[v as usize])
                    .unwrap()
                    .mul(&normalizer(&norms[u as usize], &norms[v as usize]));
                assert_eq!(t.d_exact(u, v), direct);
            }
        }
    }

    #[test]
    fn element_table_is_consistent() {
        let p = reference();
        let t = ElementTable::new(&p, 4).unwrap();
        let expect = 3.0 / 16.0 * std::f64::consts::PI.sqrt() / 0.5f64.sqrt();
        assert!((t.z(1, 0) - expect).abs() < 1e-14);
        for u in 0..=4 {
            for v in 0..=4 {
                assert!((t.z(u, v) - t.z(v, u)).abs() < 1e-14);
                assert!((t.d(u, v) + t.d(v, u)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn z_element_first_row_and_decay() {
        let p = reference();
        let rows = theorem2_sequence(&p, &[1, 2, 64, 128]).unwrap();
        let expect = 3.0 / 16.0 * std::f64::consts::PI.sqrt() / 0.5f64.sqrt();
        assert!((rows[0].value - expect).abs() < 1e-14);
        // decays like u^{−2}, not u^{−1}
        let slope = (rows[3].value / rows[2].value).ln() / 2f64.ln();
        assert!((slope + 2.0).abs() < 0.05, "{slope}");
        assert!(theorem2_sequence(&p, &[3, 2]).is_err());
    }

    #[test]
    fn recurrence_matches_exact_column() {
        for p in [reference(), make_params(&rat(7, 2), &rat(2, 3), 1, &rat(1, 1000)).unwrap()] {
            let us: Vec<u32> = (1..=60).collect();
            let exact = theorem2_sequence(&p, &us).unwrap();
            let rec = z_hat_column_recurrence(&p, 60).unwrap();
            for row in &exact {
                let r = rec[row.u as usize];
                assert!((r - row.value).abs() <= 1e-12 * row.value.abs(), "u={} {r} {}", row.u, row.value);
            }
        }
    }

    #[test]
    fn denominator_assembly_matches_direct() {
        let p = reference();
        for u in 1..=25 {
            let d = denominator_assembly(&p, u).unwrap();
            assert!(d.j0.is_zero());
            assert_eq!(d.j1.is_zero(), u >= 2);
            assert_eq!(d.value, d.direct, "u={u}");
            assert_eq!(d.direct, rat(2, (u * u * (u + 1)) as i64));
        }
        let d1 = denominator_assembly(&p, 1).unwrap();
        assert_eq!(d1.constant_part, int(1));
        assert_eq!(d1.j1, int(1));
        assert_ne!(d1.printed_value, d1.direct);
        assert!(denominator_assembly(&p, 0).is_err());
        let q = make_params(&rat(5, 2), &rat(1, 3), 1, &rat(1, 1000)).unwrap();
        for u in 1..=10 {
            let d = denominator_assembly(&q, u).unwrap();
            assert_eq!(d.value, d.direct);
        }
    }

    #[test]
    fn numerator_routes_agree_in_base_two() {
        for p in [reference(), make_params(&rat(5, 2), &rat(1, 2), 1, &rat(1, 1000)).unwrap()] {
            for u in 1..=12 {
                let r = numerator_routes(&p, u, Base::Two, 192).unwrap();
                assert_eq!(r.direct, r.moment_difference, "u={u}");
                assert_eq!(r.series_assembly_exact.clone().unwrap(), r.direct, "u={u}");
            }
        }
        let r = numerator_routes(&reference(), 6, Base::E, 192).unwrap();
        let rel = ((&r.series_assembly - &r.direct.to_hiprec(192)).abs() / r.direct.to_hiprec(192).abs()).to_f64();
        assert!(rel > 1e-2, "{rel}");
    }

    #[test]
    fn bracket_loses_its_constant_term() {
        let p = reference();
        let vals: Vec<f64> = [8u32, 16, 32, 64]
            .iter()
            .map(|&u| numerator_routes(&p, u, Base::Two, 192).unwrap().bracket.to_f64() * u as f64)
            .collect();
        // u·E(u) stays bounded (and in fact decays)
        assert!(vals.windows(2).all(|w| w[1].abs() <= w[0].abs()), "{vals:?}");
    }

    #[test]
    fn inverse_u_coefficient_values() {
        let (printed, with_s) = inverse_u_coefficient(&rat(3, 2), Base::Two, 128).unwrap();
        assert!((printed.to_f64() + 4.0 / 3.0).abs() < 1e-30);
        assert!(with_s.is_zero());
        let (_, with_s_e) = inverse_u_coefficient(&rat(3, 2), Base::E, 128).unwrap();
        assert!(with_s_e.abs().to_f64() > 1e-2);
    }

    mod props {
        use super::*;
        use crate::numerics::exact::rat;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn table_symmetries(t in 1i64..5, wn in 1i64..9, wd in 1i64..9) {
                let p = make_params(&rat(2 * t + 1, 2), &rat(wn, wd), 1, &rat(1, 100)).unwrap();
                let table = ElementTable::new(&p, 12).unwrap();
                for u in 0..=12 {
                    for v in 0..=12 {
                        let scale = table.z(u, v).abs().max(1.0);
                        prop_assert!((table.z(u, v) - table.z(v, u)).abs() <= 1e-13 * scale);
                        prop_assert!((table.z2(u, v) - table.z2(v, u)).abs() <= 1e-13 * scale);
                        prop_assert!((table.d(u, v) + table.d(v, u)).abs() <= 1e-12 * scale * p.w_f64().max(1.0));
                        if u.abs_diff(v) > 1 {
                            prop_assert_eq!(table.z2(u, v), 0.0);
                        }
                    }
                }
            }
        }
    }
}
