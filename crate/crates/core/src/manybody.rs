//! Product eigenstates of H₀, the heavy-body coordinate X, BML partial sums, coefficient
//! ensembles and the dispersion of X.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::matelem::{z_hat_column_recurrence, ElementTable};
use crate::model::ModelParams;
use crate::numerics::exact::{to_f64, Rational};
use crate::rng;
use crate::spectrum::eigenvalue;

pub const DEFAULT_BASIS_CAP: usize = 20_000;

/// Excitation numbers of the N left and N right relative coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManyBodyIndex {
    pub l: Vec<u32>,
    pub r: Vec<u32>,
}

impl ManyBodyIndex {
    pub fn ground(n_bodies: u32) -> Self {
        ManyBodyIndex { l: vec![0; n_bodies as usize], r: vec![0; n_bodies as usize] }
    }

    /// L(1) = u, everything else 0.
    pub fn special(n_bodies: u32, u: u32) -> Self {
        let mut g = Self::ground(n_bodies);
        g.l[0] = u;
        g
    }

    pub fn n_bodies(&self) -> usize {
        self.l.len()
    }

    pub fn total_n(&self) -> u32 {
        self.l.iter().chain(&self.r).sum()
    }

    /// Slot i < N is L(i+1), slot N + i is R(i+1).
    pub fn slot(&self, i: usize) -> u32 {
        let n = self.l.len();
        if i < n {
            self.l[i]
        } else {
            self.r[i - n]
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = u32> + '_ {
        self.l.iter().chain(&self.r).copied()
    }

    fn from_slots(slots: &[u32]) -> Self {
        let n = slots.len() / 2;
        ManyBodyIndex { l: slots[..n].to_vec(), r: slots[n..].to_vec() }
    }

    fn slot_vec(&self) -> Vec<u32> {
        self.slots().collect()
    }

    pub fn differing_slots(&self, other: &ManyBodyIndex) -> Vec<usize> {
        self.slots().zip(other.slots()).enumerate().filter(|(_, (a, b))| a != b).map(|(i, _)| i).collect()
    }

    /// λ_LR = Σ μ_{L(k)} + Σ μ_{R(k)}.
    pub fn lambda(&self, params: &ModelParams) -> Rational {
        self.slots().map(|n| eigenvalue(n, params)).sum()
    }

    /// The closed form 4w·total_n + 2Nw(1+2s).
    pub fn lambda_closed_form(&self, params: &ModelParams) -> Rational {
        let w = params.w();
        w * BigInt::from(4 * self.total_n() as i64)
            + w * BigInt::from(2 * self.n_bodies() as i64 * params.one_plus_two_s())
    }

    /// Some(u) if this is the ground state (u = 0) or the special state L(1) = u.
    pub fn special_u(&self) -> Option<u32> {
        self.slots().skip(1).all(|v| v == 0).then_some(self.l[0])
    }
}

impl fmt::Display for ManyBodyIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        write!(f, "({}|{})", join(&self.l), join(&self.r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    Special,
    Full,
}

impl std::str::FromStr for BasisMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "special" => Ok(BasisMode::Special),
            "full" => Ok(BasisMode::Full),
            other => Err(Error::Parse(format!("unknown basis mode {other:?}; expected special or full"))),
        }
    }
}

/// Number of index pairs with total excitation ≤ n_max: C(n_max + 2N, 2N).
pub fn full_basis_count(n_bodies: u32, n_max: u32) -> u128 {
    let slots = 2 * n_bodies as u128;
    let mut c: u128 = 1;
    for i in 1..=slots {
        c = c.saturating_mul(n_max as u128 + i) / i;
    }
    c
}

/// Weak compositions of `total` into `slots` parts, lexicographically descending.
fn compositions(total: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slots == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, slots - 1, prefix, out);
        prefix.pop();
    }
}

/// All indices with total excitation exactly `n`, the degenerate level E_n.
pub fn level_set(n_bodies: u32, n: u32) -> Vec<ManyBodyIndex> {
    let mut out = Vec::new();
    compositions(n, 2 * n_bodies as usize, &mut Vec::new(), &mut out);
    out.iter().map(|s| ManyBodyIndex::from_slots(s)).collect()
}

/// Special mode: ground plus L(1) = u for u = 1..=n_max. Full mode: every index with
/// total_n ≤ n_max, by increasing total and lexicographically descending within a level.
pub fn enumerate_basis(params: &ModelParams, n_max: u32, mode: BasisMode, cap: usize) -> Result<Vec<ManyBodyIndex>> {
    let n = params.n_bodies();
    match mode {
        BasisMode::Special => Ok((0..=n_max).map(|u| ManyBodyIndex::special(n, u)).collect()),
        BasisMode::Full => {
            let count = full_basis_count(n, n_max);
            if count > cap as u128 {
                return Err(Error::Size {
                    what: "full many-body basis".into(),
                    size: count.min(usize::MAX as u128) as usize,
                    cap,
                });
            }
            Ok((0..=n_max).flat_map(|t| level_set(n, t)).collect())
        }
    }
}

fn slot_sign(i: usize, n_bodies: usize) -> f64 {
    if i < n_bodies {
        1.0
    } else {
        -1.0
    }
}

/// ⟨φ_a|Σₖ(z_k^L − z_k^R)|φ_b⟩ for normalized product states.
pub fn relative_sum_element(a: &ManyBodyIndex, b: &ManyBodyIndex, table: &ElementTable) -> f64 {
    let n = a.n_bodies();
    let diff = a.differing_slots(b);
    match diff.len() {
        0 => a.slots().enumerate().map(|(i, v)| slot_sign(i, n) * table.z(v, v)).sum(),
        1 => {
            let i = diff[0];
            slot_sign(i, n) * table.z(a.slot(i), b.slot(i))
        }
        _ => 0.0,
    }
}

/// ⟨φ_a|X|φ_b⟩ = −Y ⟨φ_a|Σ(z^L − z^R)|φ_b⟩ in the rest frame C = 0.
pub fn x_matrix_element(a: &ManyBodyIndex, b: &ManyBodyIndex, params: &ModelParams, table: &ElementTable) -> f64 {
    -to_f64(&params.y_factor()) * relative_sum_element(a, b, table)
}

/// ⟨φ_a|[Σ(z^L − z^R)]²|φ_b⟩.
pub fn relative_sum_squared_element(a: &ManyBodyIndex, b: &ManyBodyIndex, table: &ElementTable) -> f64 {
    let n = a.n_bodies();
    let diff = a.differing_slots(b);
    let diag_sum = |skip: &[usize]| -> f64 {
        a.slots().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(i, v)| slot_sign(i, n) * table.z(v, v)).sum()
    };
    match diff.len() {
        0 => {
            let mean = diag_sum(&[]);
            let var: f64 = a.slots().map(|v| table.z2(v, v) - table.z(v, v).powi(2)).sum();
            var + mean * mean
        }
        1 => {
            let p = diff[0];
            let (u, v) = (a.slot(p), b.slot(p));
            table.z2(u, v) + 2.0 * slot_sign(p, n) * table.z(u, v) * diag_sum(&[p])
        }
        2 => {
            let (p, q) = (diff[0], diff[1]);
            2.0 * slot_sign(p, n) * slot_sign(q, n) * table.z(a.slot(p), b.slot(p)) * table.z(a.slot(q), b.slot(q))
        }
        _ => 0.0,
    }
}

/// Row-sparse real symmetric operator on a finite basis.
#[derive(Clone, Debug, Default)]
pub struct SparseOp {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseOp {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|(k, _)| *k == j).map(|(_, v)| *v).unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// ⟨c|A|c⟩, real for symmetric A.
    pub fn expectation(&self, c: &[Complex64]) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|(j, v)| (c[i].conj() * c[*j]).re * v).sum::<f64>())
            .sum()
    }
}

fn basis_lookup(basis: &[ManyBodyIndex]) -> HashMap<Vec<u32>, usize> {
    basis.iter().enumerate().map(|(i, b)| (b.slot_vec(), i)).collect()
}

fn max_slot(basis: &[ManyBodyIndex]) -> u32 {
    basis.iter().flat_map(|b| b.slots()).max().unwrap_or(0)
}

/// Sparse matrix of an operator whose elements vanish beyond `reach` differing slots.
pub fn sparse_operator<F>(basis: &[ManyBodyIndex], reach: usize, element: F) -> SparseOp
where
    F: Fn(&ManyBodyIndex, &ManyBodyIndex) -> f64 + Sync,
{
    let lookup = basis_lookup(basis);
    let top = max_slot(basis);
    let rows = basis
        .par_iter()
        .map(|a| {
            let slots = a.slot_vec();
            let mut row = Vec::new();
            let push = |s: &[u32], row: &mut Vec<(usize, f64)>| {
                if let Some(&j) = lookup.get(s) {
                    let v = element(a, &basis[j]);
                    if v != 0.0 {
                        row.push((j, v));
                    }
                }
            };
            push(&slots, &mut row);
            let m = slots.len();
            let mut s = slots.clone();
            for p in 0..m {
                for vp in (0..=top).filter(|&v| v != slots[p]) {
                    s[p] = vp;
                    push(&s, &mut row);
                    if reach >= 2 {
                        for q in (p + 1)..m {
                            for vq in (0..=top).filter(|&v| v != slots[q]) {
                                s[q] = vq;
                                push(&s, &mut row);
                            }
                            s[q] = slots[q];
                        }
                    }
                }
                s[p] = slots[p];
            }
            row.sort_by_key(|(j, _)| *j);
            row
        })
        .collect();
    SparseOp { rows }
}

/// X on the basis (one-slot reach).
pub fn x_operator(basis: &[ManyBodyIndex], params: &ModelParams, table: &ElementTable) -> SparseOp {
    let y = -to_f64(&params.y_factor());
    sparse_operator(basis, 1, |a, b| y * relative_sum_element(a, b, table))
}

/// X² on the basis, evaluated exactly rather than as a truncated product.
pub fn x_squared_operator(basis: &[ManyBodyIndex], params: &ModelParams, table: &ElementTable) -> SparseOp {
    let y2 = to_f64(&params.y_factor()).powi(2);
    sparse_operator(basis, 2, |a, b| y2 * relative_sum_squared_element(a, b, table))
}

/// Element table large enough for every slot value in `basis`.
pub fn table_for(basis: &[ManyBodyIndex], params: &ModelParams) -> Result<ElementTable> {
    ElementTable::new(params, max_slot(basis))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// c_u ∝ 1/(u log u) for u ≥ 2 over a special basis.
    SpecialLogLog,
    /// c_u ∝ u^{−p} for u ≥ 1 over a special basis.
    InversePower(f64),
    /// Complex Gaussian weights with variance exp(−β(λ − λ_min)), projected to the unit sphere.
    GibbsGaussian,
    /// Caller-supplied coefficients, normalized.
    Custom(Vec<Complex64>),
}

impl Profile {
    pub fn tag(&self) -> &'static str {
        match self {
            Profile::SpecialLogLog => "special_loglog",
            Profile::GibbsGaussian => "gibbs_gaussian",
            Profile::InversePower(_) | Profile::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleDraw {
    pub basis: Vec<ManyBodyIndex>,
    pub c: Vec<Complex64>,
    pub profile: &'static str,
    pub beta: f64,
    pub seed: u64,
}

impl EnsembleDraw {
    pub fn norm_squared(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn normalize(mut c: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Validation("coefficient vector has zero or non-finite norm".into()));
    }
    c.iter_mut().for_each(|z| *z /= norm);
    Ok(c)
}

fn special_weights(basis: &[ManyBodyIndex], f: impl Fn(u32) -> f64) -> Result<Vec<Complex64>> {
    basis
        .iter()
        .map(|b| {
            b.special_u()
                .map(|u| Complex64::new(f(u), 0.0))
                .ok_or_else(|| Error::Validation(format!("{b} is not a special state")))
        })
        .collect()
}

pub fn make_ensemble(
    basis: &[ManyBodyIndex],
    profile: &Profile,
    beta: f64,
    seed: u64,
    params: &ModelParams,
) -> Result<EnsembleDraw> {
    make_ensemble_labeled(basis, profile, beta, seed, "ensemble/0", params)
}

/// As [`make_ensemble`], drawing from the named sub-stream of `seed`.
pub fn make_ensemble_labeled(
    basis: &[ManyBodyIndex],
    profile: &Profile,
    beta: f64,
    seed: u64,
    label: &str,
    params: &ModelParams,
) -> Result<EnsembleDraw> {
    if basis.is_empty() {
        return Err(Error::Validation("ensemble basis is empty".into()));
    }
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Validation(format!("beta must be >= 0, got {beta}")));
    }
    let raw = match profile {
        Profile::SpecialLogLog => {
            special_weights(basis, |u| if u >= 2 { 1.0 / (u as f64 * (u as f64).ln()) } else { 0.0 })?
        }
        Profile::InversePower(p) => special_weights(basis, |u| if u >= 1 { (u as f64).powf(-p) } else { 0.0 })?,
        Profile::Custom(c) => {
            if c.len() != basis.len() {
                return Err(Error::Validation(format!(
                    "custom profile has {} coefficients for a basis of {}",
                    c.len(),
                    basis.len()
                )));
            }
            c.clone()
        }
        Profile::GibbsGaussian => {
            let lambdas: Vec<f64> = basis.iter().map(|b| to_f64(&b.lambda(params))).collect();
            let lmin = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
            let mut rng = rng::stream(seed, label);
            lambdas
                .iter()
                .map(|&l| {
                    let gap = l - lmin;
                    let var = if gap == 0.0 { 1.0 } else { (-beta * gap).exp() };
                    let sd = (var / 2.0).sqrt();
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(sd * re, sd * im)
                })
                .collect()
        }
    };
    Ok(EnsembleDraw { basis: basis.to_vec(), c: normalize(raw)?, profile: profile.tag(), beta, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BmlRow {
    #[serde(rename = "U")]
    pub u: u32,
    pub partial_sum: f64,
}

/// Partial sums of Σ_u |c_u| |⟨φ_u|Σ(z^L − z^R)|φ₀⟩| |λ_u − λ₀| at each cutoff in `u_list`.
pub fn bml_partial_sums_from(terms: &[f64], u_list: &[u32]) -> Vec<BmlRow> {
    let mut prefix = Vec::with_capacity(terms.len());
    let mut acc = 0.0;
    for t in terms {
        acc += t;
        prefix.push(acc);
    }
    u_list.iter().map(|&u| BmlRow { u, partial_sum: prefix[(u as usize).min(prefix.len() - 1)] }).collect()
}

/// Summands indexed by u for a draw over the special basis.
pub fn bml_terms(draw: &EnsembleDraw, params: &ModelParams) -> Result<Vec<f64>> {
    let mut c_by_u = Vec::new();
    for (b, c) in draw.basis.iter().zip(&draw.c) {
        let u = b.special_u().ok_or_else(|| Error::Validation(format!("{b} is not a special state")))? as usize;
        if c_by_u.len() <= u {
            c_by_u.resize(u + 1, 0.0);
        }
        c_by_u[u] += c.norm();
    }
    let u_max = c_by_u.len().saturating_sub(1) as u32;
    let column = z_hat_column_recurrence(params, u_max)?;
    let gap_unit = 4.0 * params.w_f64();
    Ok(c_by_u.iter().enumerate().map(|(u, c)| c * column[u].abs() * gap_unit * u as f64).collect())
}

pub fn bml_partial_sums(draw: &EnsembleDraw, params: &ModelParams, u_list: &[u32]) -> Result<Vec<BmlRow>> {
    if u_list.is_empty() {
        return Ok(Vec::new());
    }
    Ok(bml_partial_sums_from(&bml_terms(draw, params)?, u_list))
}

/// D(X) = ⟨X²⟩ − ⟨X⟩² for one coefficient vector.
pub fn dispersion_of_state(c: &[Complex64], x: &SparseOp, x2: &SparseOp) -> f64 {
    let mean = x.expectation(c);
    x2.expectation(c) - mean * mean
}

#[derive(Clone, Debug, Serialize)]
pub struct DispersionReport {
    #[serde(rename = "N")]
    pub n_bodies: u32,
    pub beta: f64,
    pub y: f64,
    pub basis_size: usize,
    pub n_draws: usize,
    /// Paired-term reduction: [Σ E|c_a|² (X²)_aa, Σ_{a≠b} E|c_a|²|c_b|² X_ab², E(Σ|c_a|² X_aa)²].
    pub terms: [f64; 3],
    pub paired: f64,
    /// Monte-Carlo mean of D(X) over the draws.
    pub dispersion: f64,
    pub stderr: f64,
    pub fitted_exponent: Option<f64>,
}

pub fn dispersion_report(
    params: &ModelParams,
    basis: &[ManyBodyIndex],
    beta: f64,
    n_draws: usize,
    seed: u64,
) -> Result<DispersionReport> {
    if n_draws == 0 {
        return Err(Error::Validation("n_draws must be >= 1".into()));
    }
    let table = table_for(basis, params)?;
    let x = x_operator(basis, params, &table);
    let x2 = x_squared_operator(basis, params, &table);
    let per_draw: Vec<[f64; 4]> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let draw =
                make_ensemble_labeled(basis, &Profile::GibbsGaussian, beta, seed, &format!("ensemble/{i}"), params)?;
            let p: Vec<f64> = draw.c.iter().map(|z| z.norm_sqr()).collect();
            let mut t1 = 0.0;
            let mut t2 = 0.0;
            let mut diag = 0.0;
            for (a, row) in x.rows.iter().enumerate() {
                for &(b, v) in row {
                    if a == b {
                        diag += p[a] * v;
                    } else {
                        t2 += p[a] * p[b] * v * v;
                    }
                }
                t1 += p[a] * x2.get(a, a);
            }
            Ok([dispersion_of_state(&draw.c, &x, &x2), t1, t2, diag * diag])
        })
        .collect::<Result<_>>()?;
    let mean = |k: usize| per_draw.iter().map(|d| d[k]).sum::<f64>() / n_draws as f64;
    let dispersion = mean(0);
    let var = per_draw.iter().map(|d| (d[0] - dispersion).powi(2)).sum::<f64>() / (n_draws.max(2) - 1) as f64;
    let terms = [mean(1), mean(2), mean(3)];
    Ok(DispersionReport {
        n_bodies: params.n_bodies(),
        beta,
        y: to_f64(&params.y_factor()),
        basis_size: basis.len(),
        n_draws,
        terms,
        paired: terms[0] - terms[1] - terms[2],
        dispersion,
        stderr: (var / n_draws as f64).sqrt(),
        fitted_exponent: None,
    })
}

/// Dispersion over several N on full bases of depth `n_max`; the fitted log-log slope of
/// 𝔈D/Y² against N is stored in every report.
pub fn dispersion_scaling(
    params: &ModelParams,
    ns: &[u32],
    n_max: u32,
    beta: f64,
    n_draws: usize,
    seed: u64,
    cap: usize,
) -> Result<Vec<DispersionReport>> {
    let mut reports = Vec::with_capacity(ns.len());
    for &n in ns {
        let p = params.with_n_bodies(n)?;
        let basis = enumerate_basis(&p, n_max, BasisMode::Full, cap)?;
        reports.push(dispersion_report(&p, &basis, beta, n_draws, seed)?);
    }
    if reports.len() >= 2 {
        let x: Vec<f64> = reports.iter().map(|r| r.n_bodies as f64).collect();
        let y: Vec<f64> = reports.iter().map(|r| r.dispersion / (r.y * r.y)).collect();
        let slope = loglog_slope(&x, &y)?;
        reports.iter_mut().for_each(|r| r.fitted_exponent = Some(slope));
    }
    Ok(reports)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatVerdict {
    /// √D(X) < P
    pub cat_free: bool,
    /// √(D_diff T) > P
    pub visible_motion: bool,
    pub both: bool,
    /// N² f(s) with f(s) = 𝔈D·w/(Y²N²)
    pub n2_f: f64,
    /// g(s) = D_diff·T·w/Y²
    pub g: f64,
}

/// Compares the dispersion with the grain size P and the diffusive spread over T.
pub fn cat_check(
    params: &ModelParams,
    dispersion: f64,
    d_diff: f64,
    grain_diameter: f64,
    t_obs: f64,
) -> Result<CatVerdict> {
    if !(grain_diameter > 0.0 && t_obs > 0.0 && dispersion >= 0.0 && d_diff >= 0.0) {
        return Err(Error::Validation("cat check needs P, T > 0 and nonnegative D(X), D_diff".into()));
    }
    let y2 = to_f64(&params.y_factor()).powi(2);
    let w = params.w_f64();
    let cat_free = dispersion.sqrt() < grain_diameter;
    let visible_motion = (d_diff * t_obs).sqrt() > grain_diameter;
    Ok(CatVerdict {
        cat_free,
        visible_motion,
        both: cat_free && visible_motion,
        n2_f: dispersion * w / y2,
        g: d_diff * t_obs * w / y2,
    })
}
