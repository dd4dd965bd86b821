//! First-order degenerate perturbation theory for the cross-derivative operator
//! J = −Σ_{j≠k}(∂ᴸⱼ∂ᴸₖ + ∂ᴿⱼ∂ᴿₖ) + 2Σ_{j,k}∂ᴸⱼ∂ᴿₖ.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manybody::{
    enumerate_basis, level_set, BasisMode, EnsembleDraw, ManyBodyIndex, SparseOp, DEFAULT_BASIS_CAP,
};
use crate::matelem::{norm_squared, raw_element, z_hat_column_recurrence, ElementTable, Kernel};
use crate::model::ModelParams;
use crate::numerics::exact::{to_f64, Rational};
use crate::numerics::Surd;
use crate::spectrum::eigenstates;

/// Coefficient of ∂_p∂_q in J for two distinct slots (each unordered pair counted once).
fn pair_coefficient(p: usize, q: usize, n_bodies: usize) -> i64 {
    if (p < n_bodies) == (q < n_bodies) {
        -2
    } else {
        2
    }
}

/// ⟨φ_a|J|φ_b⟩; nonzero only when a and b differ in exactly two slots.
pub fn j_matrix_element(a: &ManyBodyIndex, b: &ManyBodyIndex, table: &ElementTable) -> f64 {
    let diff = a.differing_slots(b);
    if diff.len() != 2 {
        return 0.0;
    }
    let (p, q) = (diff[0], diff[1]);
    pair_coefficient(p, q, a.n_bodies()) as f64 * table.d(a.slot(p), b.slot(p)) * table.d(a.slot(q), b.slot(q))
}

/// Exact ⟨φ_a|J|φ_b⟩: a single product of two derivative elements.
pub fn j_matrix_element_exact(a: &ManyBodyIndex, b: &ManyBodyIndex, table: &ElementTable) -> Surd {
    let diff = a.differing_slots(b);
    if diff.len() != 2 {
        return Surd::zero();
    }
    let (p, q) = (diff[0], diff[1]);
    let k = Rational::from_integer(BigInt::from(pair_coefficient(p, q, a.n_bodies())));
    table.d_exact(a.slot(p), b.slot(p)).mul(&table.d_exact(a.slot(q), b.slot(q))).scale(&k)
}

#[derive(Clone, Debug)]
pub struct KMatrix {
    pub level_n: u32,
    pub basis: Vec<ManyBodyIndex>,
    pub entries: DMatrix<f64>,
    pub exact: Vec<Vec<Surd>>,
    /// Number of structurally nonzero entries (pairs differing in exactly two slots).
    pub sparsity: usize,
}

impl KMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_symmetric_exact(&self) -> bool {
        (0..self.dim()).all(|i| (0..i).all(|j| self.exact[i][j] == self.exact[j][i]))
    }

    pub fn has_zero_diagonal_exact(&self) -> bool {
        (0..self.dim()).all(|i| self.exact[i][i].is_zero())
    }

    /// Every entry vanishes unless the two indices differ in exactly two slots, and the
    /// structural count agrees with brute-force classification.
    pub fn obeys_two_entry_rule(&self) -> bool {
        let mut allowed = 0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let two = a.differing_slots(b).len() == 2;
                allowed += two as usize;
                if !two && !self.exact[i][j].is_zero() {
                    return false;
                }
            }
        }
        allowed == self.sparsity
    }
}

pub fn build_k_matrix(level_n: u32, params: &ModelParams, cap: usize) -> Result<KMatrix> {
    let basis = level_set(params.n_bodies(), level_n);
    if basis.len() > cap {
        return Err(Error::Size { what: format!("degenerate level E_{level_n}"), size: basis.len(), cap });
    }
    let table = ElementTable::new(params, level_n)?;
    build_k_matrix_with(level_n, basis, &table)
}

fn build_k_matrix_with(level_n: u32, basis: Vec<ManyBodyIndex>, table: &ElementTable) -> Result<KMatrix> {
    let m = basis.len();
    let exact: Vec<Vec<Surd>> =
        basis.par_iter().map(|a| basis.iter().map(|b| j_matrix_element_exact(a, b, table)).collect()).collect();
    let entries = DMatrix::from_fn(m, m, |i, j| exact[i][j].to_f64());
    let sparsity = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|&(i, j)| basis[i].differing_slots(&basis[j]).len() == 2)
        .count();
    Ok(KMatrix { level_n, basis, entries, exact, sparsity })
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitLevel {
    pub level_n: u32,
    pub lambda0: f64,
    /// Eigenvalues of K, ascending.
    pub corrections: Vec<f64>,
    /// Matching unit eigenvectors (columns b^{(p)}), largest component positive.
    #[serde(skip)]
    pub vectors: Vec<DVector<f64>>,
    /// max_t Σ_{p≠t} |K_pt|
    pub lhg_bound: f64,
    /// n(2N−1)·max|K_pt|
    pub coarse_bound: f64,
    pub trace: f64,
}

pub fn split_level(k: &KMatrix, params: &ModelParams) -> Result<SplitLevel> {
    let m = k.dim();
    let lambda0 = k.basis.first().map(|b| to_f64(&b.lambda(params))).unwrap_or(f64::NAN);
    if k.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolve("K has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(k.entries.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigensolve(format!("symmetric eigensolver did not converge for level {}", k.level_n)))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let corrections: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            let pivot = v.iter().copied().enumerate().fold((0, 0.0f64), |acc, (j, x)| {
                if x.abs() > acc.1.abs() + 1e-12 {
                    (j, x)
                } else {
                    acc
                }
            });
            if pivot.1 < 0.0 {
                v.neg_mut();
            }
            v
        })
        .collect();
    let lhg_bound =
        (0..m).map(|t| (0..m).filter(|&p| p != t).map(|p| k.entries[(p, t)].abs()).sum::<f64>()).fold(0.0, f64::max);
    let c_entry = k.entries.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let n_bodies = k.basis.first().map(|b| b.n_bodies()).unwrap_or(0) as f64;
    Ok(SplitLevel {
        level_n: k.level_n,
        lambda0,
        corrections,
        vectors,
        lhg_bound,
        coarse_bound: k.level_n as f64 * (2.0 * n_bodies - 1.0) * c_entry,
        trace: k.entries.trace(),
    })
}

/// J on a finite basis.
pub fn j_operator(basis: &[ManyBodyIndex], table: &ElementTable) -> SparseOp {
    crate::manybody::sparse_operator(basis, 2, |a, b| j_matrix_element(a, b, table))
}

#[derive(Clone, Debug)]
pub struct FirstOrder {
    pub level_n: u32,
    pub lambda1: f64,
    /// b-coefficients inside E_n.
    pub b: Vec<(ManyBodyIndex, f64)>,
    /// a_k for k outside E_n with total_n ≤ cutoff.
    pub a: Vec<(ManyBodyIndex, f64)>,
    pub norm: f64,
    /// Norm of the coefficients on the outermost shell total_n = cutoff.
    pub tail_norm: f64,
}

/// φ_{n;1} = Σ_{k∉E_n} a_k φ_k with a_k = −(λ_k − λ_n)⁻¹⟨φ_k|J|Σ b_p φ^{(p)}⟩, truncated to
/// total_n ≤ cutoff. Fails with a cutoff error when the last shell still carries more than
/// `tail_tolerance` of norm.
pub fn first_order_vector(
    level_n: u32,
    correction_index: usize,
    params: &ModelParams,
    cutoff: u32,
    tail_tolerance: f64,
) -> Result<FirstOrder> {
    if cutoff <= level_n {
        return Err(Error::Validation(format!("cutoff {cutoff} must exceed the level {level_n}")));
    }
    let basis = enumerate_basis(params, cutoff, BasisMode::Full, DEFAULT_BASIS_CAP)?;
    let table = ElementTable::new(params, cutoff)?;
    let level: Vec<ManyBodyIndex> = basis.iter().filter(|b| b.total_n() == level_n).cloned().collect();
    let k = build_k_matrix_with(level_n, level.clone(), &table)?;
    let split = split_level(&k, params)?;
    if correction_index >= split.corrections.len() {
        return Err(Error::Validation(format!(
            "correction index {correction_index} out of range (level has {})",
            split.corrections.len()
        )));
    }
    let bvec = &split.vectors[correction_index];
    let b: Vec<(ManyBodyIndex, f64)> = level.iter().cloned().zip(bvec.iter().copied()).collect();
    let w4 = 4.0 * params.w_f64();
    let a: Vec<(ManyBodyIndex, f64)> = basis
        .par_iter()
        .filter(|kidx| kidx.total_n() != level_n)
        .map(|kidx| {
            let jpsi: f64 = b.iter().map(|(p, bp)| bp * j_matrix_element(kidx, p, &table)).sum();
            let gap = w4 * (kidx.total_n() as f64 - level_n as f64);
            (kidx.clone(), -jpsi / gap)
        })
        .collect();
    let norm = a.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    let tail_norm = a.iter().filter(|(k, _)| k.total_n() == cutoff).map(|(_, v)| v * v).sum::<f64>().sqrt();
    if tail_norm > tail_tolerance {
        return Err(Error::Cutoff { cutoff, tail: tail_norm, tolerance: tail_tolerance });
    }
    Ok(FirstOrder { level_n, lambda1: split.corrections[correction_index], b, a, norm, tail_norm })
}

/// Galerkin residual ‖P_B (H₀ + rJ − λ₀ − rλ₁)(ψ + rφ₁)‖ on the truncated basis B, where ψ is
/// the chosen zeroth-order combination. Equals r²‖P_B(J − λ₁)φ₁‖ when the first-order
/// equations are satisfied.
pub fn first_order_residual(params: &ModelParams, first: &FirstOrder, cutoff: u32, r: f64) -> Result<f64> {
    let basis = enumerate_basis(params, cutoff, BasisMode::Full, DEFAULT_BASIS_CAP)?;
    let table = ElementTable::new(params, cutoff)?;
    let pos: HashMap<&ManyBodyIndex, usize> = basis.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let mut v = vec![0.0; basis.len()];
    for (k, bp) in &first.b {
        v[pos[k]] += bp;
    }
    for (k, ak) in &first.a {
        if let Some(&i) = pos.get(k) {
            v[i] += r * ak;
        }
    }
    let j = j_operator(&basis, &table);
    let lambda0 =
        to_f64(&ManyBodyIndex::ground(params.n_bodies()).lambda(params)) + 4.0 * params.w_f64() * first.level_n as f64;
    let res: f64 = basis
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let h0 = (to_f64(&b.lambda(params)) - lambda0 - r * first.lambda1) * v[i];
            let jv: f64 = j.rows[i].iter().map(|(k, x)| x * v[*k]).sum();
            let x = h0 + r * jv;
            x * x
        })
        .sum();
    Ok(res.sqrt())
}

/// ⟨ξ̂_u|K|ξ̂₀⟩ for u = 0..=u_max (each costs O(u) since P₀ = 1).
pub fn column_from_ground(kernel: Kernel, params: &ModelParams, u_max: u32) -> Result<Vec<f64>> {
    let states = eigenstates(u_max, params)?;
    let n0 = norm_squared(&states[0]);
    states
        .par_iter()
        .map(|st| {
            let raw = raw_element(st, kernel, &states[0])?;
            let norm = Surd::new(Rational::from_integer(1.into()), 0, (norm_squared(st) * &n0).recip());
            Ok(raw.mul(&norm).to_f64())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessRow {
    pub r: f64,
    #[serde(rename = "U")]
    pub u: u32,
    pub partial_sum: f64,
    pub unperturbed: f64,
}

/// BML partial sums with special-state elements corrected to first order in r:
/// M_u(r) = ⟨φ_u + rφ_{u;1}|Σ(z^L − z^R)|φ₀ + rφ_{0;1}⟩. First-order eigenvalue shifts of the
/// special and ground states are ⟨φ|J|φ⟩ = 0, so the gaps stay 4wu. Only states with a single
/// excited slot reach φ₀ through Σ(z^L − z^R), which makes both corrections sums over one
/// excitation v' ≤ `inner_cutoff`.
pub fn bml_robustness_check(
    params: &ModelParams,
    r_values: &[f64],
    draw: &EnsembleDraw,
    u_list: &[u32],
    inner_cutoff: u32,
) -> Result<Vec<RobustnessRow>> {
    let mut c_by_u: Vec<f64> = Vec::new();
    for (b, c) in draw.basis.iter().zip(&draw.c) {
        let u = b.special_u().ok_or_else(|| Error::Validation(format!("{b} is not a special state")))? as usize;
        if c_by_u.len() <= u {
            c_by_u.resize(u + 1, 0.0);
        }
        c_by_u[u] += c.norm();
    }
    let u_max = c_by_u.len().saturating_sub(1) as u32;
    let top = u_max.max(inner_cutoff);
    let z_col = z_hat_column_recurrence(params, top)?;
    // ⟨ξ̂_v|∂|ξ̂₀⟩ = −2wv⟨ξ̂_v|z|ξ̂₀⟩; antisymmetry gives ⟨ξ̂₀|∂|ξ̂_v⟩ = −d_col[v].
    let w = params.w_f64();
    let d_col: Vec<f64> = z_col.iter().enumerate().map(|(v, z)| -2.0 * w * v as f64 * z).collect();
    let n = params.n_bodies() as f64;
    let w4 = 4.0 * w;

    // Slots q ≠ L(1) that can hold the single excitation: N−1 left (coefficient −2, sign +)
    // and N right (coefficient +2, sign −), each contributing −2 to coefficient × sign.
    let multiplicity = 2.0 * n - 1.0;
    let delta: Vec<f64> = (0..=u_max as usize)
        .into_par_iter()
        .map(|u| {
            if u == 0 {
                return 0.0;
            }
            // φ_{u;1} component on (0 in L(1), v' in slot q): −J/(4w(v' − u)),
            // J = coef·⟨ξ̂₀|∂|ξ̂_u⟩⟨ξ̂_{v'}|∂|ξ̂₀⟩, overlap with φ₀ = sign_q ẑ(v',0).
            let mut first = 0.0;
            // φ_{0;1} component on (u in L(1), v' in slot q): −J/(4w(u + v')),
            // J = coef·⟨ξ̂_u|∂|ξ̂₀⟩⟨ξ̂_{v'}|∂|ξ̂₀⟩, overlap with φ_u = sign_q ẑ(0,v').
            let mut second = 0.0;
            for v in 1..=inner_cutoff as usize {
                if v != u {
                    let j = -d_col[u] * d_col[v];
                    first += -j / (w4 * (v as f64 - u as f64)) * z_col[v];
                }
                let j = d_col[u] * d_col[v];
                second += -j / (w4 * (u + v) as f64) * z_col[v];
            }
            -2.0 * multiplicity * (first + second)
        })
        .collect();

    let mut rows = Vec::new();
    for &r in r_values {
        let terms: Vec<f64> =
            (0..=u_max as usize).map(|u| c_by_u[u] * (z_col[u] + r * delta[u]).abs() * w4 * u as f64).collect();
        let base: Vec<f64> = (0..=u_max as usize).map(|u| c_by_u[u] * z_col[u].abs() * w4 * u as f64).collect();
        let pert = crate::manybody::bml_partial_sums_from(&terms, u_list);
        let unpert = crate::manybody::bml_partial_sums_from(&base, u_list);
        rows.extend(pert.into_iter().zip(unpert).map(|(p, q)| RobustnessRow {
            r,
            u: p.u,
            partial_sum: p.partial_sum,
            unperturbed: q.partial_sum,
        }));
    }
    Ok(rows)
}
