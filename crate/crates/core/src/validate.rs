//! The invariant suite behind `qw validate`: every closed form against its independent route.

use std::time::Instant;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    circular_msd, diffusion_empirical, einstein_d, evolve_draw, langevin_msd, synthesize_trajectory, uniform_grid,
    unit_gap_frequency, DEFAULT_CURVATURE_TOLERANCE,
};
use crate::error::Result;
use crate::io::{parse_exact, parse_float, Table};
use crate::manybody::{
    dispersion_of_state, enumerate_basis, full_basis_count, level_set, make_ensemble, table_for, x_operator,
    x_squared_operator, BasisMode, ManyBodyIndex, Profile,
};
use crate::matelem::{
    denominator_j_terms, matrix_element, numerator_routes, raw_element_matrix, theorem2_sequence,
    z_hat_column_recurrence, ElementTable, Kernel, Method,
};
use crate::model::{make_params, ModelParams, PhysicalConstants};
use crate::numerics::exact::{int, rat, Rational};
use crate::numerics::gamma::legendre_duplication_exact;
use crate::numerics::Base;
use crate::oscseries::{
    product_identity_check, s1_direct, s1_integral, s2_direct, s2_integral, s3_bound_holds, s3_closed_form, s3_direct,
    s3_integral, S3Options, SeriesOptions,
};
use crate::perturbation::{build_k_matrix, first_order_vector, split_level};
use crate::spectrum::{
    alternating_binomial_sum, binomial_identity_residual, eigenstates, eigenvalue, fd_oracle_spectrum,
};

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn() -> Result<(bool, String)>;

fn p(s: (i64, i64), w: (i64, i64), n: u32) -> ModelParams {
    make_params(&rat(s.0, s.1), &rat(w.0, w.1), n, &rat(1, 100)).expect("valid fixed parameters")
}

fn spectrum_closed_form() -> Result<(bool, String)> {
    // eigenstates() verifies the first-row equation exactly for each state it builds.
    let mut ok = true;
    for pr in [p((3, 2), (1, 1), 1), p((5, 2), (1, 1), 1), p((7, 2), (2, 3), 1)] {
        let states = eigenstates(200, &pr)?;
        for st in &states {
            let expect = pr.w() * BigInt::from(4 * st.n as i64) + pr.w() * BigInt::from(pr.one_plus_two_s());
            ok &= st.mu == expect && st.degree() == 2 * st.n;
        }
    }
    Ok((ok, "mu_n = 4wn + w(1+2s) and deg P_n = 2n for n <= 200, first row exact".into()))
}

fn binomial_identities() -> Result<(bool, String)> {
    let a = (1..=200u64).all(|u| binomial_identity_residual(u) == 0.into());
    let b = (1..=500u64).all(|u| alternating_binomial_sum(u) == 0.into());
    Ok((a && b, format!("binomial identity u<=200: {a}; alternating sum u<=500: {b}")))
}

fn fd_oracle() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for pr in [p((3, 2), (1, 1), 1), p((5, 2), (1, 1), 1), p((3, 2), (2, 1), 1)] {
        let fd = fd_oracle_spectrum(&pr, 4000, 1e-3, 10.0, 4)?;
        for (n, v) in fd.iter().enumerate() {
            let exact = crate::numerics::exact::to_f64(&eigenvalue(n as u32, &pr));
            worst = worst.max((v - exact).abs() / exact);
        }
    }
    Ok((worst < 1e-3, format!("max relative deviation {worst:.3e} (grid 4000)")))
}

fn orthogonality() -> Result<(bool, String)> {
    let gram = raw_element_matrix(&p((5, 2), (3, 2), 1), 40, Kernel::Identity)?;
    let ok = gram.iter().enumerate().all(|(u, row)| row.iter().enumerate().all(|(v, x)| x.is_zero() == (u != v)));
    Ok((ok, "exact Gram matrix diagonal for n <= 40".into()))
}

fn element_routes() -> Result<(bool, String)> {
    let pr = p((3, 2), (1, 1), 1);
    let mut worst: f64 = 0.0;
    for kernel in Kernel::ALL {
        for (u, v) in [(0, 0), (1, 0), (3, 2), (5, 1)] {
            let a = matrix_element(u, v, kernel, &pr, Method::MomentAlgebra, 192)?;
            let b = matrix_element(u, v, kernel, &pr, Method::Quadrature, 192)?;
            let diff = (&a.normalized - &b.normalized).abs().to_f64();
            let scale = a.normalized.abs().to_f64().max(1.0);
            worst = worst.max(diff / scale);
        }
    }
    let table = ElementTable::new(&pr, 20)?;
    let mut table_worst: f64 = 0.0;
    for u in 0..=20 {
        for v in 0..=20 {
            let e = table.z_exact(u, v).to_f64();
            table_worst = table_worst.max((table.z(u, v) - e).abs());
            table_worst = table_worst.max((table.d(u, v) - table.d_exact(u, v).to_f64()).abs());
        }
    }
    Ok((
        worst < 1e-12 && table_worst < 1e-12,
        format!("moment vs quadrature {worst:.2e}; Laguerre table vs exact {table_worst:.2e}"),
    ))
}

fn z_decay_recurrence() -> Result<(bool, String)> {
    let pr = p((3, 2), (1, 1), 1);
    let us: Vec<u32> = (1..=60).collect();
    let exact = theorem2_sequence(&pr, &us)?;
    let rec = z_hat_column_recurrence(&pr, 60)?;
    let worst = exact.iter().map(|r| (r.value - rec[r.u as usize]).abs() / r.value.abs()).fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("recurrence vs exact column, u <= 60: {worst:.2e}")))
}

fn denominator_terms() -> Result<(bool, String)> {
    let pr = p((3, 2), (1, 1), 1);
    let j0 = (1..=200).all(|u| denominator_j_terms(&pr, u).0.is_zero());
    let j1 = (2..=200).all(|u| denominator_j_terms(&pr, u).1.is_zero());
    let j1_at_1 = denominator_j_terms(&pr, 1).1;
    Ok((j0 && j1, format!("J0 = 0 for u <= 200: {j0}; J1 = 0 for 2 <= u <= 200: {j1}; J1(1) = {j1_at_1}")))
}

fn numerator_assembly() -> Result<(bool, String)> {
    let pr = p((3, 2), (1, 1), 1);
    let mut ok = true;
    for u in 1..=12 {
        let r = numerator_routes(&pr, u, Base::Two, 192)?;
        ok &= r.series_assembly_exact.as_ref() == Some(&r.direct) && r.moment_difference == r.direct;
    }
    Ok((ok, "direct, moment-difference and base-2 series routes agree exactly, u <= 12".into()))
}

fn base_two_identities() -> Result<(bool, String)> {
    let mut ok = true;
    for s in [rat(3, 2), rat(5, 2), rat(7, 2)] {
        ok &= legendre_duplication_exact(&s)?.is_zero();
        for k in 1..=10 {
            ok &= product_identity_check(k, &s, Base::Two, 192)?.residual.is_zero();
        }
    }
    Ok((ok, "duplication and product identities vanish exactly in base 2".into()))
}

fn series_duality() -> Result<(bool, String)> {
    let s = rat(3, 2);
    let opts = SeriesOptions::default();
    let mut worst: f64 = 0.0;
    for u in [5, 20] {
        for (d, i) in [
            (s1_direct(u, &s, Base::Two, opts.bits)?.value, s1_integral(u, &s, Base::Two, &opts)?),
            (s2_direct(u, &s, Base::Two, opts.bits)?.value, s2_integral(u, &s, Base::Two, &opts)?),
        ] {
            worst = worst.max(((&d - &i).abs() / d.abs()).to_f64());
        }
    }
    let mut s3_worst: f64 = 0.0;
    let mut bound = true;
    for t in [1, 2] {
        let d = s3_direct(5, t)?;
        let i = s3_integral(5, t, &S3Options::default())?;
        let dv = crate::numerics::exact::to_f64(&d);
        s3_worst = s3_worst.max((i.to_f64() - dv).abs() / dv.abs());
        for u in 1..=60 {
            let d = s3_direct(u, t)?;
            bound &= s3_bound_holds(&d, t) && d == s3_closed_form(u, t);
        }
    }
    Ok((
        worst < 1e-8 && s3_worst < 1e-6 && bound,
        format!("S1/S2 rel {worst:.2e}; S3 rel {s3_worst:.2e}; |S3| < 2^t and closed form: {bound}"),
    ))
}

fn manybody_structure() -> Result<(bool, String)> {
    let mut ok = true;
    for n in 1..=3u32 {
        let pr = p((3, 2), (1, 1), n);
        let basis = enumerate_basis(&pr, 3, BasisMode::Full, 100_000)?;
        ok &= basis.len() as u128 == full_basis_count(n, 3);
        ok &= basis.iter().all(|b| b.lambda(&pr) == b.lambda_closed_form(&pr));
        let table = table_for(&basis, &pr)?;
        let x = x_operator(&basis, &pr, &table);
        let x2 = x_squared_operator(&basis, &pr, &table);
        for i in 0..basis.len() {
            for &(j, v) in &x.rows[i] {
                ok &= (x.get(j, i) - v).abs() < 1e-13;
            }
        }
        ok &= x.get(0, 0).abs() < 1e-14;
        let c: Vec<Complex64> = (0..basis.len()).map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.3)).collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let c: Vec<Complex64> = c.iter().map(|z| z / norm).collect();
        ok &= dispersion_of_state(&c, &x, &x2) >= -1e-12;
    }
    Ok((ok, "basis counts, lambda closed form, X Hermitian, <X>_0 = 0, D(X) >= 0 for N <= 3".into()))
}

fn perturbation_structure() -> Result<(bool, String)> {
    let mut ok = true;
    let mut pairs = 0;
    for n in 1..=2u32 {
        let pr = p((3, 2), (1, 1), n);
        for level in 0..=3 {
            let k = build_k_matrix(level, &pr, 10_000)?;
            ok &= k.is_symmetric_exact() && k.has_zero_diagonal_exact() && k.obeys_two_entry_rule();
            let s = split_level(&k, &pr)?;
            pairs += k.sparsity;
            for c in &s.corrections {
                ok &=
                    c.abs() <= s.lhg_bound * (1.0 + 1e-12) + 1e-14 && c.abs() <= s.coarse_bound * (1.0 + 1e-12) + 1e-14;
            }
        }
    }
    let k0 = build_k_matrix(0, &p((3, 2), (1, 1), 2), 10)?;
    ok &= k0.exact[0][0].is_zero();
    let f = first_order_vector(0, 0, &p((3, 2), (1, 1), 1), 10, 1.0)?;
    ok &= f.lambda1 == 0.0;
    Ok((ok, format!("K symmetric, zero diagonal, two-entry rule ({pairs} couplings), LHG and coarse bounds")))
}

fn trajectory_properties() -> Result<(bool, String)> {
    let pr = make_params(&rat(3, 2), &int(100_000_000), 1, &rat(1, 100))?;
    let consts = PhysicalConstants::default();
    let nu = unit_gap_frequency(&pr, &consts);
    let two = vec![ManyBodyIndex::ground(1), ManyBodyIndex::special(1, 1)];
    let table = table_for(&two, &pr)?;
    let x = x_operator(&two, &pr, &table);
    let draw = make_ensemble(&two, &Profile::Custom(vec![0.6.into(), 0.8.into()]), 0.0, 0, &pr)?;
    let period = 2.0 * std::f64::consts::PI / nu;
    let times: Vec<f64> = (0..128).map(|i| i as f64 * period / 64.0).collect();
    let tr = synthesize_trajectory(&draw, &x, &pr, &consts, &times)?;
    let amp = 2.0 * 0.6 * 0.8 * x.get(0, 1);
    let (lags, msd) = circular_msd(&times, &tr.x)?;
    let msd_err = lags
        .iter()
        .zip(&msd)
        .map(|(l, m)| (m - amp * amp * (1.0 - (nu * l).cos())).abs() / (amp * amp))
        .fold(0.0, f64::max);

    let basis = enumerate_basis(&pr, 40, BasisMode::Special, 1000)?;
    let table = table_for(&basis, &pr)?;
    let x = x_operator(&basis, &pr, &table);
    let draw = make_ensemble(&basis, &Profile::GibbsGaussian, 2e-9, 11, &pr)?;
    let grid = uniform_grid(30.0 / nu, 300)?;
    let a = synthesize_trajectory(&draw, &x, &pr, &consts, &grid)?;
    let t0 = 0.7 / nu;
    let shifted: Vec<f64> = grid.iter().map(|t| t + t0).collect();
    let b = synthesize_trajectory(&draw, &x, &pr, &consts, &shifted)?;
    let c = synthesize_trajectory(&evolve_draw(&draw, &pr, &consts, t0), &x, &pr, &consts, &grid)?;
    let shift_err = b.x.iter().zip(&c.x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) / a.amplitude_bound;
    let bounded = a.x.iter().all(|v| v.abs() <= a.amplitude_bound * (1.0 + 1e-12));
    let ok = msd_err < 1e-10 && shift_err < 1e-10 && a.imag_residue < 1e-12 && bounded;
    Ok((ok, format!("two-mode MSD {msd_err:.1e}; time shift {shift_err:.1e}; reality {:.1e}", a.imag_residue)))
}

fn diffusion_classifier() -> Result<(bool, String)> {
    let lags: Vec<f64> = (0..200).map(|i| i as f64 * 0.005).collect();
    let lin: Vec<f64> = lags.iter().map(|t| 0.5 * t).collect();
    let bal: Vec<f64> = lags.iter().map(|t| 3.0 * t * t).collect();
    let sat: Vec<f64> = lags.iter().map(|t| 1.0 - (-4.0 * t).exp()).collect();
    let l = diffusion_empirical(&lags, &lin, 1.0, DEFAULT_CURVATURE_TOLERANCE)?;
    let b = diffusion_empirical(&lags, &bal, 1.0, DEFAULT_CURVATURE_TOLERANCE)?;
    let s = diffusion_empirical(&lags, &sat, 1.0, DEFAULT_CURVATURE_TOLERANCE)?;
    let ok = l.criterion_met && (l.d - 0.25).abs() < 1e-12 && !b.criterion_met && s.criterion_met;
    Ok((ok, "linear -> diffusive (D recovered), ballistic -> rejected, saturating -> non-positive curvature".into()))
}

fn baselines() -> Result<(bool, String)> {
    let c = PhysicalConstants::default();
    let d = einstein_d(&c, 1e-3, 1e-7);
    let halves = (einstein_d(&c, 1e-3, 2e-7) - d / 2.0).abs() < 1e-12 * d;
    let grid: Vec<f64> = (1..500).map(|i| i as f64 * 1e-6).collect();
    let free = langevin_msd(&c, 1e-14, 1e-8, None, &grid)?;
    let monotone = free.windows(2).all(|w| w[1] > w[0]);
    let kt = c.boltzmann_k * c.temperature_tau;
    let trapped = langevin_msd(&c, 1e-14, 1e-8, Some(2e4), &grid)?;
    let bounded = trapped.iter().all(|v| *v <= 4.0 * kt / (1e-14 * 4e8));
    let hbar_ok = (c.hbar_over_m().log10() + 8.0).abs() < 0.5;
    Ok((
        halves && monotone && bounded && hbar_ok,
        format!("Einstein D {d:.3e}; Langevin monotone/bounded; hbar/m {:.2e}", c.hbar_over_m()),
    ))
}

fn csv_round_trip() -> Result<(bool, String)> {
    let mut t = Table::new(["a", "b"]);
    let values = [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE];
    for (i, v) in values.iter().enumerate() {
        t.push(vec![(*v).into(), Rational::new((i as i64 + 1).into(), 3.into()).into()])?;
    }
    let back = Table::parse(&t.to_csv_string()?)?;
    let mut ok = back == t;
    for (row, v) in back.rows.iter().zip(values) {
        ok &= parse_float(&row[0])?.to_bits() == v.to_bits();
    }
    ok &= parse_exact(&back.rows[0][1])? == rat(1, 3) && back.rows[0][1] == "1/3";
    Ok((ok, "floats round-trip bit-exactly, rationals stay num/den".into()))
}

fn level_sets() -> Result<(bool, String)> {
    let mut ok = true;
    for n in 1..=3u32 {
        for level in 0..=4 {
            let set = level_set(n, level);
            ok &= set.iter().all(|b| b.total_n() == level);
            ok &= set.len() as u128
                == full_basis_count(n, level) - if level == 0 { 0 } else { full_basis_count(n, level - 1) };
        }
    }
    Ok((ok, "level sets partition the truncated basis".into()))
}

pub const CHECKS: &[(&str, CheckFn)] = &[
    ("spectrum.closed_form", spectrum_closed_form),
    ("spectrum.binomial_identities", binomial_identities),
    ("spectrum.fd_oracle", fd_oracle),
    ("matelem.orthogonality", orthogonality),
    ("matelem.routes", element_routes),
    ("matelem.z_decay_recurrence", z_decay_recurrence),
    ("matelem.denominator_terms", denominator_terms),
    ("matelem.numerator_assembly", numerator_assembly),
    ("numerics.base_two_identities", base_two_identities),
    ("oscseries.duality", series_duality),
    ("manybody.structure", manybody_structure),
    ("manybody.level_sets", level_sets),
    ("perturbation.structure", perturbation_structure),
    ("dynamics.trajectory", trajectory_properties),
    ("dynamics.classifier", diffusion_classifier),
    ("dynamics.baselines", baselines),
    ("io.csv_round_trip", csv_round_trip),
];

/// Runs every check (in parallel); errors count as failures.
pub fn run_suite() -> Vec<CheckOutcome> {
    CHECKS
        .par_iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let (passed, detail) = match f() {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}
