//! Physical frequencies, heavy-particle trajectories, MSD and diffusion estimates, and the
//! classical baselines they are compared against.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::polyfit;
use crate::manybody::{EnsembleDraw, ManyBodyIndex, SparseOp};
use crate::model::{ModelParams, PhysicalConstants};
use crate::numerics::exact::to_f64;

/// Default threshold on |ν|T (rad) below which a pair is treated as static.
pub const DEFAULT_FREQUENCY_CUTOFF: f64 = 1e-3;
/// Relative tolerance on the fitted curvature, in units of max|msd|/T².
pub const DEFAULT_CURVATURE_TOLERANCE: f64 = 1e-9;
const REALITY_TOLERANCE: f64 = 1e-12;

/// Angular frequency of the unit gap, (ħ/2m)·4w.
pub fn unit_gap_frequency(params: &ModelParams, consts: &PhysicalConstants) -> f64 {
    consts.hbar_over_m() / 2.0 * 4.0 * params.w_f64()
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyPair {
    pub n: usize,
    pub n_prime: usize,
    /// ν_{n,n'} = ω_n − ω_{n'} (rad/s)
    pub nu: f64,
    /// μ_{n,n'} = Tν_{n,n'}
    pub mu: f64,
    pub dropped: bool,
}

#[derive(Clone, Debug)]
pub struct FrequencyTable {
    pub basis: Vec<ManyBodyIndex>,
    /// ω_n = (ħ/2m)·λ_mod;n (rad/s)
    pub omega: Vec<f64>,
    pub unit_gap: f64,
    pub t_obs: f64,
    pub cutoff: f64,
    /// Pairs n < n'; the reverse orientation is the negative.
    pub pairs: Vec<FrequencyPair>,
}

impl FrequencyTable {
    /// ν_{n,n'} from the exact level difference, so it is antisymmetric bit for bit.
    pub fn nu(&self, n: usize, n_prime: usize) -> f64 {
        self.unit_gap * (self.basis[n].total_n() as f64 - self.basis[n_prime].total_n() as f64)
    }

    pub fn is_dropped(&self, n: usize, n_prime: usize) -> bool {
        (self.nu(n, n_prime) * self.t_obs).abs() < self.cutoff
    }
}

pub fn frequency_table(
    basis: &[ManyBodyIndex],
    params: &ModelParams,
    consts: &PhysicalConstants,
    t_obs: f64,
    cutoff: f64,
) -> Result<FrequencyTable> {
    if !(t_obs.is_finite() && t_obs > 0.0) {
        return Err(Error::Validation(format!("observation time T must be positive, got {t_obs}")));
    }
    consts.validate()?;
    let half = consts.hbar_over_m() / 2.0;
    let omega = basis.iter().map(|b| half * to_f64(&b.lambda(params))).collect();
    let mut table = FrequencyTable {
        basis: basis.to_vec(),
        omega,
        unit_gap: unit_gap_frequency(params, consts),
        t_obs,
        cutoff,
        pairs: Vec::new(),
    };
    let m = basis.len();
    table.pairs = (0..m)
        .flat_map(|n| (n + 1..m).map(move |k| (n, k)))
        .map(|(n, k)| {
            let nu = table.nu(n, k);
            FrequencyPair { n, n_prime: k, nu, mu: nu * t_obs, dropped: (nu * t_obs).abs() < cutoff }
        })
        .collect();
    Ok(table)
}

/// Fourier content of X(t) = Σ_Δ B_Δ e^{−iΔν₁t}, where Δ = n' − n in total quanta.
fn fourier_modes(draw: &EnsembleDraw, x: &SparseOp) -> Result<BTreeMap<i64, Complex64>> {
    if draw.basis.is_empty() {
        return Err(Error::Validation("trajectory basis is empty".into()));
    }
    if x.dim() != draw.basis.len() {
        return Err(Error::Validation(format!(
            "operator dimension {} does not match basis size {}",
            x.dim(),
            draw.basis.len()
        )));
    }
    let mut modes = BTreeMap::new();
    for (i, row) in x.rows.iter().enumerate() {
        for &(j, m) in row {
            let delta = draw.basis[j].total_n() as i64 - draw.basis[i].total_n() as i64;
            *modes.entry(delta).or_insert(Complex64::new(0.0, 0.0)) += draw.c[i].conj() * draw.c[j] * m;
        }
    }
    Ok(modes)
}

/// Σ|c_n c_{n'} M_{n,n'}|, a bound on |X(t)|.
pub fn amplitude_bound(draw: &EnsembleDraw, x: &SparseOp) -> f64 {
    x.rows
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(j, m)| (i, j, m)))
        .map(|(i, j, m)| (draw.c[i] * draw.c[j]).norm() * m.abs())
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// max|Im X| relative to max(max|Re X|, amplitude bound).
    pub imag_residue: f64,
    pub amplitude_bound: f64,
    pub lags: Vec<f64>,
    pub msd: Vec<f64>,
}

/// X(t) = Σ_{n,n'} conj(c_n)c_{n'}M_{n,n'}e^{−i(ω_{n'}−ω_n)t} on `times`, with the lag-averaged MSD.
pub fn synthesize_trajectory(
    draw: &EnsembleDraw,
    x_op: &SparseOp,
    params: &ModelParams,
    consts: &PhysicalConstants,
    times: &[f64],
) -> Result<TrajectoryResult> {
    let modes: Vec<(i64, Complex64)> = fourier_modes(draw, x_op)?.into_iter().collect();
    let nu1 = unit_gap_frequency(params, consts);
    let values: Vec<Complex64> = times
        .par_iter()
        .map(|&t| modes.iter().map(|&(d, b)| b * Complex64::from_polar(1.0, -(d as f64) * nu1 * t)).sum())
        .collect();
    let bound = amplitude_bound(draw, x_op);
    let re_max = values.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
    let im_max = values.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    let scale = re_max.max(bound);
    let imag_residue = if scale > 0.0 { im_max / scale } else { im_max };
    if imag_residue > REALITY_TOLERANCE {
        return Err(Error::ImaginaryResidue { residue: imag_residue, tolerance: REALITY_TOLERANCE });
    }
    let x: Vec<f64> = values.iter().map(|z| z.re).collect();
    let (lags, msd) = if times.len() >= 2 { lag_averaged_msd(times, &x)? } else { (vec![0.0], vec![0.0]) };
    Ok(TrajectoryResult { times: times.to_vec(), x, imag_residue, amplitude_bound: bound, lags, msd })
}

/// Coefficients c_n·e^{−iω_n t₀}: synthesizing from them on t equals the original on t + t₀.
/// Phases are measured from the ground level, which only changes a global phase.
pub fn evolve_draw(draw: &EnsembleDraw, params: &ModelParams, consts: &PhysicalConstants, t0: f64) -> EnsembleDraw {
    let nu1 = unit_gap_frequency(params, consts);
    let c = draw
        .basis
        .iter()
        .zip(&draw.c)
        .map(|(b, c)| c * Complex64::from_polar(1.0, -(b.total_n() as f64) * nu1 * t0))
        .collect();
    EnsembleDraw { c, ..draw.clone() }
}

pub fn uniform_grid(t_end: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 || !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Validation(format!("time grid needs ≥ 2 samples and T > 0, got {samples}, {t_end}")));
    }
    let dt = t_end / (samples - 1) as f64;
    Ok((0..samples).map(|i| i as f64 * dt).collect())
}

fn grid_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Fit("MSD needs at least two samples".into()));
    }
    let dt = times[1] - times[0];
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(f64::MIN_POSITIVE));
    if !(dt > 0.0 && uniform) {
        return Err(Error::Validation("MSD requires a uniform increasing time grid".into()));
    }
    Ok(dt)
}

/// msd(kΔt) = mean_i (x_{i+k} − x_i)² for k up to half the record.
pub fn lag_averaged_msd(times: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = grid_step(times)?;
    let n = x.len();
    let k_max = n / 2;
    let msd: Vec<f64> = (0..=k_max)
        .into_par_iter()
        .map(|k| (0..n - k).map(|i| (x[i + k] - x[i]).powi(2)).sum::<f64>() / (n - k) as f64)
        .collect();
    Ok(((0..=k_max).map(|k| k as f64 * dt).collect(), msd))
}

/// Circular lag average mean_i (x_{(i+k) mod n} − x_i)², exact for signals periodic on the grid.
pub fn circular_msd(times: &[f64], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = grid_step(times)?;
    let n = x.len();
    let msd: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| (0..n).map(|i| (x[(i + k) % n] - x[i]).powi(2)).sum::<f64>() / n as f64)
        .collect();
    Ok(((0..n).map(|k| k as f64 * dt).collect(), msd))
}

/// Ensemble MSD mean_d (X_d(t_k) − X_d(t_0))² over trajectories on a shared grid.
pub fn ensemble_msd(trajectories: &[TrajectoryResult]) -> Result<Vec<f64>> {
    let first = trajectories.first().ok_or_else(|| Error::Validation("no trajectories to average".into()))?;
    let n = first.x.len();
    if trajectories.iter().any(|t| t.x.len() != n) {
        return Err(Error::Validation("trajectories have different lengths".into()));
    }
    let d = trajectories.len() as f64;
    Ok((0..n).map(|k| trajectories.iter().map(|t| (t.x[k] - t.x[0]).powi(2)).sum::<f64>() / d).collect())
}

pub type Kernel1d = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// H and G kernels for the γ*/D sums. Absent kernels select the empirical estimator.
#[derive(Clone, Default)]
pub struct KernelSpec {
    pub h: Option<Kernel1d>,
    pub g: Option<Kernel1d>,
}

impl KernelSpec {
    pub fn empirical() -> Self {
        KernelSpec::default()
    }

    pub fn pluggable(h: Kernel1d, g: Kernel1d) -> Self {
        KernelSpec { h: Some(h), g: Some(g) }
    }

    pub fn mode(&self) -> &'static str {
        if self.h.is_some() && self.g.is_some() {
            "pluggable"
        } else {
            "empirical"
        }
    }
}

impl std::fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KernelSpec({})", self.mode())
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DiffusionResult {
    pub mode: String,
    #[serde(rename = "D")]
    pub d: f64,
    /// Fitted c of a + 2Dτ + cτ² (empirical) or γ* (pluggable).
    pub curvature: f64,
    pub intercept: f64,
    pub criterion_met: bool,
    #[serde(rename = "T")]
    pub t_obs: f64,
    pub cutoff: f64,
    /// Set in pluggable mode, whose constants come from kernels defined elsewhere.
    pub external_kernel_dependent: bool,
}

/// Least-squares fit msd(τ) ≈ a + 2Dτ + cτ² on lags in [0, T]; the criterion holds when c is
/// non-positive up to `curvature_tol`·max|msd|/T².
pub fn diffusion_empirical(lags: &[f64], msd: &[f64], t_obs: f64, curvature_tol: f64) -> Result<DiffusionResult> {
    if lags.len() != msd.len() {
        return Err(Error::Fit(format!("{} lags but {} MSD values", lags.len(), msd.len())));
    }
    let (x, y): (Vec<f64>, Vec<f64>) =
        lags.iter().zip(msd).filter(|(l, _)| **l <= t_obs * (1.0 + 1e-12)).map(|(l, m)| (*l, *m)).unzip();
    if x.len() < 4 {
        return Err(Error::Fit(format!("only {} MSD points within T = {t_obs}; need at least 4", x.len())));
    }
    let span = x.iter().cloned().fold(0.0, f64::max);
    let coef = polyfit(&x, &y, 2)?;
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())) / (span * span);
    Ok(DiffusionResult {
        mode: "empirical".into(),
        d: coef[1] / 2.0,
        curvature: coef[2],
        intercept: coef[0],
        criterion_met: coef[2] <= curvature_tol * scale,
        t_obs,
        cutoff: 0.0,
        external_kernel_dependent: false,
    })
}

/// a_{n,n'} = |M_{n,n'}|²·E[|c_n|²|c_{n'}|²], the expectation taken as the mean over `draws`.
pub fn pair_weights(draws: &[EnsembleDraw], x: &SparseOp) -> Result<Vec<(usize, usize, f64)>> {
    if draws.is_empty() {
        return Err(Error::Validation("no draws for the ensemble average".into()));
    }
    let nd = draws.len() as f64;
    Ok(x.rows
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(j, m)| (i, j, m)))
        .filter(|(i, j, _)| i != j)
        .map(|(i, j, m)| {
            let e: f64 = draws.iter().map(|d| d.c[i].norm_sqr() * d.c[j].norm_sqr()).sum::<f64>() / nd;
            (i, j, m * m * e)
        })
        .collect())
}

/// γ* = (40/T²)Σ a H(μ) and D = (12/T)Σ a G(μ) over n ≠ n', skipping pairs with |μ| < cutoff.
pub fn diffusion_pluggable(
    kernel: &KernelSpec,
    weights: &[(usize, usize, f64)],
    freq: &FrequencyTable,
) -> Result<DiffusionResult> {
    let (Some(h), Some(g)) = (&kernel.h, &kernel.g) else {
        return Err(Error::Validation("pluggable mode needs both H and G kernels".into()));
    };
    let t = freq.t_obs;
    let (mut hs, mut gs) = (0.0, 0.0);
    for &(i, j, a) in weights {
        if freq.is_dropped(i, j) {
            continue;
        }
        let mu = freq.nu(i, j) * t;
        hs += a * h(mu);
        gs += a * g(mu);
    }
    let gamma_star = 40.0 / (t * t) * hs;
    Ok(DiffusionResult {
        mode: "pluggable".into(),
        d: 12.0 / t * gs,
        curvature: gamma_star,
        intercept: 0.0,
        criterion_met: gamma_star <= 0.0,
        t_obs: t,
        cutoff: freq.cutoff,
        external_kernel_dependent: true,
    })
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Scenario {
    pub volume_cm3: f64,
    pub grain_mass_g: f64,
    /// Number of light particles N = V/m (water at 1 g/cm³, m in grams).
    pub n: f64,
    /// Mass ratio r = m/M.
    pub r: f64,
    pub rn: f64,
}

pub fn scenario(volume_cm3: f64, grain_mass_g: f64, consts: &PhysicalConstants) -> Result<Scenario> {
    if !(volume_cm3 > 0.0 && grain_mass_g > 0.0) {
        return Err(Error::Validation("volume and grain mass must be positive".into()));
    }
    let m_grams = consts.m_light * 1e3;
    let n = volume_cm3 / m_grams;
    Ok(Scenario { volume_cm3, grain_mass_g, n, r: m_grams / grain_mass_g, rn: volume_cm3 / grain_mass_g })
}

/// Volume (cm³) of a sphere of the given diameter (cm).
pub fn sphere_volume(diameter_cm: f64) -> f64 {
    std::f64::consts::PI / 6.0 * diameter_cm.powi(3)
}

/// Kτ/(6πνP)
pub fn einstein_d(consts: &PhysicalConstants, viscosity: f64, grain_radius: f64) -> f64 {
    consts.boltzmann_k * consts.temperature_tau / (6.0 * std::f64::consts::PI * viscosity * grain_radius)
}

/// Langevin MSD: free particle when `trap_omega` is None, otherwise the harmonic-trap form.
pub fn langevin_msd(
    consts: &PhysicalConstants,
    mass: f64,
    gamma: f64,
    trap_omega: Option<f64>,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    if !(mass > 0.0 && gamma > 0.0) {
        return Err(Error::Validation("mass and friction must be positive".into()));
    }
    let kt = consts.boltzmann_k * consts.temperature_tau;
    let rate = gamma / mass;
    Ok(match trap_omega {
        None => t_grid
            .iter()
            .map(|&t| {
                let x = rate * t;
                // x − 1 + e^{−x} loses everything to cancellation for small x.
                let bracket = if x < 1e-4 { x * x / 2.0 - x * x * x / 6.0 } else { x - 1.0 + (-x).exp() };
                2.0 * kt * mass / (gamma * gamma) * bracket
            })
            .collect(),
        Some(w) => {
            if !(w > 0.0) {
                return Err(Error::Validation("trap frequency must be positive".into()));
            }
            // Damped frequency squared; its sign selects the under-, critically or overdamped form.
            let half = rate / 2.0;
            let disc = w * w - half * half;
            let scale = 2.0 * kt / (mass * w * w);
            t_grid
                .iter()
                .map(|&t| {
                    let relax = if disc.abs() <= 1e-12 * w * w {
                        (-half * t).exp() * (1.0 + half * t)
                    } else if disc > 0.0 {
                        let w1 = disc.sqrt();
                        (-half * t).exp() * ((w1 * t).cos() + half * (w1 * t).sin() / w1)
                    } else {
                        // e^{−ht}(cosh + (h/w1) sinh) as two decaying exponentials, so cosh never overflows.
                        let w1 = (-disc).sqrt();
                        let slow = (-(half - w1) * t).exp();
                        let fast = (-(half + w1) * t).exp();
                        0.5 * ((1.0 + half / w1) * slow + (1.0 - half / w1) * fast)
                    };
                    scale * (1.0 - relax)
                })
                .collect()
        }
    })
}

/// n(h) = n₀ exp(−3φ(Δ−δ)gh / 2W).
pub fn perrin_profile(
    n0: f64,
    phi_volume: f64,
    density_grain: f64,
    density_fluid: f64,
    g: f64,
    w_energy: f64,
    h_grid: &[f64],
) -> Vec<f64> {
    let k = 3.0 * phi_volume * (density_grain - density_fluid) * g / (2.0 * w_energy);
    h_grid.iter().map(|h| n0 * (-k * h).exp()).collect()
}

/// Height at which the concentration falls by `ratio` = n₀/n, from (2/3)W log(n₀/n) = φ(Δ−δ)gh.
pub fn perrin_height(
    ratio: f64,
    phi_volume: f64,
    density_grain: f64,
    density_fluid: f64,
    g: f64,
    w_energy: f64,
) -> f64 {
    2.0 / 3.0 * w_energy * ratio.ln() / (phi_volume * (density_grain - density_fluid) * g)
}

/// Mean translational kinetic energy (3/2)Kτ.
pub fn mean_kinetic_energy(consts: &PhysicalConstants) -> f64 {
    1.5 * consts.boltzmann_k * consts.temperature_tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::{enumerate_basis, make_ensemble, table_for, x_operator, BasisMode, Profile};
    use crate::model::make_params;
    use crate::numerics::exact::rat;

    fn params() -> ModelParams {
        make_params(&rat(3, 2), &rat(100_000_000, 1), 1, &rat(1, 100)).unwrap()
    }

    fn two_mode() -> (ModelParams, PhysicalConstants, EnsembleDraw, SparseOp) {
        let p = params();
        let basis = vec![ManyBodyIndex::ground(1), ManyBodyIndex::special(1, 1)];
        let table = table_for(&basis, &p).unwrap();
        let x = x_operator(&basis, &p, &table);
        let (c0, c1) = (0.6, 0.8);
        let draw = make_ensemble(&basis, &Profile::Custom(vec![c0.into(), c1.into()]), 0.0, 1, &p).unwrap();
        (p, PhysicalConstants::default(), draw, x)
    }

    #[test]
    fn frequencies() {
        let c = PhysicalConstants::default();
        assert!((c.hbar_over_m().log10() + 8.0).abs() < 0.5);
        let p = make_params(&rat(3, 2), &rat(1, 1), 1, &rat(1, 100)).unwrap();
        let basis = vec![ManyBodyIndex::ground(1), ManyBodyIndex::special(1, 1), ManyBodyIndex::special(1, 3)];
        let f = frequency_table(&basis, &p, &c, 1.0, DEFAULT_FREQUENCY_CUTOFF).unwrap();
        let mu10 = -f.pairs[0].mu;
        assert!((mu10 - 2.0 * c.hbar_over_m()).abs() < 1e-22);
        assert!(f.pairs.iter().all(|q| q.dropped));
        for q in &f.pairs {
            assert_eq!(f.nu(q.n, q.n_prime), -f.nu(q.n_prime, q.n));
            assert!((q.nu - (f.omega[q.n] - f.omega[q.n_prime])).abs() <= 1e-9 * q.nu.abs());
        }
        let doubled = PhysicalConstants { hbar: 2.0 * c.hbar, ..c };
        let g = frequency_table(&basis, &p, &doubled, 1.0, 0.0).unwrap();
        for (a, b) in f.pairs.iter().zip(&g.pairs) {
            assert!((b.nu - 2.0 * a.nu).abs() <= 1e-15 * b.nu.abs());
        }
    }

    #[test]
    fn two_mode_trajectory_and_msd() {
        let (p, c, draw, x) = two_mode();
        let nu = unit_gap_frequency(&p, &c);
        let period = 2.0 * std::f64::consts::PI / nu;
        let n = 256;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * period * 3.0 / n as f64).collect();
        let tr = synthesize_trajectory(&draw, &x, &p, &c, &times).unwrap();
        let m01 = x.get(0, 1);
        let amp = 2.0 * 0.6 * 0.8 * m01;
        // (1|0) is not L/R symmetric, so it carries a static offset c₁²M₁₁.
        let offset = 0.8 * 0.8 * x.get(1, 1);
        for (t, v) in times.iter().zip(&tr.x) {
            assert!((v - offset - amp * (nu * t).cos()).abs() < 1e-10 * amp.abs());
        }
        let (lags, msd) = circular_msd(&times, &tr.x).unwrap();
        for (l, m) in lags.iter().zip(&msd) {
            assert!((m - amp * amp * (1.0 - (nu * l).cos())).abs() < 1e-10 * amp * amp);
        }
        assert_eq!(tr.msd[0], 0.0);
    }

    #[test]
    fn time_shift_consistency() {
        let p = params();
        let c = PhysicalConstants::default();
        let basis = enumerate_basis(&p, 30, BasisMode::Special, 1000).unwrap();
        let table = table_for(&basis, &p).unwrap();
        let x = x_operator(&basis, &p, &table);
        let draw = make_ensemble(&basis, &Profile::GibbsGaussian, 1e-9, 7, &p).unwrap();
        let t0 = 0.37 / unit_gap_frequency(&p, &c);
        let times = uniform_grid(20.0 / unit_gap_frequency(&p, &c), 200).unwrap();
        let shifted: Vec<f64> = times.iter().map(|t| t + t0).collect();
        let a = synthesize_trajectory(&draw, &x, &p, &c, &shifted).unwrap();
        let b = synthesize_trajectory(&evolve_draw(&draw, &p, &c, t0), &x, &p, &c, &times).unwrap();
        for (u, v) in a.x.iter().zip(&b.x) {
            assert!((u - v).abs() < 1e-10 * a.amplitude_bound, "{u} {v} {}", a.amplitude_bound);
        }
        assert!(a.imag_residue < 1e-12);
        assert!(a.x.iter().all(|v| v.abs() <= a.amplitude_bound * (1.0 + 1e-12)));
    }

    #[test]
    fn single_state_is_static() {
        let p = params();
        let basis = vec![ManyBodyIndex::ground(1)];
        let table = table_for(&basis, &p).unwrap();
        let x = x_operator(&basis, &p, &table);
        let draw = make_ensemble(&basis, &Profile::Custom(vec![1.0.into()]), 0.0, 0, &p).unwrap();
        let tr = synthesize_trajectory(&draw, &x, &p, &PhysicalConstants::default(), &[0.0, 1.0, 2.0]).unwrap();
        assert!(tr.x.iter().all(|v| v.abs() < 1e-300));
    }

    #[test]
    fn empirical_classification() {
        let lags: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let linear: Vec<f64> = lags.iter().map(|t| 2.0 * 3.0 * t).collect();
        let r = diffusion_empirical(&lags, &linear, 1.0, DEFAULT_CURVATURE_TOLERANCE).unwrap();
        assert!(r.criterion_met && (r.d - 3.0).abs() < 1e-9);
        let ballistic: Vec<f64> = lags.iter().map(|t| 4.0 * t * t).collect();
        assert!(!diffusion_empirical(&lags, &ballistic, 1.0, DEFAULT_CURVATURE_TOLERANCE).unwrap().criterion_met);
        let saturating: Vec<f64> = lags.iter().map(|t| 1.0 - (-5.0 * t).exp()).collect();
        let s = diffusion_empirical(&lags, &saturating, 1.0, DEFAULT_CURVATURE_TOLERANCE).unwrap();
        assert!(s.criterion_met && s.curvature < 0.0);
        // Sinusoidal MSD fitted beyond a quarter period.
        let nu = 1.5 * std::f64::consts::PI;
        let sine: Vec<f64> = lags.iter().map(|t| 1.0 - (nu * t).cos()).collect();
        let s = diffusion_empirical(&lags, &sine, 1.0, DEFAULT_CURVATURE_TOLERANCE).unwrap();
        assert!(s.criterion_met && s.curvature < 0.0, "{s:?}");
        assert!(matches!(diffusion_empirical(&lags[..3], &linear[..3], 1.0, 1e-9), Err(Error::Fit(_))));
    }

    #[test]
    fn pluggable_mode_literal_constants() {
        let (p, c, draw, x) = two_mode();
        let basis = draw.basis.clone();
        let f = frequency_table(&basis, &p, &c, 10.0, 0.0).unwrap();
        let wts = pair_weights(&[draw], &x).unwrap();
        let k = KernelSpec::pluggable(Arc::new(|_| -1.0), Arc::new(|_| 1.0));
        let r = diffusion_pluggable(&k, &wts, &f).unwrap();
        let a: f64 = wts.iter().map(|w| w.2).sum();
        assert!((r.d - 12.0 / 10.0 * a).abs() < 1e-15 * r.d.abs().max(1e-300));
        assert!((r.curvature + 40.0 / 100.0 * a).abs() < 1e-15 * a.max(1e-300));
        assert!(r.criterion_met && r.external_kernel_dependent);
        assert!(diffusion_pluggable(&KernelSpec::empirical(), &wts, &f).is_err());
    }

    #[test]
    fn scenario_examples() {
        let c = PhysicalConstants::default();
        let droplet = sphere_volume(0.1);
        assert!((droplet - 5.236e-4).abs() < 1e-6);
        let s = scenario(droplet, 1e-7, &c).unwrap();
        assert!((5e3..1e4).contains(&s.rn));
        assert!((s.r * s.n - s.rn).abs() < 1e-9 * s.rn);
        assert!((scenario(1e-9, 1e-7, &c).unwrap().rn - 1e-2).abs() < 1e-15);
        assert!(scenario(1e-3, 1e30, &c).unwrap().rn < 1e-30);
    }

    #[test]
    fn baselines() {
        let c = PhysicalConstants { boltzmann_k: 1.38e-23, temperature_tau: 293.0, ..Default::default() };
        let d = einstein_d(&c, 1.0e-3, 1e-7);
        assert!((d - 2.14e-12).abs() < 0.01e-12);
        assert!((einstein_d(&c, 1.0e-3, 2e-7) - d / 2.0).abs() < 1e-25);
        let cold = PhysicalConstants { temperature_tau: 0.0, ..c };
        assert_eq!(einstein_d(&cold, 1e-3, 1e-7), 0.0);

        let (m, g) = (1e-14, 1e-8);
        let kt = c.boltzmann_k * c.temperature_tau;
        let small = langevin_msd(&c, m, g, None, &[1e-9]).unwrap()[0];
        assert!((small / (kt / m * 1e-18) - 1.0).abs() < 1e-3);
        let big = langevin_msd(&c, m, g, None, &[1e3, 2e3]).unwrap();
        assert!(((big[1] - big[0]) / 1e3 / (2.0 * kt / g) - 1.0).abs() < 1e-6);
        let grid: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-7).collect();
        let free = langevin_msd(&c, m, g, None, &grid).unwrap();
        assert!(free.windows(2).all(|w| w[1] > w[0]));
        let w = 1e4;
        let trapped = langevin_msd(&c, m, g, Some(w), &grid).unwrap();
        assert!(trapped.iter().all(|v| *v <= 4.0 * kt / (m * w * w)));
        let late = langevin_msd(&c, m, g, Some(w), &[1.0]).unwrap()[0];
        assert!((late / (2.0 * kt / (m * w * w)) - 1.0).abs() < 1e-9);
        // Ballistic start and continuity through critical damping (γ/m = 2ω).
        let crit = g / m / 2.0;
        for w in [0.5 * crit, crit * (1.0 - 1e-7), crit, crit * (1.0 + 1e-7), 2.0 * crit] {
            let v = langevin_msd(&c, m, g, Some(w), &[1e-9, 1e-3, 1e3]).unwrap();
            assert!((v[0] / (kt / m * 1e-18) - 1.0).abs() < 1e-3, "w = {w}");
            assert!(v.windows(2).all(|p| p[1] >= p[0]) || w > crit);
            assert!((v[2] / (2.0 * kt / (m * w * w)) - 1.0).abs() < 1e-6);
        }
        let near = |w: f64| langevin_msd(&c, m, g, Some(w), &[2e-7]).unwrap()[0];
        assert!((near(crit * (1.0 - 1e-7)) / near(crit) - 1.0).abs() < 1e-5);
        assert!((near(crit * (1.0 + 1e-7)) / near(crit) - 1.0).abs() < 1e-5);

        let h = [0.0, 1e-5, 5e-5];
        let prof = perrin_profile(100.0, 1e-18, 1200.0, 1000.0, 9.8, mean_kinetic_energy(&c), &h);
        assert_eq!(prof[0], 100.0);
        assert!(perrin_profile(100.0, 1e-18, 1200.0, 1000.0, 9.8, 1e300, &h).iter().all(|v| (v - 100.0).abs() < 1e-9));
        let half = perrin_height(2.0, 1e-18, 1200.0, 1000.0, 9.8, mean_kinetic_energy(&c));
        let at = perrin_profile(100.0, 1e-18, 1200.0, 1000.0, 9.8, mean_kinetic_energy(&c), &[half])[0];
        assert!((at - 50.0).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn msd_is_nonnegative_and_starts_at_zero(x in prop::collection::vec(-1e3f64..1e3, 2..200)) {
                let times: Vec<f64> = (0..x.len()).map(|i| i as f64 * 0.25).collect();
                let (lags, msd) = lag_averaged_msd(&times, &x).unwrap();
                prop_assert_eq!(lags.len(), msd.len());
                prop_assert_eq!(msd[0], 0.0);
                prop_assert!(msd.iter().all(|m| *m >= 0.0));
                let (_, circ) = circular_msd(&times, &x).unwrap();
                prop_assert!(circ.iter().all(|m| *m >= 0.0));
            }

            #[test]
            fn linear_msd_is_diffusive(d in 1e-3f64..1e3, a in 0.0f64..10.0) {
                let lags: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
                let msd: Vec<f64> = lags.iter().map(|t| a + 2.0 * d * t).collect();
                let r = diffusion_empirical(&lags, &msd, 4.9, DEFAULT_CURVATURE_TOLERANCE).unwrap();
                prop_assert!(r.criterion_met);
                prop_assert!((r.d - d).abs() <= 1e-8 * d.max(1.0));
            }
        }
    }
}
