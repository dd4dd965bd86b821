//! Subcommand arguments and bodies. Every command writes its files into the output directory
//! and returns their names; criterion failures come back as `Report::failure`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use qw_core::config::Settings;
use qw_core::dynamics::{
    diffusion_empirical, einstein_d, ensemble_msd, langevin_msd, mean_kinetic_energy, perrin_height, perrin_profile,
    scenario, sphere_volume, synthesize_trajectory, uniform_grid, unit_gap_frequency, TrajectoryResult,
    DEFAULT_CURVATURE_TOLERANCE,
};
use qw_core::fit::loglog_slope;
use qw_core::io::{parse_msd_csv, write_json, Cell, Table};
use qw_core::manybody::{
    bml_partial_sums, cat_check, dispersion_scaling, enumerate_basis, make_ensemble_labeled, table_for, x_operator,
    BasisMode, Profile, DEFAULT_BASIS_CAP,
};
use qw_core::matelem::{matrix_element, Kernel, Method};
use qw_core::numerics::exact::to_f64;
use qw_core::numerics::Base;
use qw_core::oscseries::{s3_bound_holds, series_sweep, S3Options, SeriesOptions, Which};
use qw_core::perturbation::{
    bml_robustness_check, build_k_matrix, first_order_residual, first_order_vector, split_level,
};
use qw_core::spectrum::{eigenvalue, fd_oracle_checked, spectrum_rows};
use qw_core::validate::run_suite;
use qw_core::{Error, Result};

use crate::{Command, Report};

pub fn run(cmd: &Command, st: &Settings, out: &Path) -> Result<Report> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    match cmd {
        Command::Spectrum(a) => spectrum(a, st, out),
        Command::OracleEig(a) => oracle(a, st, out),
        Command::Matelem(a) => matelem(a, st, out),
        Command::Series(a) => series(a, st, out),
        Command::Bml(a) => bml(a, st, out),
        Command::Perturb(a) => perturb(a, st, out),
        Command::Trajectory(a) => trajectory(a, st, out),
        Command::Diffusion(a) => diffusion(a, st, out),
        Command::Cats(a) => cats(a, st, out),
        Command::Scenario(a) => scenario_cmd(a, st, out),
        Command::Baselines(a) => baselines(a, st, out),
        Command::Validate => validate(out),
    }
}

fn ok(outputs: &[&str]) -> Result<Report> {
    Ok(Report { outputs: outputs.iter().map(|s| s.to_string()).collect(), failure: None })
}

fn verdict(outputs: &[&str], failures: Vec<String>) -> Result<Report> {
    let failure = if failures.is_empty() { None } else { Some(failures.join("; ")) };
    Ok(Report { outputs: outputs.iter().map(|s| s.to_string()).collect(), failure })
}

fn beta_f64(st: &Settings) -> f64 {
    to_f64(&st.beta)
}

#[derive(Args, Debug, Serialize)]
pub struct SpectrumArgs {
    /// Highest excited level; rows cover n = 0..=nmax
    #[arg(long, default_value_t = 10)]
    pub nmax: u32,
}

fn spectrum(a: &SpectrumArgs, st: &Settings, out: &Path) -> Result<Report> {
    let mut t = Table::new(["n", "mu_exact", "mu_float", "coeff_k", "coeff_value"]);
    for row in spectrum_rows(a.nmax, &st.params)? {
        t.push(vec![
            row.n.into(),
            row.mu_exact.into(),
            row.mu_float.into(),
            row.coeff_k.into(),
            row.coeff_value.into(),
        ])?;
    }
    t.write(&out.join("spectrum.csv"))?;
    ok(&["spectrum.csv"])
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 4000)]
    pub grid: usize,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub z_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub z_max: f64,
    /// Relative tolerance against the closed form and under refinement
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

fn oracle(a: &OracleArgs, st: &Settings, out: &Path) -> Result<Report> {
    let rep = fd_oracle_checked(&st.params, a.grid, a.z_min, a.z_max, a.k, a.tol)?;
    let mut t = Table::new(["n", "mu_exact", "mu_float", "fd", "fd_refined", "rel_err", "observed_order"]);
    let mut failures = Vec::new();
    for (n, fd) in rep.eigenvalues.iter().enumerate() {
        let mu = eigenvalue(n as u32, &st.params);
        let mu_f = to_f64(&mu);
        let rel = (fd - mu_f).abs() / mu_f.abs();
        if !(rel <= a.tol) {
            failures.push(format!("level {n}: relative error {rel:e} above {:e}", a.tol));
        }
        t.push(vec![
            n.into(),
            mu.into(),
            mu_f.into(),
            (*fd).into(),
            rep.refined[n].into(),
            rel.into(),
            rep.observed_order[n].into(),
        ])?;
    }
    t.write(&out.join("oracle.csv"))?;
    verdict(&["oracle.csv"], failures)
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    MomentAlgebra,
    Quadrature,
    Both,
}

#[derive(Args, Debug, Serialize)]
pub struct MatelemArgs {
    /// Bra indices, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub u: Vec<u32>,
    /// Ket indices, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub v: Vec<u32>,
    /// identity, z, z_squared, z_inverse or d_dz
    #[arg(long, default_value = "z")]
    pub kernel: String,
    #[arg(long, value_enum, default_value = "moment-algebra")]
    pub method: MethodArg,
    /// Agreement required between the two methods when --method both
    #[arg(long, default_value_t = 1e-20)]
    pub tol: f64,
}

fn matelem(a: &MatelemArgs, st: &Settings, out: &Path) -> Result<Report> {
    let kernel: Kernel = a.kernel.parse()?;
    let methods: &[Method] = match a.method {
        MethodArg::MomentAlgebra => &[Method::MomentAlgebra],
        MethodArg::Quadrature => &[Method::Quadrature],
        MethodArg::Both => &[Method::MomentAlgebra, Method::Quadrature],
    };
    let mut t = Table::new(["u", "v", "kernel", "value_float", "value_exact_string", "method"]);
    let mut failures = Vec::new();
    for &u in &a.u {
        for &v in &a.v {
            let reps = methods
                .iter()
                .map(|&m| matrix_element(u, v, kernel, &st.params, m, st.precision_bits))
                .collect::<Result<Vec<_>>>()?;
            for r in &reps {
                t.push(qw_core::matelem::csv_fields(r).into_iter().map(Cell::Text).collect())?;
            }
            if let [x, y] = reps.as_slice() {
                let diff = (&x.normalized - &y.normalized).abs().to_f64();
                let scale = x.normalized.abs().to_f64().max(1e-300);
                if !(diff <= a.tol * scale) {
                    failures.push(format!("({u},{v}): methods differ by {:e}", diff / scale));
                }
            }
        }
    }
    t.write(&out.join("matelem.csv"))?;
    verdict(&["matelem.csv"], failures)
}

#[derive(Args, Debug, Serialize)]
pub struct SeriesArgs {
    /// s1, s2 or s3
    #[arg(long, default_value = "s3")]
    pub which: String,
    /// Values of u, comma separated
    #[arg(long, value_delimiter = ',', default_value = "5,20")]
    pub u: Vec<u32>,
    /// t = s − 1/2
    #[arg(long, default_value_t = 1)]
    pub t: u32,
    /// 2 or e
    #[arg(long, default_value = "2")]
    pub base: String,
    /// Relative direct/integral agreement required
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

fn series(a: &SeriesArgs, st: &Settings, out: &Path) -> Result<Report> {
    let which: Which = a.which.parse()?;
    let base: Base = a.base.parse()?;
    let opts = S3Options {
        series: SeriesOptions { bits: st.precision_bits, ..SeriesOptions::default() },
        nodes_per_axis: None,
    };
    let rows = series_sweep(which, &a.u, a.t, base, &opts)?;
    let mut t = Table::new(["which", "u", "t_or_s", "base", "direct", "integral", "abs_diff", "slope_window"]);
    let mut failures = Vec::new();
    for r in &rows {
        let direct = r.direct.to_f64();
        let rel = r.abs_diff / direct.abs().max(f64::MIN_POSITIVE);
        if !(rel <= a.tol) {
            failures.push(format!("{} u={}: relative difference {rel:e} above {:e}", which.as_str(), r.u, a.tol));
        }
        if let (Which::S3, Some(exact)) = (which, &r.direct_exact) {
            if !s3_bound_holds(exact, a.t) {
                failures.push(format!("S3 u={} violates |S3| < 2^t", r.u));
            }
        }
        t.push(vec![
            which.as_str().into(),
            r.u.into(),
            r.t_or_s.clone().into(),
            r.base.as_str().into(),
            direct.into(),
            r.integral.to_f64().into(),
            r.abs_diff.into(),
            r.slope_window.into(),
        ])?;
    }
    t.write(&out.join("series.csv"))?;
    verdict(&["series.csv"], failures)
}

/// Coefficient profile over the special basis.
fn parse_profile(text: &str) -> Result<Profile> {
    match text {
        "loglog" => Ok(Profile::SpecialLogLog),
        "gibbs" => Ok(Profile::GibbsGaussian),
        _ => match text.strip_prefix("power:") {
            Some(p) => p
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite() && *p > 0.0)
                .map(Profile::InversePower)
                .ok_or_else(|| Error::Parse(format!("bad exponent in profile {text:?}"))),
            None => Err(Error::Parse(format!("unknown profile {text:?}; expected loglog, power:<p> or gibbs"))),
        },
    }
}

#[derive(Args, Debug, Serialize)]
pub struct BmlArgs {
    /// loglog (c_u ∝ 1/(u log u)), power:<p> (c_u ∝ u^−p) or gibbs
    #[arg(long, default_value = "loglog")]
    pub profile: String,
    /// Cutoffs U at which partial sums are reported, comma separated
    #[arg(long = "U", value_delimiter = ',', default_value = "10,100,1000")]
    pub u_list: Vec<u32>,
    /// Values of r for the first-order robustness table (bml_robustness.csv), comma separated
    #[arg(long, value_delimiter = ',')]
    pub robust_r: Vec<f64>,
    /// Largest single excitation kept in the first-order corrections
    #[arg(long, default_value_t = 128)]
    pub inner_cutoff: u32,
}

fn bml(a: &BmlArgs, st: &Settings, out: &Path) -> Result<Report> {
    let profile = parse_profile(&a.profile)?;
    let u_max = a.u_list.iter().copied().max().ok_or_else(|| Error::Validation("--U is empty".into()))?;
    let basis = enumerate_basis(&st.params, u_max, BasisMode::Special, DEFAULT_BASIS_CAP)?;
    let draw = make_ensemble_labeled(&basis, &profile, beta_f64(st), st.seed, "ensemble/0", &st.params)?;
    let mut t = Table::new(["U", "partial_sum"]);
    for row in bml_partial_sums(&draw, &st.params, &a.u_list)? {
        t.push(vec![row.u.into(), row.partial_sum.into()])?;
    }
    t.write(&out.join("bml.csv"))?;
    if a.robust_r.is_empty() {
        return ok(&["bml.csv"]);
    }
    let mut rt = Table::new(["r", "U", "partial_sum", "unperturbed"]);
    for row in bml_robustness_check(&st.params, &a.robust_r, &draw, &a.u_list, a.inner_cutoff)? {
        rt.push(vec![row.r.into(), row.u.into(), row.partial_sum.into(), row.unperturbed.into()])?;
    }
    rt.write(&out.join("bml_robustness.csv"))?;
    ok(&["bml.csv", "bml_robustness.csv"])
}

#[derive(Args, Debug, Serialize)]
pub struct PerturbArgs {
    /// Levels n = 0..=nmax are split
    #[arg(long, default_value_t = 3)]
    pub nmax: u32,
    /// Basis size cap for a single level
    #[arg(long, default_value_t = DEFAULT_BASIS_CAP)]
    pub cap: usize,
    /// Values of r for the first-order residual scan (first_order.csv), comma separated
    #[arg(long, value_delimiter = ',')]
    pub residual_r: Vec<f64>,
    /// Level and correction index of the first-order vector
    #[arg(long, default_value_t = 0)]
    pub fo_level: u32,
    #[arg(long, default_value_t = 0)]
    pub fo_index: usize,
    /// Total-excitation cutoff of the first-order vector
    #[arg(long, default_value_t = 8)]
    pub fo_cutoff: u32,
    /// Largest norm allowed on the outermost shell of the first-order vector
    #[arg(long, default_value_t = 1.0)]
    pub fo_tail_tol: f64,
}

#[derive(Serialize)]
struct LevelSummary {
    level_n: u32,
    m_n: usize,
    symmetric: bool,
    zero_diagonal: bool,
    two_entry_rule: bool,
    within_lhg_bound: bool,
    within_coarse_bound: bool,
}

fn perturb(a: &PerturbArgs, st: &Settings, out: &Path) -> Result<Report> {
    let mut t = Table::new(["level_n", "m_n", "correction_index", "lambda1", "lhg_bound", "coarse_bound"]);
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for n in 0..=a.nmax {
        let k = build_k_matrix(n, &st.params, a.cap)?;
        let split = split_level(&k, &st.params)?;
        let slack = |b: f64| b * (1.0 + 1e-12) + 1e-300;
        let s = LevelSummary {
            level_n: n,
            m_n: k.dim(),
            symmetric: k.is_symmetric_exact(),
            zero_diagonal: k.has_zero_diagonal_exact(),
            two_entry_rule: k.obeys_two_entry_rule(),
            within_lhg_bound: split.corrections.iter().all(|c| c.abs() <= slack(split.lhg_bound)),
            within_coarse_bound: split.corrections.iter().all(|c| c.abs() <= slack(split.coarse_bound)),
        };
        if !(s.symmetric && s.zero_diagonal && s.two_entry_rule && s.within_lhg_bound && s.within_coarse_bound) {
            failures.push(format!("level {n} violates a structural property"));
        }
        for (i, c) in split.corrections.iter().enumerate() {
            t.push(vec![
                n.into(),
                k.dim().into(),
                i.into(),
                (*c).into(),
                split.lhg_bound.into(),
                split.coarse_bound.into(),
            ])?;
        }
        summary.push(s);
    }
    t.write(&out.join("splitting.csv"))?;
    let mut outputs = vec!["splitting.csv", "perturb.json"];
    let mut slope = None;
    if !a.residual_r.is_empty() {
        let first = first_order_vector(a.fo_level, a.fo_index, &st.params, a.fo_cutoff, a.fo_tail_tol)?;
        let mut ft = Table::new(["r", "residual"]);
        let mut res = Vec::new();
        for &r in &a.residual_r {
            let v = first_order_residual(&st.params, &first, a.fo_cutoff, r)?;
            ft.push(vec![r.into(), v.into()])?;
            res.push(v);
        }
        ft.write(&out.join("first_order.csv"))?;
        outputs.push("first_order.csv");
        if res.len() >= 2 {
            slope = Some(loglog_slope(&a.residual_r, &res)?);
        }
    }
    write_json(&out.join("perturb.json"), &serde_json::json!({ "levels": summary, "residual_slope": slope }))?;
    verdict(&outputs, failures)
}

#[derive(Args, Debug, Serialize)]
pub struct EnsembleArgs {
    /// Excitation depth of the many-body basis
    #[arg(long, default_value_t = 2)]
    pub nmax: u32,
    /// special or full
    #[arg(long, default_value = "full")]
    pub basis: String,
    /// Number of Gibbs-like draws (sub-streams ensemble/0, ensemble/1, ...)
    #[arg(long, default_value_t = 8)]
    pub draws: usize,
    /// End of the time grid in seconds; defaults to four periods of the unit gap
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 513)]
    pub samples: usize,
}

/// Trajectories of every draw on a shared grid.
fn synthesize(a: &EnsembleArgs, st: &Settings) -> Result<Vec<TrajectoryResult>> {
    let mode: BasisMode = a.basis.parse()?;
    if a.draws == 0 {
        return Err(Error::Validation("--draws must be at least 1".into()));
    }
    let basis = enumerate_basis(&st.params, a.nmax, mode, DEFAULT_BASIS_CAP)?;
    let table = table_for(&basis, &st.params)?;
    let x = x_operator(&basis, &st.params, &table);
    let period = 2.0 * std::f64::consts::PI / unit_gap_frequency(&st.params, &st.consts);
    let times = uniform_grid(a.t_end.unwrap_or(4.0 * period), a.samples)?;
    (0..a.draws)
        .map(|i| {
            let label = format!("ensemble/{i}");
            let draw =
                make_ensemble_labeled(&basis, &Profile::GibbsGaussian, beta_f64(st), st.seed, &label, &st.params)?;
            synthesize_trajectory(&draw, &x, &st.params, &st.consts, &times)
        })
        .collect()
}

#[derive(Args, Debug, Serialize)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
}

fn msd_table(trajs: &[TrajectoryResult]) -> Result<Table> {
    let ens = ensemble_msd(trajs)?;
    let first = &trajs[0];
    let mut t = Table::new(["lag", "msd_time_avg", "msd_ensemble"]);
    for (k, (lag, m)) in first.lags.iter().zip(&first.msd).enumerate() {
        t.push(vec![(*lag).into(), (*m).into(), ens[k].into()])?;
    }
    Ok(t)
}

fn trajectory(a: &TrajectoryArgs, st: &Settings, out: &Path) -> Result<Report> {
    let trajs = synthesize(&a.ensemble, st)?;
    let mut t = Table::new(["t", "x"]);
    for (time, x) in trajs[0].times.iter().zip(&trajs[0].x) {
        t.push(vec![(*time).into(), (*x).into()])?;
    }
    t.write(&out.join("trajectory.csv"))?;
    msd_table(&trajs)?.write(&out.join("msd.csv"))?;
    ok(&["trajectory.csv", "msd.csv"])
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    TimeAvg,
    Ensemble,
}

#[derive(Args, Debug, Serialize)]
pub struct DiffusionArgs {
    /// Read lag,msd_time_avg from this msd.csv instead of synthesizing trajectories
    #[arg(long)]
    pub msd: Option<PathBuf>,
    /// MSD column used for synthesized trajectories
    #[arg(long, value_enum, default_value = "ensemble")]
    pub estimator: Estimator,
    /// Observation window T in seconds; defaults to the largest lag
    #[arg(long)]
    pub t_obs: Option<f64>,
    /// Curvature tolerance relative to max|msd|/T²
    #[arg(long, default_value_t = DEFAULT_CURVATURE_TOLERANCE)]
    pub curvature_tol: f64,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
}

fn diffusion(a: &DiffusionArgs, st: &Settings, out: &Path) -> Result<Report> {
    let (lags, msd) = match &a.msd {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            let s = parse_msd_csv(&text)?;
            (s.x, s.y)
        }
        None => {
            let trajs = synthesize(&a.ensemble, st)?;
            let first = &trajs[0];
            match a.estimator {
                Estimator::TimeAvg => (first.lags.clone(), first.msd.clone()),
                Estimator::Ensemble => {
                    let ens = ensemble_msd(&trajs)?;
                    (first.lags.clone(), ens[..first.lags.len()].to_vec())
                }
            }
        }
    };
    let t_obs = a.t_obs.or_else(|| lags.last().copied()).ok_or_else(|| Error::Fit("empty MSD".into()))?;
    let result = diffusion_empirical(&lags, &msd, t_obs, a.curvature_tol)?;
    write_json(&out.join("diffusion.json"), &result)?;
    ok(&["diffusion.json"])
}

#[derive(Args, Debug, Serialize)]
pub struct CatsArgs {
    /// Numbers of light particles per side, comma separated
    #[arg(long = "Ns", value_delimiter = ',', default_value = "1,2,4,8")]
    pub ns: Vec<u32>,
    /// Excitation depth of the full basis
    #[arg(long, default_value_t = 1)]
    pub nmax: u32,
    #[arg(long, default_value_t = 64)]
    pub draws: usize,
    /// Grain diameter P in model length units
    #[arg(long, default_value_t = 1.0)]
    pub grain_diameter: f64,
    /// Observation time T in seconds
    #[arg(long, default_value_t = 1.0)]
    pub t_obs: f64,
    /// Diffusion constant D_diff used for the visible-motion test
    #[arg(long, default_value_t = 0.0)]
    pub d_diff: f64,
    #[arg(long, default_value_t = DEFAULT_BASIS_CAP)]
    pub cap: usize,
}

fn cats(a: &CatsArgs, st: &Settings, out: &Path) -> Result<Report> {
    let reports = dispersion_scaling(&st.params, &a.ns, a.nmax, beta_f64(st), a.draws, st.seed, a.cap)?;
    let mut dt = Table::new(["N", "beta", "dispersion", "Y", "fitted_exponent"]);
    let mut ct = Table::new(["N", "sqrt_dispersion", "cat_free", "visible_motion", "both", "n2_f", "g"]);
    for r in &reports {
        dt.push(vec![
            r.n_bodies.into(),
            r.beta.into(),
            r.dispersion.into(),
            r.y.into(),
            r.fitted_exponent.unwrap_or(f64::NAN).into(),
        ])?;
        let p = st.params.with_n_bodies(r.n_bodies)?;
        let v = cat_check(&p, r.dispersion, a.d_diff, a.grain_diameter, a.t_obs)?;
        ct.push(vec![
            r.n_bodies.into(),
            r.dispersion.sqrt().into(),
            v.cat_free.into(),
            v.visible_motion.into(),
            v.both.into(),
            v.n2_f.into(),
            v.g.into(),
        ])?;
    }
    dt.write(&out.join("dispersion.csv"))?;
    ct.write(&out.join("cats.csv"))?;
    ok(&["dispersion.csv", "cats.csv"])
}

#[derive(Args, Debug, Serialize)]
pub struct ScenarioArgs {
    /// Droplet volume in cm³
    #[arg(long, conflicts_with = "diameter")]
    pub volume: Option<f64>,
    /// Droplet diameter in cm (sphere); used when --volume is absent
    #[arg(long, default_value_t = 0.1)]
    pub diameter: f64,
    /// Grain mass M in grams
    #[arg(long, default_value_t = 1e-7)]
    pub grain_mass: f64,
}

fn scenario_cmd(a: &ScenarioArgs, st: &Settings, out: &Path) -> Result<Report> {
    let v = a.volume.unwrap_or_else(|| sphere_volume(a.diameter));
    let s = scenario(v, a.grain_mass, &st.consts)?;
    write_json(&out.join("scenario.json"), &s)?;
    ok(&["scenario.json"])
}

#[derive(Args, Debug, Serialize)]
pub struct BaselinesArgs {
    /// Grain radius in m
    #[arg(long, default_value_t = 2.12e-7)]
    pub grain_radius: f64,
    /// Fluid viscosity in Pa·s
    #[arg(long, default_value_t = 1.0e-3)]
    pub viscosity: f64,
    /// Grain density in kg/m³
    #[arg(long, default_value_t = 1194.0)]
    pub grain_density: f64,
    /// Fluid density in kg/m³
    #[arg(long, default_value_t = 1000.0)]
    pub fluid_density: f64,
    /// Harmonic trap frequency in rad/s for the trapped Langevin curve
    #[arg(long)]
    pub trap_omega: Option<f64>,
    /// End of the time grid in seconds
    #[arg(long, default_value_t = 1e-5)]
    pub t_end: f64,
    #[arg(long, default_value_t = 101)]
    pub samples: usize,
    /// Top of the Perrin height grid in m
    #[arg(long, default_value_t = 1e-4)]
    pub h_max: f64,
}

fn baselines(a: &BaselinesArgs, st: &Settings, out: &Path) -> Result<Report> {
    const G: f64 = 9.81;
    let c = &st.consts;
    let volume = 4.0 / 3.0 * std::f64::consts::PI * a.grain_radius.powi(3);
    let mass = volume * a.grain_density;
    let gamma = 6.0 * std::f64::consts::PI * a.viscosity * a.grain_radius;
    let grid = uniform_grid(a.t_end, a.samples)?;
    let free = langevin_msd(c, mass, gamma, None, &grid)?;
    let trapped = a.trap_omega.map(|w| langevin_msd(c, mass, gamma, Some(w), &grid)).transpose()?;
    let d = einstein_d(c, a.viscosity, a.grain_radius);
    let mut t = Table::new(["t", "langevin_free", "langevin_trapped", "einstein_2dt"]);
    for (i, &time) in grid.iter().enumerate() {
        let tr = trapped.as_ref().map_or(f64::NAN, |v| v[i]);
        t.push(vec![time.into(), free[i].into(), tr.into(), (2.0 * d * time).into()])?;
    }
    t.write(&out.join("baselines.csv"))?;
    let w_energy = mean_kinetic_energy(c);
    let heights = uniform_grid(a.h_max, a.samples)?;
    let profile = perrin_profile(1.0, volume, a.grain_density, a.fluid_density, G, w_energy, &heights);
    let mut pt = Table::new(["h", "relative_concentration"]);
    for (h, n) in heights.iter().zip(&profile) {
        pt.push(vec![(*h).into(), (*n).into()])?;
    }
    pt.write(&out.join("perrin.csv"))?;
    write_json(
        &out.join("baselines.json"),
        &serde_json::json!({
            "einstein_D": d,
            "mean_kinetic_energy": w_energy,
            "hbar_over_m": c.hbar_over_m(),
            "grain_mass_kg": mass,
            "friction": gamma,
            "perrin_half_height": perrin_height(2.0, volume, a.grain_density, a.fluid_density, G, w_energy),
        }),
    )?;
    ok(&["baselines.csv", "perrin.csv", "baselines.json"])
}

fn validate(out: &Path) -> Result<Report> {
    let outcomes = run_suite();
    let mut t = Table::new(["check", "passed", "detail"]);
    let mut failures = Vec::new();
    for o in &outcomes {
        println!("{} {} ({:.2} s) {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.seconds, o.detail);
        if !o.passed {
            failures.push(o.name.to_string());
        }
        t.push(vec![o.name.into(), o.passed.into(), o.detail.clone().into()])?;
    }
    t.write(&out.join("validate.csv"))?;
    verdict(&["validate.csv"], failures)
}
