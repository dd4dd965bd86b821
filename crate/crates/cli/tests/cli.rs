use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use qw_core::io::{parse_float, Table};

fn qw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qw"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QW_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn read_table(path: &Path) -> Table {
    Table::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn spectrum_covers_ground_and_ten_levels() {
    let dir = tempfile::tempdir().unwrap();
    let o = qw(&["spectrum", "--s", "3/2", "--w", "1", "--nmax", "10"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_table(&dir.path().join("spectrum.csv"));
    assert_eq!(t.header, ["n", "mu_exact", "mu_float", "coeff_k", "coeff_value"]);
    let levels: BTreeSet<&str> = t.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(levels.len(), 11);
    // mu_n = 4wn + w(1+2s) with s = 3/2, w = 1
    let top = t.rows.iter().find(|r| r[0] == "10").unwrap();
    assert_eq!(top[1], "44");
    let m = manifest(dir.path());
    assert_eq!(m["command"], "spectrum");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 12345);
    assert_eq!(m["outputs"][0], "spectrum.csv");
}

#[test]
fn series_row_agrees_with_integral() {
    let dir = tempfile::tempdir().unwrap();
    let o = qw(&["series", "--which", "s3", "--u", "20", "--t", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_table(&dir.path().join("series.csv"));
    assert_eq!(t.rows.len(), 1);
    let direct = parse_float(&t.rows[0][4]).unwrap();
    let diff = parse_float(&t.rows[0][6]).unwrap();
    assert!(diff / direct.abs() < 1e-6);
}

#[test]
fn scenario_reaches_droplet_regime() {
    let dir = tempfile::tempdir().unwrap();
    let o = qw(&["scenario", "--volume", "5.24e-4", "--grain-mass", "1e-7"], dir.path());
    assert!(o.status.success());
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("scenario.json")).unwrap()).unwrap();
    let rn = s["rn"].as_f64().unwrap();
    assert!((rn / 5e3 - 1.0).abs() < 0.1, "rN = {rn}");
}

#[test]
fn usage_errors_exit_two_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = qw(&["spectrum", "--s", "abc"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--s"));
    let o = qw(&["spectrum", "--nmax", "ten"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--nmax"));
    let o = qw(&["no-such-command"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    // s must be half-odd and at least 3/2
    let o = qw(&["spectrum", "--s", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"w": "2", "seed": 7}"#).unwrap();
    let o = qw(&["spectrum", "--w", "1", "--seed", "3", "--nmax", "0", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_table(&dir.path().join("spectrum.csv"));
    assert_eq!(t.rows[0][1], "8");
    assert_eq!(manifest(dir.path())["seed"], 7);

    std::fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    let o = qw(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn precision_environment_variable_wins() {
    let dir = tempfile::tempdir().unwrap();
    let run = |bits: &str| {
        Command::new(env!("CARGO_BIN_EXE_qw"))
            .args(["scenario", "--precision-bits", "128", "--out"])
            .arg(dir.path())
            .env("QW_PRECISION_BITS", bits)
            .output()
            .unwrap()
    };
    assert!(run("512").status.success());
    assert_eq!(manifest(dir.path())["precision_bits"], 512);
    assert_eq!(run("lots").status.code(), Some(2));
    assert_eq!(run("8").status.code(), Some(2));
}

#[test]
fn trajectory_outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["trajectory", "--N", "2", "--nmax", "2", "--draws", "3", "--samples", "129", "--seed", "99"];
    assert!(qw(&args, a.path()).status.success());
    assert!(qw(&args, b.path()).status.success());
    for f in ["trajectory.csv", "msd.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let msd = read_table(&a.path().join("msd.csv"));
    assert_eq!(msd.header, ["lag", "msd_time_avg", "msd_ensemble"]);
    assert!(msd.rows.iter().all(|r| parse_float(&r[1]).unwrap() >= 0.0));
    let traj = read_table(&a.path().join("trajectory.csv"));
    assert_eq!(traj.header, ["t", "x"]);
    assert_eq!(traj.rows.len(), 129);
}

#[test]
fn diffusion_reads_an_msd_file() {
    let dir = tempfile::tempdir().unwrap();
    let msd = dir.path().join("linear.csv");
    let mut body = String::from("lag,msd_time_avg,msd_ensemble\n");
    for k in 0..20 {
        body.push_str(&format!("{k},{},0\n", 0.5 * k as f64));
    }
    std::fs::write(&msd, body).unwrap();
    let o = qw(&["diffusion", "--msd", msd.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("diffusion.json")).unwrap()).unwrap();
    assert!((d["D"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(d["criterion_met"], true);
    for key in ["curvature", "T", "cutoff"] {
        assert!(d.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn failed_check_exits_one_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = qw(&["oracle-eig", "--grid", "200", "--tol", "1e-9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_ne!(m["status"], "ok");
}

#[test]
fn perturb_and_validate_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = qw(&["perturb", "--N", "2", "--nmax", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_table(&dir.path().join("splitting.csv"));
    assert_eq!(t.header, ["level_n", "m_n", "correction_index", "lambda1", "lhg_bound", "coarse_bound"]);
    // level 0 holds only the ground state, whose first-order shift vanishes
    assert_eq!(parse_float(&t.rows[0][3]).unwrap(), 0.0);

    let v = tempfile::tempdir().unwrap();
    let o = qw(&["validate"], v.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let t = read_table(&v.path().join("validate.csv"));
    assert!(t.rows.iter().all(|r| r[1] == "true"));
}
