use dbarlab::cli::THREADS_ENV;
use dbarlab::core_types::PotentialGrid;
use dbarlab::forward_dtn::DtNMatrix;
use dbarlab::stability_lab::records_from_csv;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &[&str] = &["--n-rho", "32", "--n-phi", "32", "--ls-n", "41", "--z-n", "16", "--n-max", "8", "--checkpoints", "0"];

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn dbarlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbarlab")).args(args).arg("--out").arg(out).env_remove(THREADS_ENV).output().unwrap()
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn dtn_of_zero_potential_is_bessel_ratio() {
    let t = tmp();
    let d = t.path();
    let o = dbarlab(&["dtn", "--zero-potential", "-E", "-1", "--n-max", "2", "--no-stamp"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let phi = DtNMatrix::from_csv(&read(d.join("dtn.csv"))).unwrap();
    // I₁(1)/I₀(1)
    assert!((phi.get(0, 0).re - 0.446_389_965_896_068_3).abs() < 1e-3, "{}", phi.get(0, 0));
    assert!(phi.get(0, 1).norm() < 1e-10);
}

#[test]
fn stamp_header_and_no_stamp_determinism() {
    let t = tmp();
    let d = t.path();
    dbarlab(&["dtn", "--zero-potential", "-E", "-1", "--n-max", "2"], d);
    assert!(read(d.join("dtn.csv")).starts_with("# generated "));
    dbarlab(&["dtn", "--zero-potential", "-E", "-1", "--n-max", "2", "--no-stamp"], d);
    let a = read(d.join("dtn.csv"));
    dbarlab(&["dtn", "--zero-potential", "-E", "-1", "--n-max", "2", "--no-stamp"], d);
    assert!(!a.starts_with('#'));
    assert_eq!(a, read(d.join("dtn.csv")));
}

#[test]
fn reconstruct_zero_data_gives_zero_potential() {
    let t = tmp();
    let d = t.path();
    let mut args = vec!["reconstruct", "--zero-potential", "-E", "-30", "--no-stamp"];
    args.extend_from_slice(SMALL);
    let o = dbarlab(&args, d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = PotentialGrid::from_pgrid(&read(d.join("reconstruction.pgrid"))).unwrap();
    assert!(v.values.iter().all(|&x| x == 0.0));
    assert!(d.join("reconstruction.json").exists());
}

#[test]
fn scatter_output_feeds_reconstruct() {
    let t = tmp();
    let d = t.path();
    let mut args = vec!["scatter", "-E", "-30", "--no-stamp", "--bump", "0,0,0.6,0.5,3"];
    args.extend_from_slice(SMALL);
    assert_eq!(dbarlab(&args, d).status.code(), Some(0));
    let data = d.join("scattering.csv");
    let mut args = vec!["reconstruct", "--no-stamp", "--data", data.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = dbarlab(&args, d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = PotentialGrid::from_pgrid(&read(d.join("reconstruction.pgrid"))).unwrap();
    assert!(v.values.iter().any(|&x| x.abs() > 0.1));
}

#[test]
fn stability_sweep_records_decreasing_delta() {
    let t = tmp();
    let d = t.path();
    let mut args = vec!["stability", "-E", "-30", "--sweep", "t=1e-1..1e-5", "--bump", "0.1,-0.05,0.7,1,3", "--perturb", "-0.2,0.2,0.5,1,3"];
    args.extend_from_slice(SMALL);
    let o = dbarlab(&args, d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = records_from_csv(&read(d.join("stability.csv"))).unwrap();
    assert_eq!(recs.len(), 5);
    assert!(recs.windows(2).all(|w| w[1].t < w[0].t && w[1].delta < w[0].delta));
    let report: serde_json::Value = serde_json::from_str(&read(d.join("stability.json"))).unwrap();
    assert_eq!(report["delta_strictly_decreasing"], true);
    assert!(read(d.join("stability.svg")).contains("<svg"));
}

#[test]
fn config_file_with_flag_override() {
    let t = tmp();
    let d = t.path();
    let cfg = d.join("run.json");
    std::fs::write(&cfg, r#"{"energies": [-1.0], "n_max": 1, "stamp": false, "zero_potential": true}"#).unwrap();
    let o = dbarlab(&["dtn", "--config", cfg.to_str().unwrap(), "--n-max", "3"], d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let phi = DtNMatrix::from_csv(&read(d.join("dtn.csv"))).unwrap();
    assert_eq!(phi.n_max, 3);
    assert_eq!(phi.energy, -1.0);
}

#[test]
fn usage_and_validation_errors_exit_2() {
    let t = tmp();
    let d = t.path();
    assert_eq!(dbarlab(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(dbarlab(&["dtn", "--n-max", "lots"], d).status.code(), Some(2));
    assert_eq!(dbarlab(&["dtn", "--zero-potential", "-E", "1"], d).status.code(), Some(2));
    assert_eq!(dbarlab(&["stability", "--sweep", "t=1..oops"], d).status.code(), Some(2));
    let bad = d.join("bad.json");
    std::fs::write(&bad, r#"{"no_such_field": 1}"#).unwrap();
    assert_eq!(dbarlab(&["dtn", "--config", bad.to_str().unwrap()], d).status.code(), Some(2));
    assert_eq!(dbarlab(&["dtn", "--potential", d.join("missing.pgrid").to_str().unwrap()], d).status.code(), Some(2));
}

#[test]
fn bad_thread_cap_exits_2() {
    let t = tmp();
    let d = t.path();
    let o = Command::new(env!("CARGO_BIN_EXE_dbarlab"))
        .args(["dtn", "--zero-potential", "-E", "-1", "--n-max", "1", "--out"])
        .arg(d)
        .env(THREADS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_dbarlab"))
        .args(["dtn", "--zero-potential", "-E", "-1", "--n-max", "1", "--out"])
        .arg(d)
        .env(THREADS_ENV, "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn dirichlet_resonance_exits_3() {
    // a radial well tuned so that −Δ + v + 1 is nearly singular on the disk
    let t = tmp();
    let d = t.path();
    let o = dbarlab(&["dtn", "-E", "-1", "--bump", "0,0,0.9,-12.72,3", "--n-max", "2"], d);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!d.join("dtn.csv").exists());
}
