use std::path::Path;
use std::process::{Command, Output};

const SERIES_HEADER: &str = "t,mean_energy,sem_energy,mean_infidelity,sem_infidelity,n_alive";

fn ffprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffprep")).args(args).env_remove("FFPREP_THREADS").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ffprep(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const MINIMAL: &str = r#"
[model]
name = "heisenberg_chain"
parameters = { n = 8 }

[protocol]
max_rounds = 30

[ensemble]
n_trajectories = 20
master_seed = 7
"#;

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn minimal_run_writes_series_fits_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let out = tmp.path().join("out");
    ok(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let mut names: Vec<String> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["fits.json", "manifest.json", "series.csv"]);
    let csv = std::fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SERIES_HEADER));
    assert_eq!(lines.count(), 31);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "run");
    assert_eq!(m["config"]["ensemble"]["master_seed"], 7);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    ok(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "2"]);
    let read = |d: &Path| std::fs::read(d.join("series.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn seed_flag_overrides_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    ok(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "8"]);
    let read = |d: &Path| std::fs::read(d.join("series.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    assert_eq!(json(&b.join("manifest.json"))["config"]["ensemble"]["master_seed"], 8);
}

#[test]
fn manifest_reproduces_its_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), MINIMAL);
    let a = tmp.path().join("a");
    ok(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]);
    let b = tmp.path().join("b");
    ok(&["run", "--config", a.join("manifest.json").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    let read = |d: &Path| std::fs::read(d.join("series.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn json_format_writes_series_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{MINIMAL}\n[output]\nformats = [\"csv\", \"json\"]\n"));
    let out = tmp.path().join("out");
    ok(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let s = json(&out.join("series.json"));
    assert_eq!(s["t"].as_array().unwrap().len(), 31);
}

#[test]
fn unknown_model_lists_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\nname = \"ising\"\nparameters = {}\n");
    let out = ffprep(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["heisenberg_chain", "heisenberg_single_particle", "heisenberg_2d", "fredkin", "qdm", "cluster_ising"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{MINIMAL}\n[extra]\nx = 1\n"));
    let out = ffprep(&["run", "--config", &cfg]);
    assert!(!out.status.success());
    let cfg = write_config(tmp.path(), "[model]\nname = \"fredkin\"\nparameters = { n = 8, m = 2 }\n");
    let out = ffprep(&["run", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown parameter `m`"));
}

#[test]
fn gap_reports_and_omits_fit_for_one_size() {
    let one: serde_json::Value = serde_json::from_str(&ok(&["gap", "--model", "heisenberg_chain", "--sizes", "8"])).unwrap();
    assert!(one["z_fit"]["omitted"].is_string(), "{one}");
    let gap = one["gaps"][0]["gap"].as_f64().unwrap();
    assert!((gap - (1.0 - (std::f64::consts::PI / 4.0).cos())).abs() < 1e-9);
    let many: serde_json::Value =
        serde_json::from_str(&ok(&["gap", "--model", "heisenberg_single_particle", "--sizes", "8,12,16,24"])).unwrap();
    let z = many["z_fit"]["z"].as_f64().unwrap();
    assert!((z - 2.0).abs() < 0.1, "{z}");
}

#[test]
fn figure_bundle_has_scaled_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig");
    ok(&["figure", "fig4b", "--trajectories", "10", "--out", out.to_str().unwrap()]);
    let fig = json(&out.join("figure.json"));
    assert_eq!(fig["id"], "fig4b");
    let csvs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    assert_eq!(csvs.len(), 2);
    for p in csvs {
        let header = std::fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with(SERIES_HEADER), "{header}");
        assert!(header.contains("x_scaled") && header.contains("y_scaled"));
    }
}

#[test]
fn unknown_figure_lists_ids() {
    let out = ffprep(&["figure", "fig9", "--out", tempfile::tempdir().unwrap().path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sm-markov"));
}

#[test]
fn markov_writes_its_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    ok(&["markov", "--length", "16", "--t-max", "40", "--trajectories", "50", "--out", out.to_str().unwrap()]);
    for f in ["series.csv", "exact.csv", "distributions.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("series.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with(SERIES_HEADER) && header.ends_with("mean_infidelity_bound"), "{header}");
}

#[test]
fn resetfree_reports_rate_and_detectability() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    ok(&[
        "resetfree", "--model", "heisenberg_chain", "--param", "n=8", "--rounds", "80", "--dl-trials", "10", "--out",
        out.to_str().unwrap(),
    ]);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["analysis"]["detectability"]["violations"], 0);
    assert!(m["analysis"]["late_rate"]["lam"].as_f64().unwrap() > 0.0);
    assert!(out.join("projection.csv").exists());
    assert!(out.join("correspondence.json").exists());
}

#[test]
fn thread_flag_and_env_are_accepted() {
    let out = Command::new(env!("CARGO_BIN_EXE_ffprep"))
        .args(["gap", "--model", "fredkin", "--sizes", "8"])
        .env("FFPREP_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = ffprep(&["gap", "--model", "fredkin", "--sizes", "8", "--threads", "zero"]);
    assert!(!bad.status.success());
}
