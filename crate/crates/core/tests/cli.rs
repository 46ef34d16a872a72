use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_vlasov-hermite");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        r#"
schema_version = 1

[case]
kind = "near_equilibrium"
alpha = 0.5

[scheme]
lambda = 0.2
dt = 0.02
t_final = 0.4
n_x = 21
n_h = 8

[output]
snapshot_times = [0.2]
v_grid = { min = -4.0, max = 4.0, points = 9 }
"#,
    )
    .unwrap();
    path
}

#[test]
fn list_presets_names_every_preset() {
    let out = cli(&["list-presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig10", "fig11", "fig13", "ap", "fig20", "fig30", "fig40", "steady"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn run_writes_outputs_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = cli(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv_a = fs::read(a.join("diagnostics.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("diagnostics.csv")).unwrap());
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 22);
    assert_eq!(
        fs::read(a.join("snapshots/f_step0000010.txt")).unwrap(),
        fs::read(b.join("snapshots/f_step0000010.txt")).unwrap()
    );
    assert!(a.join("snapshots/x.txt").exists() && a.join("snapshots/v.txt").exists());
    let meta = fs::read_to_string(a.join("metadata.toml")).unwrap();
    assert!(meta.contains("code_version") && meta.contains("n_steps = 20"));
    assert!(!a.join("INCOMPLETE").exists());
}

#[test]
fn overrides_reach_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("o");
    let out = cli(&[
        "run",
        "--preset",
        "steady",
        "--out",
        out_dir.to_str().unwrap(),
        "--override",
        "scheme.t_final=0.3",
        "--override",
        "scheme.order=1",
    ]);
    assert!(out.status.success());
    let meta: toml::Table = fs::read_to_string(out_dir.join("metadata.toml")).unwrap().parse().unwrap();
    assert_eq!(meta["config"]["scheme"]["order"].as_integer(), Some(1));
    assert_eq!(meta["derived"]["n_steps"].as_integer(), Some(3));
}

#[test]
fn config_errors_exit_with_config_category() {
    let out = cli(&["run", "--preset", "fig10", "--override", "scheme.n_x=64"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("[config]") && err.contains("checkerboard"), "{err}");

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[case]\nkind = \"two_stream\"\ncolor = 3\n").unwrap();
    let out = cli(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("case.color"));

    let out = cli(&["run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = cli(&["run", "--config", "/nonexistent/dir/cfg.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("[io]"));
}

#[test]
fn ap_sweep_records_blow_up_without_failing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["ap-sweep", "--preset", "fig13", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("ap_sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(table.lines().nth(1).unwrap().contains("completed"));
    assert!(table.contains("diverged"));
}

#[test]
fn diverging_single_run_keeps_its_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&[
        "run",
        "--preset",
        "fig13",
        "--override",
        "scheme.lambda=0.1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8(out.stderr).unwrap().contains("[diverged]"));
    let meta = fs::read_to_string(tmp.path().join("metadata.toml")).unwrap();
    assert!(meta.contains("outcome = \"diverged\""));
    assert!(!tmp.path().join("INCOMPLETE").exists());
}

#[test]
fn convergence_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("conv");
    let out = cli(&[
        "convergence",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--override",
        "sweep.lambdas=[0.4, 0.2, 0.1]",
        "--override",
        "sweep.dt_max=0.004",
        "--override",
        "sweep.dts=[0.1, 0.05]",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "alpha,lambda,dt,outcome,steps,max_err0,max_err1");
    assert_eq!(table.lines().count(), 4);
    assert!(table.contains(",0.004,"));
    let slopes = fs::read_to_string(out_dir.join("slopes.csv")).unwrap();
    assert_eq!(slopes.lines().count(), 2);
    let study = fs::read_to_string(out_dir.join("time_convergence.csv")).unwrap();
    assert_eq!(study.lines().count(), 7);
    assert!(out_dir.join("alpha0.5_lambda0.4/diagnostics.csv").exists());
}
