use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kimura(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kimura"))
        .args(args)
        .env_remove(kimura_cli::OUTPUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

const SMALL: &[&str] = &["--cells", "40", "--tau", "0.01", "--t-final", "0.2", "--output-every", "2"];

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--output-dir", dir.to_str().unwrap(), "--no-timestamp"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    kimura(&args)
}

#[test]
fn run_output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_into(a.path(), &["--ic", "gaussian"]).status.success());
    assert!(run_into(b.path(), &["--ic", "gaussian"]).status.success());
    for name in ["timeseries.csv", "snapshot_0.2.csv", "timeseries.svg", "snapshot.svg"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn timeseries_schema() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_into(dir.path(), &[]).status.success());
    let text = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,a,b,mass,moment1,energy,rho_delta,rho_one_minus_delta,min_entry,l2_bulk");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    // records at t = 0, every second step of 20, so 11 rows
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert_eq!(r.len(), 10);
        assert!((r[3] - 1.0).abs() < 1e-12);
    }
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[10][0] - 0.2).abs() < 1e-12);
    let snap = fs::read_to_string(dir.path().join("snapshot_0.2.csv")).unwrap();
    let head: Vec<&str> = snap.lines().take(3).collect();
    assert!(head[0].starts_with("# a=") && head[1].starts_with("# b=") && head[2] == "x,rho");
    assert_eq!(snap.lines().count(), 3 + 41);
}

#[test]
fn timestamp_line_is_the_only_difference() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_into(a.path(), &[]).status.success());
    let mut args = vec!["run", "--output-dir", b.path().to_str().unwrap()];
    args.extend_from_slice(SMALL);
    assert!(kimura(&args).status.success());
    let plain = fs::read_to_string(a.path().join("timeseries.csv")).unwrap();
    let stamped = fs::read_to_string(b.path().join("timeseries.csv")).unwrap();
    let (first, rest) = stamped.split_once('\n').unwrap();
    assert!(first.starts_with("# generated-at "));
    assert_eq!(rest, plain);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\ncells = 40\ntau = 0.01\nt_final = 0.2\nepsilon = 0.5\nic = step\n").unwrap();
    let out = dir.path().join("out");
    let status = kimura(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--t-final",
        "0.1",
        "--output-dir",
        out.to_str().unwrap(),
        "--no-timestamp",
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let last = text.lines().last().unwrap();
    assert_eq!(last.split(',').next().unwrap(), "0.1");
    assert!(out.join("snapshot_0.1.csv").is_file());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--no-timestamp"];
    args.extend_from_slice(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_kimura"))
        .args(&args)
        .env(kimura_cli::OUTPUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("timeseries.csv").is_file());
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "cells = 40\ncolour = blue\n").unwrap();
    let out = dir.path().join("out");
    let o = kimura(&["run", "--config", bad.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert!(!out.exists());

    assert_eq!(run_into(dir.path(), &["--delta", "0.7"]).status.code(), Some(1));
    assert_eq!(run_into(dir.path(), &["--ic", "gaussian", "--sigma", "-1"]).status.code(), Some(1));
    assert_eq!(kimura(&["run", "--no-such-flag"]).status.code(), Some(1));

    let suite_cfg = dir.path().join("suite.cfg");
    fs::write(&suite_cfg, "profile = huge\n").unwrap();
    assert_eq!(kimura(&["suite", "--config", suite_cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn unreadable_config_exits_4() {
    assert_eq!(kimura(&["run", "--config", "/nonexistent/run.cfg"]).status.code(), Some(4));
}

#[test]
fn unwritable_output_exits_4_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = run_into(&blocker.join("out"), &[]);
    assert_eq!(o.status.code(), Some(4));

    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let ro = dir.path().join("readonly");
        fs::create_dir(&ro).unwrap();
        fs::set_permissions(&ro, fs::Permissions::from_mode(0o555)).unwrap();
        // privileged users can write regardless of mode bits
        let writable = fs::write(ro.join("probe"), "x").is_ok();
        let _ = fs::remove_file(ro.join("probe"));
        if !writable {
            let o = run_into(&ro, &[]);
            assert_eq!(o.status.code(), Some(4));
            assert_eq!(fs::read_dir(&ro).unwrap().count(), 0);
        }
        fs::set_permissions(&ro, fs::Permissions::from_mode(0o755)).unwrap();
    }
}

#[test]
fn overflowing_initial_data_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--ic", "step", "--left", "1e308", "--right", "1e308"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("overflows"));
}

#[test]
fn equilibrium_and_wf_queries() {
    let o = kimura(&["equilibrium", "--epsilon", "1e-3", "--delta", "1e-3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mass: f64 = text.lines().find_map(|l| l.strip_prefix("boundary_mass=")).unwrap().parse().unwrap();
    assert!((mass - 0.9999931).abs() < 1e-7);
    assert!(text.contains("A=0\n"));

    let o = kimura(&["wf", "row", "--two-n", "2", "--i", "1"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "0.25,0.5,0.25");

    let o = kimura(&["wf", "absorption", "--two-n", "4"]);
    let h: Vec<f64> = String::from_utf8(o.stdout).unwrap().trim().split(',').map(|v| v.parse().unwrap()).collect();
    for (i, v) in h.iter().enumerate() {
        assert!((v - i as f64 / 4.0).abs() < 1e-14);
    }

    let a = kimura(&["wf", "sample", "--two-n", "50", "--i0", "25", "--generations", "30", "--seed", "9"]);
    let b = kimura(&["wf", "sample", "--two-n", "50", "--i0", "25", "--generations", "30", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().trim().split(',').count(), 31);

    assert_eq!(kimura(&["wf", "absorption", "--two-n", "0"]).status.code(), Some(1));
}

#[test]
fn converge_reports_second_order() {
    let o = kimura(&[
        "converge", "--cells", "200", "--taus", "0.04,0.02,0.01", "--tau-ref", "0.0025", "--levels", "25,50,100", "--n-ref",
        "400", "--t-probe", "0.2", "--delta", "0.01", "--epsilon", "0.01",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let order: f64 =
        text.lines().find_map(|l| l.strip_prefix("# temporal fitted order ")).unwrap().trim().parse().unwrap();
    assert!((1.7..=2.3).contains(&order), "{text}");
    assert_eq!(kimura(&["converge", "--taus", "0.01,0.01,0.01"]).status.code(), Some(1));
}
