use std::process::Command;

use nodal_cli::config::{DomainKind, Mode, RunConfig};
use nodal_cli::run;
use nodal_cli::sweep::{sweep, Status};

fn tmp(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("nodal-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn torsion_mode_reports_interval_maximum() {
    let cfg = RunConfig {
        mode: Mode::Torsion,
        domain: DomainKind::Interval,
        p1: 2.0,
        p2: 2.0,
        n: 513,
        ..RunConfig::default()
    };
    let rep = run(&cfg).unwrap();
    assert!((rep.get_value("max_z1").unwrap() - 0.125).abs() <= 1e-8);
    assert!(rep.passed());
}

#[test]
fn machine_report_is_deterministic() {
    let cfg = RunConfig { n: 128, ..RunConfig::default() };
    let a = run(&cfg).unwrap().to_dat();
    let b = run(&cfg).unwrap().to_dat();
    assert_eq!(a, b);
    assert!(a.contains("seed=1"));
    for key in ["gamma1=", "omega2=", "l=", "L=", "L_hat=", "C1=", "delta0_1=", "mu="] {
        assert!(a.contains(key), "missing {key}");
    }
}

#[test]
fn sweep_rows_are_ordered_and_check_theta() {
    let cfg = RunConfig {
        mode: Mode::Sweep,
        n: 64,
        sweep_lambda: vec![2.0, 4.0],
        sweep_theta: vec![2.0, 8.0],
        sweep_delta: vec![0.25],
        ..RunConfig::default()
    };
    let t = sweep(&cfg).unwrap();
    assert_eq!(t.rows.len(), 4);
    let order: Vec<(f64, f64)> = t.rows.iter().map(|r| (r.lambda, r.theta)).collect();
    assert_eq!(order, vec![(2.0, 2.0), (2.0, 8.0), (4.0, 2.0), (4.0, 8.0)]);
    for r in t.rows.iter().filter(|r| r.theta == 2.0) {
        assert_eq!(r.precondition, Status::Fail);
    }
    assert_eq!(t, sweep(&cfg).unwrap());
}

#[test]
fn empty_sweep_is_an_empty_passing_table() {
    let cfg = RunConfig { mode: Mode::Sweep, n: 64, ..RunConfig::default() };
    let rep = run(&cfg).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.get_value("sweep.rows"), Some(0.0));
}

#[test]
fn verify_all_passes() {
    let cfg = RunConfig { mode: Mode::VerifyAll, n: 256, ..RunConfig::default() };
    let rep = run(&cfg).unwrap();
    for e in &rep.entries {
        assert!(e.report.passed(), "{}", e.report.to_text());
    }
}

#[test]
fn binary_writes_outputs_and_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_nodal");
    let out = tmp("torsion");
    let cfg = out.with_extension("toml");
    std::fs::write(&cfg, "domain = \"interval\"\np1 = 2.0\np2 = 2.0\nn = 65\n").unwrap();
    let st = Command::new(exe)
        .args(["torsion", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    for f in ["report.txt", "report.dat", "grid.tsv", "torsion.tsv", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(std::fs::read_to_string(out.join("report.dat")).unwrap().contains("seed=7"));

    std::fs::write(&cfg, "n = 3\n").unwrap();
    let st = Command::new(exe).args(["torsion", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(4));
    let _ = std::fs::remove_dir_all(&out);
    let _ = std::fs::remove_file(&cfg);
}
