use std::fs;
use std::path::Path;
use std::process::Command;

use polaron_kitaev::harness::{parse_config, run_scenario, RunOptions, CSV_HEADER};

fn simulate(config: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .arg(config)
        .args(extra)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn column(csv: &str, idx: usize) -> Vec<f64> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn config_error_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "bath.sigma = -1\n");
    let out = simulate(&cfg, &["--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("bath.sigma") && msg.contains("line 1"),
        "{msg}"
    );
}

#[test]
fn missing_calibration_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", "scenario = single\n");
    let out = simulate(&cfg, &["--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn health_abort_exits_with_three_and_leaves_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.conf",
        "bath.norm_scale = 3e4\nevolution.t_max = 0.5\nevolution.abort_min_eigenvalue = -1e-12\n",
    );
    let out = simulate(&cfg, &["--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let snapshot = dir.path().join("abort_trajectory.txt");
    let text = fs::read_to_string(&snapshot).unwrap();
    assert!(text.starts_with("reason = minimum eigenvalue"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("abort_trajectory.txt"));
}

#[test]
fn calibrate_then_run_single() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cal = dir.path().join("cal.txt");
    let cfg = write(dir.path(), "cal.conf", "scenario = calibrate\n");
    let out = simulate(
        &cfg,
        &["--output-dir", d, "--calibration", cal.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&cal).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("norm_scale = "));

    let run = write(
        dir.path(),
        "run.conf",
        "chain.j = 1\nevolution.t_max = 1\nevolution.abort_min_eigenvalue = -1\n",
    );
    let out = simulate(
        &run,
        &[
            "--output-dir",
            d,
            "--calibration",
            cal.to_str().unwrap(),
            "--threads",
            "1",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    let meta = fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
    assert!(meta.contains("config_sha1 = "));
    assert!(meta.contains("wall_clock_seconds = "));
    assert!(meta.contains("initial_parity = "));
    assert!(meta.contains("bath.sigma = 0.6  # default"));
    assert!(meta.contains("chain.j = 1\n"));
}

#[test]
fn uncoupled_single_run_is_flat_and_deterministic() {
    let text = "bath.f_ph = 0\nbath.norm_scale = 1\nchain.j = 1\nevolution.t_max = 5\noutput_stride = 50\n";
    let cfg = parse_config(text).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let opts = RunOptions {
            output_dir: Some(dir.path().to_path_buf()),
            config_text: text.into(),
            ..RunOptions::default()
        };
        run_scenario(&cfg, &opts).unwrap();
    }
    let csv_a = fs::read(a.path().join("trajectory.csv")).unwrap();
    let csv_b = fs::read(b.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let csv = String::from_utf8(csv_a).unwrap();
    for th in column(&csv, 1) {
        assert!((th - 1.0).abs() < 1e-8);
    }
}

#[test]
fn compare_variants_share_time_grid() {
    let text = "scenario = compare_variants\nbath.norm_scale = 3e4\nchain.j = 1\nevolution.t_max = 2\nevolution.abort_min_eigenvalue = -1\n";
    let cfg = parse_config(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        output_dir: Some(dir.path().to_path_buf()),
        config_text: text.into(),
        ..RunOptions::default()
    };
    let report = run_scenario(&cfg, &opts).unwrap();
    assert_eq!(report.results.len(), 4);
    let names = [
        "full_memory",
        "markovian_limit",
        "lindblad",
        "unitary_quench",
    ];
    let grids: Vec<Vec<f64>> = names
        .iter()
        .map(|n| {
            column(
                &fs::read_to_string(dir.path().join(format!("variant_{n}.csv"))).unwrap(),
                0,
            )
        })
        .collect();
    for g in &grids[1..] {
        assert_eq!(g, &grids[0]);
    }
    let summary = fs::read_to_string(dir.path().join("variants_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    let meta = fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
    assert!(meta.contains("lindblad_rate = "));
    assert!(meta.contains("quench_oracle_theta = "));
}

#[test]
fn sweep_summary_keeps_configured_order() {
    let text = "scenario = u_sweep\nsweep_values = 0.1, -0.1\nbath.norm_scale = 3e4\nchain.j = 1\nevolution.t_max = 1\nevolution.abort_min_eigenvalue = -1\n";
    let cfg = parse_config(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        output_dir: Some(dir.path().to_path_buf()),
        config_text: text.into(),
        ..RunOptions::default()
    };
    run_scenario(&cfg, &opts).unwrap();
    let summary = fs::read_to_string(dir.path().join("u_sweep_summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "u,B,theta_inf,converged");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.00000000000000e-1"));
    assert!(lines[2].starts_with("-1.00000000000000e-1"));
    assert!(dir.path().join("u_0.1.csv").exists());
    assert!(dir.path().join("u_-0.1.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let text = fs::read_to_string(&path).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert_eq!(seen, 4);
}
