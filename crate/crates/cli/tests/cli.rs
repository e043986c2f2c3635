use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use saddleflow::certificates::{trajectory_monitor, CertificateKind, LyapunovReference};
use saddleflow::flows::{regularized_field, RegularizationConfig, StateLayout};
use saddleflow::integrate::{integrate, IntegratorConfig};
use saddleflow::problem::builtin;
use saddleflow_cli::{read_trajectory, write_trajectory, Flow, RunConfig};
use tempfile::TempDir;

fn saddleflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddleflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report_field(report: &str, key: &str) -> String {
    let prefix = format!("{key}: ");
    report
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in report:\n{report}"))
        .to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn regularized_bilinear_converges_with_vanishing_certificate() {
    let dir = TempDir::new().unwrap();
    let out = saddleflow(
        dir.path(),
        &["run", "--problem", "bilinear", "--flow", "regularized", "--out", "reg"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(dir.path(), "reg.report.txt");
    assert_eq!(report_field(&report, "stop"), "converged");
    for key in ["final_h1", "final_h2"] {
        let h: f64 = report_field(&report, key).parse().unwrap();
        assert!((0.0..=1e-8).contains(&h), "{key} = {h}");
    }
}

#[test]
fn plain_bilinear_reaches_the_horizon() {
    let dir = TempDir::new().unwrap();
    let out = saddleflow(
        dir.path(),
        &[
            "run",
            "--problem",
            "bilinear",
            "--flow",
            "plain",
            "--t-max",
            "100",
            "--out",
            "plain",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let report = read(dir.path(), "plain.report.txt");
    assert_eq!(report_field(&report, "stop"), "horizon-reached");
    // a report is written even without convergence
    let r: f64 = report_field(&report, "final_residual").parse().unwrap();
    assert!((r - 1.0).abs() < 1e-6);
}

#[test]
fn reproduce_command_lists_componentwise_distances() {
    let dir = TempDir::new().unwrap();
    let out = saddleflow(dir.path(), &["reproduce-paper", "--out", "example"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(dir.path(), "example.report.txt");
    let distances: Vec<f64> = report
        .lines()
        .filter(|l| l.starts_with("distance "))
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(distances.len(), 8);
    assert!(distances.iter().all(|&d| d <= 1e-2), "{distances:?}");
    assert_eq!(report_field(&report, "reproduced"), "yes");
    let dual_min: f64 = report_field(&report, "final_state_dual_min").parse().unwrap();
    assert!(dual_min >= 0.0);
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    let b = builtin("coupled-quadratic").unwrap();
    let cfg = RegularizationConfig::new(0.7).unwrap();
    let field = regularized_field(b.problem.clone(), cfg);
    let icfg = IntegratorConfig {
        t_max: 30.0,
        record_stride: 7,
        ..Default::default()
    };
    let (mut traj, _) = integrate(&field, &[0.3, -1.7, 2.9, 1.0 / 3.0], &icfg).unwrap();
    trajectory_monitor(
        &LyapunovReference::user(b.saddle.clone()),
        CertificateKind::Separable(cfg),
        &mut traj,
    )
    .unwrap();
    let path = dir.path().join("t.csv");
    write_trajectory(&traj, &path).unwrap();
    assert_eq!(read_trajectory(&path, traj.layout).unwrap(), traj);

    // without monitor values only the residual follows the state
    let (plain, _) = integrate(&field, &[1.0, 0.0, 0.0, 0.0], &icfg).unwrap();
    write_trajectory(&plain, &path).unwrap();
    assert_eq!(read_trajectory(&path, plain.layout).unwrap(), plain);
}

#[test]
fn every_row_has_one_column_per_header_field() {
    let dir = TempDir::new().unwrap();
    let cases: [(&str, &str, usize); 3] = [
        ("plain", "plain", 2),
        ("regularized", "reg", 4),
        ("proximal", "prox", 2),
    ];
    for (flow, prefix, dim) in cases {
        let out = saddleflow(
            dir.path(),
            &[
                "run",
                "--problem",
                "bilinear",
                "--flow",
                flow,
                "--t-max",
                "20",
                "--out",
                prefix,
            ],
        );
        assert!(matches!(out.status.code(), Some(0 | 2)), "{flow}");
        let csv = read(dir.path(), &format!("{prefix}.trajectory.csv"));
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(header.len(), 1 + dim + 4, "{flow}: {header:?}");
        assert_eq!(header[0], "t");
        assert_eq!(&header[1 + dim..], ["V", "h1", "h2", "residual"]);
        for line in lines {
            assert_eq!(line.split(',').count(), header.len());
        }
    }
    let csv = read(dir.path(), "reg.trajectory.csv");
    assert!(csv.starts_with("t,x1,z1,y1,w1,V,h1,h2,residual\n"));
}

#[test]
fn stationary_start_gives_identical_rows() {
    let dir = TempDir::new().unwrap();
    let out = saddleflow(
        dir.path(),
        &[
            "run",
            "--problem",
            "bilinear",
            "--flow",
            "plain",
            "--init",
            "0,0",
            "--out",
            "still",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = read(dir.path(), "still.trajectory.csv");
    let rows: Vec<&str> = csv.lines().skip(1).map(|l| l.split_once(',').unwrap().1).collect();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn identical_configs_write_identical_files() {
    let dir = TempDir::new().unwrap();
    let lp = dir.path().join("lp.txt");
    std::fs::write(&lp, "2 3\n1 1\n-1 0 0\n0 -1 0\n-1 -1 -2\n").unwrap();
    for prefix in ["a", "b"] {
        let out = saddleflow(
            dir.path(),
            &["distributed-lp", "--problem", "lp.txt", "--dt", "0.01", "--out", prefix],
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        std::fs::read(dir.path().join("a.trajectory.csv")).unwrap(),
        std::fs::read(dir.path().join("b.trajectory.csv")).unwrap()
    );
    let report = read(dir.path(), "a.report.txt");
    let objective: f64 = report_field(&report, "objective").parse().unwrap();
    assert!((objective - 2.0).abs() < 1e-4);
    assert_eq!(report_field(&report, "scheme"), "euler");
}

#[test]
fn solve_lp_reports_control_inputs() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("ctl.txt"),
        "# N M T\n2 1 2\n1.1 0\n-0.7 1.1\n1.5 0\n0 0\n1 1.5\n3\n6 10\n",
    )
    .unwrap();
    let out = saddleflow(dir.path(), &["solve-lp", "--problem", "ctl.txt", "--out", "ctl"]);
    assert_eq!(out.status.code(), Some(0));
    let report = read(dir.path(), "ctl.report.txt");
    let u0: Vec<f64> = report_field(&report, "u(0)")
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((u0[0] - 0.8190).abs() < 1e-2 && u0[1].abs() < 1e-2, "{u0:?}");
    assert!(report_field(&report, "variables").starts_with("x1=xp1_t1"));
}

#[test]
fn infeasible_lp_exits_as_divergent_with_a_report() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("inf.txt"), "1 2\n0\n1 -1\n-1 -1\n").unwrap();
    let out = saddleflow(
        dir.path(),
        &[
            "solve-lp",
            "--problem",
            "inf.txt",
            "--dt",
            "0.01",
            "--t-max",
            "200",
            "--out",
            "inf",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let report = read(dir.path(), "inf.report.txt");
    assert_eq!(report_field(&report, "stop"), "diverged");
    assert_eq!(report_field(&report, "final_h1"), "undefined");
}

fn usage_error(dir: &Path, args: &[&str], field: &str) {
    let out = saddleflow(dir, args);
    assert_eq!(out.status.code(), Some(1), "{args:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(field), "{args:?}: {stderr}");
}

#[test]
fn malformed_input_exits_one_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.cfg"), "problem = bilinear\nrho = abc\n").unwrap();
    usage_error(d, &["run", "--config", "bad.cfg"], "`rho`");
    std::fs::write(d.join("unknown.cfg"), "speed = 3\n").unwrap();
    usage_error(
        d,
        &["run", "--problem", "bilinear", "--config", "unknown.cfg"],
        "`speed`",
    );
    std::fs::write(d.join("neg.cfg"), "dt = -1\n").unwrap();
    usage_error(d, &["run", "--problem", "bilinear", "--config", "neg.cfg"], "`dt`");
    usage_error(d, &["run", "--problem", "no-such-problem"], "`problem`");
    usage_error(d, &["run", "--problem", "bilinear", "--flow", "projected"], "`flow`");
    usage_error(d, &["run", "--problem", "bilinear", "--init", "1,2,3"], "`init`");
    std::fs::write(d.join("lp.txt"), "1 1\n1\n-1 -1\n").unwrap();
    usage_error(
        d,
        &["distributed-lp", "--problem", "lp.txt", "--scheme", "rk4"],
        "`scheme`",
    );
    std::fs::write(d.join("broken.txt"), "2 1\n1 1\n1 x 3\n").unwrap();
    usage_error(d, &["solve-lp", "--problem", "broken.txt"], "line 3");
    usage_error(d, &["frobnicate"], "frobnicate");
    assert!(!d.join("saddleflow.report.txt").exists());
}

#[test]
fn config_file_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(
        &path,
        "# overrides\nflow = plain\nrho=0.5\nt_max = 12.5\nout = x/y\ninit = 1, -2\n",
    )
    .unwrap();
    let opts = saddleflow_cli::Options {
        problem: Some("bilinear".into()),
        flow: Some(Flow::Regularized),
        rho: Some(2.0),
        dt: Some(1e-2),
        config: Some(path),
        ..Default::default()
    };
    let cfg = RunConfig::from_options(&opts).unwrap();
    assert_eq!(cfg.flow, Some(Flow::Plain));
    assert_eq!(cfg.rho, Some(0.5));
    assert_eq!(cfg.dt, Some(1e-2));
    assert_eq!(cfg.t_max, Some(12.5));
    assert_eq!(cfg.init, Some(vec![1.0, -2.0]));
    assert_eq!(cfg.out, PathBuf::from("x/y"));
    assert_eq!(cfg.report_path(), PathBuf::from("x/y.report.txt"));
}

#[test]
fn export_rejects_an_empty_trajectory() {
    let dir = TempDir::new().unwrap();
    let traj = saddleflow::integrate::Trajectory::new(StateLayout::Plain { n: 1, m: 1 });
    assert!(write_trajectory(&traj, &dir.path().join("e.csv")).is_err());
}
