//! CLI acceptance: byte-identical artifacts for repeated seeded runs, plus
//! end-to-end exercises of every subcommand and the documented exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn dynasty() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynasty"))
}

fn write_config(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn seeded_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "seeded.json",
        r#"{
            "population": {"generator": {
                "n": 12,
                "alpha_distribution": {"kind": "uniform", "lo": 0.2, "hi": 0.8},
                "w_init": "egalitarian"
            }},
            "transfer": {"kind": "power", "k": 0.5, "scale": 1.0},
            "options": {"seed": 42}
        }"#,
    )
}

fn step_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        "step.json",
        r#"{
            "population": {"agents": [[1.0, 0.5], [1.0, 0.5], [1.0, 0.5], [1.0, 0.5]]},
            "transfer": {"kind": "step", "levels": [[0.0, 0.01], [0.5, 1.0]]},
            "options": {"w_min": 0.3, "w_max": 2.0, "grid_points": 400}
        }"#,
    )
}

#[test]
fn criterion_11_verify_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = seeded_config(tmp.path());

    let mut artifacts: Vec<Vec<u8>> = Vec::new();
    for (run, threads) in [("run1", "1"), ("run2", "1"), ("run3", "4")] {
        let out = tmp.path().join(run);
        let status = dynasty()
            .args(["verify", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("DYNASTY_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success(), "verify failed on {run}");
        artifacts.push(std::fs::read(out.join("verify.json")).unwrap());
    }
    assert_eq!(artifacts[0], artifacts[1], "same seed must give identical bytes");
    assert_eq!(
        artifacts[0], artifacts[2],
        "thread count must not change the report"
    );

    // CSV artifacts are byte-stable too.
    let mut orbits: Vec<Vec<u8>> = Vec::new();
    for run in ["trap1", "trap2"] {
        let out = tmp.path().join(run);
        let status = dynasty()
            .args(["trap", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--alpha", "0.5"])
            .status()
            .unwrap();
        assert!(status.success());
        orbits.push(std::fs::read(out.join("trap_orbit.csv")).unwrap());
    }
    assert_eq!(orbits[0], orbits[1]);
    println!("criterion 11 (seeded verify runs byte-identical): PASS");
}

#[test]
fn verify_exits_zero_on_consistent_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "square.json",
        r#"{
            "population": {"agents": [[1.0, 0.5], [1.0, 0.5], [1.0, 0.5], [1.0, 0.5]]},
            "transfer": {"kind": "power", "k": 2.0, "scale": 1.0}
        }"#,
    );
    let out = tmp.path().join("out");
    let status = dynasty()
        .args(["verify", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(out.join("verify.json")).unwrap();
    assert!(report.contains("\"consistent\": true"));
}

#[test]
fn trap_reports_the_step_example() {
    let tmp = tempfile::tempdir().unwrap();
    let config = step_config(tmp.path());
    let out = tmp.path().join("out");
    let status = dynasty()
        .args(["trap", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(out.join("trap.json")).unwrap();
    assert!(report.contains("\"trapped\": true"));
    assert!(report.contains("\"final_ratio\": 1.0000000000000000e-2"));
    let orbit = std::fs::read_to_string(out.join("trap_orbit.csv")).unwrap();
    assert!(orbit.starts_with("generation,w_probe,ratio\n"));
}

#[test]
fn equilibrium_reports_one_iteration_for_linear_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "linear.json",
        r#"{
            "population": {"agents": [[1.0, 0.5], [1.0, 0.5], [1.0, 0.5]]},
            "transfer": {"kind": "linear", "scale": 1.0}
        }"#,
    );
    let out = tmp.path().join("out");
    let status = dynasty()
        .args(["equilibrium", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(out.join("equilibrium.json")).unwrap();
    assert!(report.contains("\"converged\": true"));
    assert!(report.contains("\"iterations\": 1"));
    assert!(report.contains("\"residual\": 0.0000000000000000e0"));
}

#[test]
fn effort_curve_then_infer_t_round_trips_the_step_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let config = step_config(tmp.path());
    let out = tmp.path().join("out");
    let status = dynasty()
        .args(["effort-curve", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let jumps = std::fs::read_to_string(out.join("effort_curve_jumps.json")).unwrap();
    assert!(jumps.contains("w0"));

    let status = dynasty()
        .args(["infer-t", "--table"])
        .arg(out.join("effort_curve.csv"))
        .arg("--jumps")
        .arg(out.join("effort_curve_jumps.json"))
        .args(["--alpha", "0.5", "--anchor-y", "0", "--anchor-t", "0.01"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let inferred = std::fs::read_to_string(out.join("inferred_t.csv")).unwrap();
    let mut lines = inferred.lines();
    assert_eq!(lines.next(), Some("y,T"));
    let first: f64 = lines
        .next()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let last: f64 = inferred
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    let ratio = last / first;
    assert!(
        (ratio - 100.0).abs() <= 0.5,
        "recovered level ratio {ratio} should be close to 100"
    );
}

#[test]
fn remaining_subcommands_produce_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "square.json",
        r#"{
            "population": {"agents": [[1.0, 0.5], [1.0, 0.5], [1.0, 0.5], [1.0, 0.5]]},
            "transfer": {"kind": "power", "k": 2.0, "scale": 1.0},
            "options": {"w_min": 0.4, "w_max": 2.0, "grid_points": 128}
        }"#,
    );
    let out = tmp.path().join("out");
    for (cmd, artifact) in [
        ("simulate", "trajectory.csv"),
        ("merit", "merit.json"),
        ("rat-race", "rat_race.json"),
        ("stability", "stability.json"),
        ("figure-data", "figure_tangency.csv"),
    ] {
        let status = dynasty()
            .args([cmd, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--generations", "3"])
            .status()
            .unwrap();
        assert!(status.success(), "{cmd} failed");
        assert!(out.join(artifact).exists(), "{artifact} missing");
    }
    let trajectory = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("generation,agent_id,alpha,w,x,investment,T,r\n"));
    // 4 agents x 4 generations (0..=3) plus header.
    assert_eq!(trajectory.lines().count(), 1 + 16);
    let stability = std::fs::read_to_string(out.join("stability.json")).unwrap();
    assert!(stability.contains("\"stable\": false"));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    // Missing --config.
    let status = dynasty().arg("equilibrium").arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(2));

    // Unbalanced endowments.
    let bad = write_config(
        tmp.path(),
        "bad.json",
        r#"{
            "population": {"agents": [[1.0, 0.5], [0.5, 0.5]]},
            "transfer": {"kind": "linear", "scale": 1.0}
        }"#,
    );
    let status = dynasty()
        .args(["equilibrium", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Random generator without a seed.
    let unseeded = write_config(
        tmp.path(),
        "unseeded.json",
        r#"{
            "population": {"generator": {
                "n": 4,
                "alpha_distribution": {"kind": "uniform", "lo": 0.2, "hi": 0.8}
            }},
            "transfer": {"kind": "linear", "scale": 1.0}
        }"#,
    );
    let status = dynasty()
        .args(["equilibrium", "--config"])
        .arg(&unseeded)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_3_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    // Winner-take-all divergence: stability requires convergence.
    let config = write_config(
        tmp.path(),
        "diverging.json",
        r#"{
            "population": {"agents": [[1.2, 0.5], [0.8, 0.5]]},
            "transfer": {"kind": "power", "k": 2.0, "scale": 1.0}
        }"#,
    );
    let out = tmp.path().join("out");
    let status = dynasty()
        .args(["stability", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    // The equilibrium report is still written for inspection.
    let report = std::fs::read_to_string(out.join("equilibrium.json")).unwrap();
    assert!(report.contains("\"converged\": false"));
}
