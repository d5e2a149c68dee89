//! Scenario files, artifacts on disk and the command-line contract.

use std::path::Path;
use std::process::Command;

use cao_swarm::harness::output::{self, NumericTable};
use cao_swarm::harness::{run_scenario, ScenarioConfig};

const BIN: &str = env!("CARGO_BIN_EXE_cao-swarm");

fn scenarios() -> Vec<(&'static str, String)> {
    vec![
        ("quadratic", "testbed = \"synthetic-quadratic\"\nN = 3\niterations = 25\nseed = 2\n".into()),
        ("voronoi", "testbed = \"voronoi\"\nN = 4\niterations = 25\nseed = 2\n".into()),
        (
            "terrain",
            "testbed = \"terrain\"\nN = 3\niterations = 25\nseed = 2\n\n[[events]]\niteration = 10\naction = \"deactivate\"\nrobot = 1\n"
                .into(),
        ),
        ("persistent", "testbed = \"persistent\"\nN = 3\niterations = 25\nseed = 2\n".into()),
    ]
}

#[test]
fn artifacts_round_trip_through_csv() {
    for (name, text) in scenarios() {
        let cfg = ScenarioConfig::from_toml_str(&text).unwrap();
        let a = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        output::write_artifacts(&a, dir.path()).unwrap();
        for f in ["config.toml", "metrics.csv", "testbed_metrics.csv", "trajectory.csv", "summary.json", "agents.json"] {
            assert!(dir.path().join(f).exists(), "{name}: {f} missing");
        }

        let metrics = NumericTable::load(&dir.path().join("metrics.csv")).unwrap();
        assert_eq!(metrics.rows.len(), cfg.iterations, "{name}");
        assert_eq!(&metrics.header[..4], ["k", "global_cost", "true_cost_if_known", "active_count"]);
        let costs: Vec<f64> = metrics.column("global_cost").unwrap().into_iter().map(Option::unwrap).collect();
        let sum: f64 = costs.iter().sum();
        assert_eq!(sum.to_bits(), a.summary.sum_cost.to_bits(), "{name}: summed cost");
        assert_eq!(costs, a.costs(), "{name}: costs lose precision through the file");
        for row in &metrics.rows {
            assert!(row.iter().flatten().all(|v| v.is_finite()), "{name}: non-finite cell");
        }

        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["constraint_violations"], 0);

        let echo = ScenarioConfig::load(&dir.path().join("config.toml")).unwrap();
        assert_eq!(echo, a.config, "{name}: echo");
        let again = run_scenario(&echo).unwrap();
        assert_eq!(output::metrics_csv(&again).unwrap(), output::metrics_csv(&a).unwrap(), "{name}: echo rerun");
    }
}

#[test]
fn inactive_robots_leave_empty_cells() {
    let (_, text) = scenarios().remove(2);
    let a = run_scenario(&ScenarioConfig::from_toml_str(&text).unwrap()).unwrap();
    let t = NumericTable::parse(&output::metrics_csv(&a).unwrap()).unwrap();
    let delta = t.column("delta_1").unwrap();
    let x = t.column("x_1_0").unwrap();
    let active = t.column("active_count").unwrap();
    for k in 0..25 {
        assert_eq!(delta[k].is_none(), k >= 10);
        assert_eq!(x[k].is_none(), k >= 10);
        assert_eq!(active[k], Some(if k >= 10 { 2.0 } else { 3.0 }));
    }
}

#[test]
fn trajectory_has_a_row_per_robot_and_step_plus_the_end() {
    let (_, text) = scenarios().remove(0);
    let a = run_scenario(&ScenarioConfig::from_toml_str(&text).unwrap()).unwrap();
    let t = NumericTable::parse(&output::trajectory_csv(&a).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 3 * 26);
    assert_eq!(t.header, ["k", "robot", "active", "x_0", "x_1", "x_2"]);
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn cli_run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &scenarios()[1].1);
    let mut outputs = Vec::new();
    for out in ["a", "b"] {
        let status = Command::new(BIN)
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--seed", "9", "--out"])
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(dir.path().join(out).join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let echo = ScenarioConfig::load(&dir.path().join("a/config.toml")).unwrap();
    assert_eq!(echo.seed, 9);
}

#[test]
fn cli_mode_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &scenarios()[0].1);
    let status = Command::new(BIN)
        .args(["run", "--mode", "centralized", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("c"))
        .status()
        .unwrap();
    assert!(status.success());
    let echo = ScenarioConfig::load(&dir.path().join("c/config.toml")).unwrap();
    assert_eq!(echo.mode.as_str(), "centralized");
}

#[test]
fn cli_config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "testbed = \"voronoi\"\nN = 2\niterations = 5\nwhat = 1\n");
    let out = Command::new(BIN).args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("what"));

    let missing = Command::new(BIN).args(["run", "--config"]).arg(dir.path().join("nope.toml")).status().unwrap();
    assert_eq!(missing.code(), Some(2));

    let good = write(dir.path(), "good.toml", &scenarios()[0].1);
    let one_seed = Command::new(BIN).args(["study", "--seeds", "1..2", "--config"]).arg(&good).status().unwrap();
    assert_eq!(one_seed.code(), Some(2));
}

#[test]
fn cli_study_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &scenarios()[0].1);
    let out = Command::new(BIN)
        .args(["study", "--seeds", "0..3", "--sweep", "N=2,3", "--sweep", "mode=distributed,centralized", "--out"])
        .arg(dir.path().join("study.csv"))
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "N,mode,seeds,final_mean,final_ci95,sum_mean,sum_ci95,improvement_final,improvement_sum"
    );
    assert_eq!(lines.count(), 4);
    assert_eq!(std::fs::read_to_string(dir.path().join("study.csv")).unwrap(), text);
}

#[test]
fn cli_plot_writes_svgs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &scenarios()[1].1);
    assert!(Command::new(BIN).args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("r")).status().unwrap().success());
    let status = Command::new(BIN).args(["plot", "--metrics"]).arg(dir.path().join("r/metrics.csv")).status().unwrap();
    assert!(status.success());
    for f in ["cost.svg", "trajectories.svg"] {
        let svg = std::fs::read_to_string(dir.path().join("r").join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
