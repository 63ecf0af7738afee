//! Config files, the command-line runner and reproducibility of results.

use std::path::{Path, PathBuf};
use std::process::Command;

use fcifem::experiments::{self, read_grid, ExperimentConfig, Problem};
use fcifem::par::Exec;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SMALL_PERIODIC: &str = r#"
problem = "periodic2d"
label = "small"

[periodic2d]
orders = [1]

[[periodic2d.series]]
label = "a"
n_z = [20, 40]
n_zeta = [2, 4]
"#;

const SMALL_TOKAMAK: &str = r#"
problem = "tokamak_convergence"

[tokamak]
n_r = 8
n_z = 8
n_zeta = 1
refinement = [4, 4, 4]

[convergence]
scale_factors = [1, 2]
reference = "analytic"
samples_rz = 2
samples_zeta = 2
"#;

#[test]
fn shipped_configs_load_validate_and_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg, "{}", path.display());
        n += 1;
    }
    assert!(n >= 6);
}

#[test]
fn overrides_change_nested_entries_and_reject_unknown_keys() {
    let cfg = ExperimentConfig::from_toml_str(SMALL_TOKAMAK).unwrap();
    let o = cfg
        .with_overrides(&["tokamak.n_r=12".into(), "convergence.scale_factors=[1, 3]".into()])
        .unwrap();
    assert_eq!(o.tokamak.n_r, 12);
    assert_eq!(o.convergence.scale_factors, vec![1, 3]);
    assert!(cfg.with_overrides(&["tokamak.no_such_key=1".into()]).is_err());
    assert!(cfg.with_overrides(&["missing_equals".into()]).is_err());
}

#[test]
fn run_writes_summary_config_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_fcifem"))
        .args(["run", "--threads", "1", "--seed", "5", "--override", "periodic2d.sample_factor=2"])
        .arg(write_config(dir.path(), SMALL_PERIODIC))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["problem"], "periodic2d");
    assert_eq!(summary["config"]["seed"], 5);
    assert!(summary["checks"].as_array().unwrap().iter().any(|c| c["name"] == "slope.o1.a"));
    let rerun = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(rerun.periodic2d.sample_factor, 2);
    let csv = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("rel_l2_error"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("timings.json").exists());
}

#[test]
fn bad_config_exits_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "problem = \"periodic2d\"\nbogus = 1\n");
    let status = Command::new(env!("CARGO_BIN_EXE_fcifem")).arg("run").arg(path).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn results_do_not_depend_on_the_execution_policy() {
    let mut cfg = ExperimentConfig::from_toml_str(SMALL_TOKAMAK).unwrap();
    cfg.exec = Exec::Sequential;
    let a = experiments::run(&cfg, None).unwrap();
    cfg.exec = Exec::Parallel;
    let b = experiments::run(&cfg, None).unwrap();
    assert_eq!(a.problem, Problem::TokamakConvergence);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn blended_solutions_vanish_on_the_walls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(SMALL_TOKAMAK).unwrap();
    let res = experiments::run(&cfg, Some(dir.path())).unwrap();
    let c = res.check("boundary_max").unwrap();
    assert!(c.pass && c.value <= 1e-10, "{c:?}");
}

#[test]
fn grid_files_carry_their_axes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Problem::CartesianCompare);
    cfg.cartesian.case = experiments::CartesianCase::TokamakFilament;
    cfg.cartesian.solve = true;
    cfg.cartesian.zeta_factor = 2;
    cfg.tokamak.n_r = 10;
    cfg.tokamak.n_z = 10;
    cfg.tokamak.refinement = [4, 4, 4];
    cfg.filament.voxel_shape = [6, 5, 4];
    experiments::run(&cfg, Some(dir.path())).unwrap();
    let (header, values) = read_grid(&dir.path().join("phi_voxels.csv")).unwrap();
    assert_eq!(values.len(), 6 * 5 * 4);
    assert!(header.iter().any(|(k, v)| k == "shape" && v == "6,5,4"));
    assert!(values.iter().all(|v| v.is_finite()));
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}
