use std::path::Path;

use gevrey_core::par::Execution;
use gevrey_core::runner::{
    run_dir, run_pipeline, run_thresholds, ConfigError, Format, RunManifest, RunOptions, Scenario, Stage, BUILTIN_NAMES,
};

/// Same system, coarse enough to run the whole pipeline in about a second.
fn small(name: &str) -> Scenario {
    let mut sc = Scenario::builtin(name).unwrap();
    sc.name = format!("{}_small", sc.name);
    sc.grid.time_points = 2049;
    sc.grid.k_max = 6;
    sc.grid.directions = 2;
    sc.eps.prop = vec![0.125, 0.0625, 0.03125];
    sc.eps.scan_stride = 4;
    sc
}

fn opts(root: &Path) -> RunOptions {
    RunOptions::new(root)
}

fn read_manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn every_builtin_validates() {
    for name in BUILTIN_NAMES {
        let name = name.replace("(alpha)", "(0.5)");
        let sc = Scenario::load(&name).unwrap();
        sc.validate().unwrap();
    }
    assert!(matches!(Scenario::load("no_such_thing"), Err(ConfigError::Unknown(_))));
}

#[test]
fn scenario_files_load_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small("triple_degenerate");
    let toml_path = dir.path().join("s.toml");
    let json_path = dir.path().join("s.json");
    std::fs::write(&toml_path, sc.to_toml()).unwrap();
    std::fs::write(&json_path, sc.to_json()).unwrap();
    let a = Scenario::load(toml_path.to_str().unwrap()).unwrap();
    let b = Scenario::load(json_path.to_str().unwrap()).unwrap();
    assert_eq!(a, sc);
    assert_eq!(b, sc);
    assert_eq!(a.config_hash(), sc.config_hash());

    std::fs::write(&toml_path, sc.to_toml().replace("time_points = 2049", "time_points = 9")).unwrap();
    match Scenario::load(toml_path.to_str().unwrap()).unwrap().validate() {
        Err(ConfigError::Invalid { path, .. }) => assert_eq!(path, "grid.time_points"),
        other => panic!("expected a grid error, got {other:?}"),
    }
}

#[test]
fn reduce_writes_only_its_own_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small("wave_t2");
    let m = run_pipeline(&sc, Stage::Reduce, &opts(dir.path())).unwrap();
    assert_eq!(m.exit_code, 0);
    assert_eq!(m.stages.len(), 1);
    let names: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(names, ["reduce_summary.toml"]);
    let out = run_dir(dir.path(), &sc, Stage::Reduce);
    assert_eq!(read_manifest(&out), m);
    let doc: toml::Table = std::fs::read_to_string(out.join("reduce_summary.toml")).unwrap().parse().unwrap();
    assert_eq!(doc["pass"].as_bool(), Some(true));
}

#[test]
fn json_format_switches_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small("wave_t2");
    let mut o = opts(dir.path());
    o.format = Format::Json;
    let m = run_pipeline(&sc, Stage::Eigen, &o).unwrap();
    let out = run_dir(dir.path(), &sc, Stage::Eigen);
    for f in &m.files {
        assert!(f.path.ends_with(".json"), "{}", f.path);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(&f.path)).unwrap()).unwrap();
        assert!(v.is_object());
    }
    let eigen: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eigen.json")).unwrap()).unwrap();
    assert_eq!(eigen["columns"][0], "t");
}

#[test]
fn inadmissible_index_fails_the_energy_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = small("wave_t2");
    sc.s_values = vec![2.5];
    let m = run_pipeline(&sc, Stage::Solve, &opts(dir.path())).unwrap();
    assert_eq!(m.exit_code, 4);
    let last = m.stages.last().unwrap();
    assert_eq!(last.name, "energy-scan");
    assert!(last.error.as_deref().unwrap().contains("inadmissible"));
}

#[test]
fn bad_scenario_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = small("wave_t2");
    sc.data.delta0 = -1.0;
    let err = run_pipeline(&sc, Stage::Reduce, &opts(dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("data.delta0"), "{err}");
}

#[test]
fn runs_are_deterministic_across_execution_modes() {
    let sc = {
        let mut sc = small("triple_degenerate");
        sc.data.seed = Some(7);
        sc
    };
    let mut checksums = Vec::new();
    for exec in [Execution::Parallel, Execution::Sequential, Execution::Parallel] {
        let dir = tempfile::tempdir().unwrap();
        let mut o = opts(dir.path());
        o.exec = exec;
        let m = run_pipeline(&sc, Stage::Solve, &o).unwrap();
        checksums.push(m.files.iter().map(|f| (f.path.clone(), f.sha256.clone())).collect::<Vec<_>>());
    }
    assert_eq!(checksums[0], checksums[1]);
    assert_eq!(checksums[0], checksums[2]);
}

#[test]
fn strictly_hyperbolic_builtin_passes_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::builtin("constant_strict").unwrap();
    let m = run_pipeline(&sc, Stage::GevreyFit, &opts(dir.path())).unwrap();
    for st in &m.stages {
        assert!(st.pass, "{st:?}");
    }
    assert_eq!(m.exit_code, 0);
}

#[test]
fn threshold_table_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_thresholds(&[0.5, 1.0], &[1, 2, 3], &opts(dir.path())).unwrap();
    assert_eq!(m.exit_code, 0);
    let text = std::fs::read_to_string(dir.path().join("thresholds").join("thresholds.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,m,s_star,s_yuzawa,improvement"));
    assert_eq!(lines.count(), 6);
}
