use std::process::Command;

use serde_json::json;
use trapwalk_cli::config::*;
use trapwalk_cli::report::embedded_config;
use trapwalk_cli::*;

fn tiny(id: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(id).unwrap();
    cfg.samples = 2000;
    cfg.spec = match cfg.spec {
        ExperimentSpec::Survival(_) => ExperimentSpec::Survival(SurvivalSpec { n_list: vec![8, 32], ..Default::default() }),
        ExperimentSpec::Eigen(_) => ExperimentSpec::Eigen(EigenSpec {
            radii: vec![3.0, 6.0],
            decay_radius: 4.0,
            decay_n: 500,
            ..Default::default()
        }),
        ExperimentSpec::Lyapunov(_) => ExperimentSpec::Lyapunov(LyapunovSpec {
            directions: vec![vec![1, 0]],
            n_list: vec![1, 2, 3],
            ..Default::default()
        }),
        ExperimentSpec::Ldp(_) => {
            cfg.model.n = 256;
            ExperimentSpec::Ldp(LdpSpec { n_list: vec![64, 256], sweeps: 30, beta_e1: Some(1.6), ..Default::default() })
        }
        ExperimentSpec::Confine(_) => {
            cfg.model.n = 256;
            ExperimentSpec::Confine(ConfineSpec {
                n_list: vec![64, 256],
                sweeps: vec![40, 40],
                beta_e1: Some(1.0),
                detect_every: 10,
                require_monotone: false,
                band: None,
                sandwich_trend: false,
                ..Default::default()
            })
        }
        ExperimentSpec::Detect(_) => ExperimentSpec::Detect(DetectSpec { rho_list: vec![6.0], seeds: 6, ..Default::default() }),
        ExperimentSpec::PinnedCompare(_) => {
            cfg.model.n = 4;
            ExperimentSpec::PinnedCompare(PinnedSpec {
                targets: vec![vec![0, 0], vec![2, 0]],
                cap: 6,
                fields: 3,
            })
        }
        ExperimentSpec::Suites(_) => ExperimentSpec::Suites(SuitesSpec { random_domains: 5, ..Default::default() }),
    };
    cfg
}

#[test]
fn defaults_validate_and_round_trip() {
    for id in ExperimentSpec::IDS {
        let cfg = ExperimentConfig::default_for(id).unwrap();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg, "{id}");
        assert_eq!(cfg.spec.id(), id);
    }
}

#[test]
fn minimal_config_fills_defaults() {
    let text = r#"{"schemaVersion":1,"experiment":"detect","model":{"d":2,"p":0.5,"n":100},"seed":3}"#;
    let cfg = ExperimentConfig::from_json(text).unwrap();
    assert_eq!(cfg.replicas, 1);
    assert_eq!(cfg.spec, ExperimentSpec::Detect(DetectSpec::default()));
}

#[test]
fn bad_configs_are_config_errors() {
    for text in [
        r#"{"schemaVersion":2,"experiment":"eigen","model":{"d":2,"p":0.5,"n":1},"seed":1}"#,
        r#"{"schemaVersion":1,"experiment":"nope","model":{"d":2,"p":0.5,"n":1},"seed":1}"#,
        r#"{"schemaVersion":1,"experiment":"eigen","model":{"d":2,"p":1.5,"n":1},"seed":1}"#,
        r#"{"schemaVersion":1,"experiment":"confine","settings":{"nList":[1,2],"sweeps":[3]},"model":{"d":2,"p":0.5,"n":1},"seed":1}"#,
    ] {
        let e = ExperimentConfig::from_json(text).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{text}: {e}");
    }
    assert_eq!(ExperimentConfig::default_for("nope").unwrap_err().exit_code(), 2);
}

#[test]
fn every_experiment_runs_small() {
    for id in ExperimentSpec::IDS {
        let cfg = tiny(id);
        let r = run_with_workers(&cfg, 1, &Cancel::new()).unwrap();
        assert!(r.complete, "{id}");
        assert!(!r.table.rows.is_empty(), "{id}");
        assert!(r.table.rows.iter().all(|row| row.len() == r.table.columns.len()), "{id}");
        assert_eq!(r.experiment, id);
    }
}

#[test]
fn outputs_embed_their_config() {
    let cfg = tiny("eigen");
    let r = run_with_workers(&cfg, 1, &Cancel::new()).unwrap();
    for f in [Format::Json, Format::Csv] {
        let text = r.render(f).unwrap();
        assert_eq!(embedded_config(&text).unwrap(), cfg);
    }
    let csv = r.to_csv().unwrap();
    assert!(csv.starts_with("# config: {"));
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, r.table.columns.join(","));
}

#[test]
fn replay_is_bit_exact_across_worker_counts() {
    for id in ["survival", "confine", "detect", "lyapunov"] {
        let cfg = tiny(id);
        let a = run_with_workers(&cfg, 1, &Cancel::new()).unwrap();
        let b = run_with_workers(&cfg, 3, &Cancel::new()).unwrap();
        assert_eq!(a.to_json(), b.to_json(), "{id}");
        let out = replay(&a.to_csv().unwrap(), 2, &Cancel::new()).unwrap();
        assert!(out.identical, "{id}: {:?}", out.first_difference);
    }
}

#[test]
fn replay_reports_first_difference() {
    let cfg = tiny("eigen");
    let r = run_with_workers(&cfg, 1, &Cancel::new()).unwrap();
    let tampered = r.to_json().replacen("\"complete\": true", "\"complete\": false", 1);
    let out = replay(&tampered, 1, &Cancel::new()).unwrap();
    assert!(!out.identical);
    assert!(out.first_difference.is_some());
}

#[test]
fn cancelled_run_is_marked_incomplete() {
    let cancel = Cancel::new();
    cancel.cancel();
    let r = run_with_workers(&tiny("detect"), 1, &cancel).unwrap();
    assert!(!r.complete);
    assert!(!r.passed());
    assert!(r.checks.iter().any(|c| c.name == "complete" && !c.passed));
}

#[test]
fn unbiased_confinement_is_symmetric() {
    let mut cfg = tiny("confine");
    cfg.model.drift = vec![0.0, 0.0];
    let r = run_with_workers(&cfg, 1, &Cancel::new()).unwrap();
    let c = r.checks.iter().find(|c| c.name == "projected-mean-symmetric").unwrap();
    assert!(c.passed, "{}", c.detail);
    assert_eq!(r.summary["supercritical"], json!(false));
}

#[test]
fn loose_eigen_tolerance_fails_decay_suite() {
    let mut cfg = tiny("suites");
    cfg.spec = ExperimentSpec::Suites(SuitesSpec { eigen_tol: 1e-1, random_domains: 5 });
    let r = run_with_workers(&cfg, 1, &Cancel::new()).unwrap();
    let failed: Vec<&str> = r.failed_checks().iter().map(|c| c.name.as_str()).collect();
    assert_eq!(failed, ["heat-kernel-decay"]);
}

#[test]
fn suite_ledger_is_stable_across_seeds() {
    for seed in 0..4 {
        let mut cfg = tiny("suites");
        cfg.seed = seed;
        let a = run_with_workers(&cfg, 1, &Cancel::new()).unwrap();
        let b = run_with_workers(&cfg, 2, &Cancel::new()).unwrap();
        assert!(a.passed(), "seed {seed}: {:?}", a.failed_checks());
        assert_eq!(a.to_json(), b.to_json());
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trapwalk"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eigen.csv");
    let st = bin()
        .args(["run", "--experiment", "eigen", "--format", "csv", "--workers", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let st = bin().args(["replay", "--workers", "2"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));

    let st = bin().args(["run", "--experiment", "eigen", "--p", "2"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().args(["run", "--experiment", "bogus"]).status().unwrap();
    assert_eq!(st.code(), Some(2));

    let mut cfg = tiny("suites");
    cfg.spec = ExperimentSpec::Suites(SuitesSpec { eigen_tol: 1e-1, random_domains: 3 });
    let path = dir.path().join("sentinel.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let o = bin().args(["run", "--workers", "1", "--config"]).arg(&path).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL heat-kernel-decay"));
}

#[test]
fn flags_override_config() {
    let o = bin()
        .args(["run", "--experiment", "survival", "--dim", "3", "--p", "0.8", "--seed", "9", "--samples", "500"])
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = embedded_config(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!((cfg.model.d, cfg.model.p, cfg.seed, cfg.samples), (3, 0.8, 9, 500));
    assert_eq!(cfg.model.drift(), vec![0.0; 3]);
}
