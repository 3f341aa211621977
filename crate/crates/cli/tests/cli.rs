use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lpir::config::{Overrides, ProblemName};
use lpir::{load_config, parse_config, run, validate, ExperimentConfig, Kind, RunError};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn parse(text: &str) -> ExperimentConfig {
    parse_config(text, Path::new(".")).unwrap()
}

fn messages(cfg: &ExperimentConfig) -> Vec<String> {
    validate(cfg).iter().map(|d| d.to_string()).collect()
}

fn lpir(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lpir"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn shipped_configs_validate_clean() {
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap();
        if name == "sample_mdp.json" || path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let cfg = load_config(&path)
            .unwrap()
            .resolve(&Overrides::default())
            .unwrap();
        assert_eq!(messages(&cfg), Vec::<String>::new(), "{name}");
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn lambda_one_is_rejected() {
    let cfg =
        parse(r#"{"kind": "train", "problem": {"name": "pendulum"}, "train": {"lambda": 1.0}}"#);
    let msgs = messages(&cfg);
    assert!(
        msgs.iter().any(|m| m.contains("lambda out of range")),
        "{msgs:?}"
    );
    let cfg = parse(
        r#"{"kind": "solve", "problem": {"name": "mdp_file", "path": "x.json"}, "solve": {"lambda": 1.0}}"#,
    );
    assert!(messages(&cfg)
        .iter()
        .any(|m| m.contains("lambda out of range")));
}

#[test]
fn probabilities_must_be_strictly_inside() {
    for p in ["1.0", "0.0", "[0.5, 1.0]"] {
        let text = format!(
            r#"{{"kind": "train", "problem": {{"name": "linear"}}, "train": {{"prob": {p}}}}}"#
        );
        let msgs = messages(&parse(&text));
        assert!(
            msgs.iter().any(|m| m.contains("prob out of range")),
            "{p}: {msgs:?}"
        );
    }
}

#[test]
fn empty_control_box_is_rejected() {
    let cfg = parse(
        r#"{"kind": "train", "problem": {"name": "pendulum", "control_box": {"lo": 1.0, "hi": -1.0}}}"#,
    );
    let cfg = cfg.resolve(&Overrides::default()).unwrap();
    let msgs = messages(&cfg);
    assert!(
        msgs.iter()
            .any(|m| m.contains("control_box") && m.contains("empty")),
        "{msgs:?}"
    );
}

#[test]
fn syntax_errors_carry_line_and_column() {
    let err = parse_config(
        "{\n  \"kind\": \"train\",\n  \"problem\": {\"name\": \"pendulum\"},,\n}",
        Path::new("."),
    )
    .unwrap_err();
    assert_eq!(err.line, Some(3));
    assert!(err.column.is_some());
    assert!(err.to_string().starts_with("line 3, column"));
}

#[test]
fn unknown_fields_are_rejected() {
    for text in [
        r#"{"kind": "train", "problem": {"name": "pendulum"}, "trian": {}}"#,
        r#"{"kind": "train", "problem": {"name": "pendulum"}, "train": {"lamda": 0.5}}"#,
        r#"{"kind": "solve", "problem": {"name": "mdp_file"}, "solve": {"metod": "vi"}}"#,
    ] {
        assert!(parse_config(text, Path::new(".")).is_err(), "{text}");
    }
}

#[test]
fn problem_kind_mismatches() {
    let cfg = parse(r#"{"kind": "solve", "problem": {"name": "pendulum"}}"#);
    assert!(messages(&cfg).iter().any(|m| m.contains("mdp_file")));
    let cfg = parse(r#"{"kind": "train", "problem": {"name": "mdp_file", "path": "a.json"}}"#);
    assert!(messages(&cfg).iter().any(|m| m.contains("control problem")));
    let cfg =
        parse(r#"{"kind": "solve", "problem": {"name": "mdp_file", "path": "missing.json"}}"#);
    assert!(messages(&cfg).iter().any(|m| m.contains("does not exist")));
    let cfg = parse(r#"{"problem": {"name": "pendulum"}}"#);
    assert!(messages(&cfg)
        .iter()
        .any(|m| m.contains("missing experiment kind")));
    let cfg = parse(
        r#"{"kind": "simulate", "problem": {"name": "pendulum"}, "simulate": {"x0": [1.0, 0.0], "baseline": {}}}"#,
    );
    assert!(messages(&cfg).iter().any(|m| m.contains("sincos")));
}

#[test]
fn verb_must_match_config_kind() {
    let cfg = parse(r#"{"kind": "train", "problem": {"name": "pendulum"}}"#);
    let err = cfg
        .resolve(&Overrides {
            kind: Some(Kind::Solve),
            ..Overrides::default()
        })
        .unwrap_err();
    assert!(err[0].to_string().contains("not solve"));
}

#[test]
fn seed_and_mode_overrides_reach_the_payload() {
    let cfg = parse(r#"{"kind": "train", "problem": {"name": "linear"}, "seed": 3}"#);
    let cfg = cfg
        .resolve(&Overrides {
            seed: Some(9),
            mode: Some(lpir_core::approx::GeometricMode::Unbiased),
            ..Overrides::default()
        })
        .unwrap();
    let t = cfg.train.as_ref().unwrap();
    assert_eq!((cfg.seed, t.seed), (9, 9));
    assert_eq!(t.geometric_mode, lpir_core::approx::GeometricMode::Unbiased);
}

#[test]
fn counterexample_csv_has_unit_norm_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse(
        r#"{"kind": "counterexample", "counterexample": {"n_min": 20, "n_max": 20, "window": 50}}"#,
    );
    let cfg = cfg
        .resolve(&Overrides {
            out: Some(dir.path().to_path_buf()),
            ..Overrides::default()
        })
        .unwrap();
    run(&cfg).unwrap();
    let mut r = csv::Reader::from_path(dir.path().join("counterexample.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "norm_gap").unwrap();
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    for row in rows {
        assert_eq!(row[col].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn compare_writes_three_slice_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"kind": "compare", "problem": {"name": "pendulum"},
        "train": {"iterations": 2, "samples": 30}, "compare": {"points": 11}}"#;
    let cfg = parse(text)
        .resolve(&Overrides {
            out: Some(dir.path().to_path_buf()),
            ..Overrides::default()
        })
        .unwrap();
    let report = run(&cfg).unwrap();
    for name in ["vi.csv", "opi.csv", "lambda_pir.csv"] {
        assert!(report.artifacts.iter().any(|a| a == name));
        let mut r = csv::Reader::from_path(dir.path().join(name)).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["k", "coordinate", "value"]);
        assert_eq!(r.records().count(), 3 * 11);
    }
}

#[test]
fn solve_writes_records_and_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&configs().join("solve_sample.json"))
        .unwrap()
        .resolve(&Overrides {
            out: Some(dir.path().to_path_buf()),
            ..Overrides::default()
        })
        .unwrap();
    assert_eq!(cfg.problem.as_ref().unwrap().name, ProblemName::MdpFile);
    run(&cfg).unwrap();
    let mut r = csv::Reader::from_path(dir.path().join("records.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap(),
        vec![
            "k",
            "branch",
            "err_norm",
            "sandwich_lower_ok",
            "sandwich_upper_ok"
        ]
    );
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!((&rec[3], &rec[4]), ("true", "true"));
    }
    let sol: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(sol["converged"], true);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"][0]["path"], "sample_mdp.json");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["config"].get("out").is_none());
}

#[test]
fn trajectories_have_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"kind": "simulate", "problem": {"name": "pendulum"},
        "simulate": {"x0": [0.5, 0.0], "horizon": 10, "theta": {"dim": 2, "p": [1.0, 0.0, 0.0, 1.0], "b": 0.0}}}"#;
    let cfg = parse(text)
        .resolve(&Overrides {
            out: Some(dir.path().to_path_buf()),
            ..Overrides::default()
        })
        .unwrap();
    let report = run(&cfg).unwrap();
    assert!(!report.artifacts.iter().any(|a| a == "theta.json"));
    let mut r = csv::Reader::from_path(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap(),
        vec!["t", "x0", "x1", "u", "stage_cost"]
    );
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(&rows[10][3], "");
}

#[test]
fn manifest_is_written_before_a_failing_run() {
    // every sample at one point: the least-squares design is rank deficient
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"kind": "train", "problem": {"name": "linear", "initial_box": [{"lo": 0.5, "hi": 0.5}]},
        "train": {"ridge": 0.0, "samples": 10}}"#;
    let cfg = parse(text)
        .resolve(&Overrides {
            out: Some(dir.path().to_path_buf()),
            ..Overrides::default()
        })
        .unwrap();
    let err = run(&cfg).unwrap_err();
    assert!(
        matches!(err, RunError::Core(lpir_core::Error::Fit(_))),
        "{err}"
    );
    assert_eq!(err.exit_code(), 2);
    assert!(dir.path().join("manifest.json").is_file());
    assert!(!dir.path().join("iterations.csv").exists());
}

#[test]
fn invariant_violation_exits_with_two() {
    let err = RunError::Core(lpir_core::Error::InvariantViolation {
        iteration: 3,
        what: "x".into(),
    });
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("counterexample.json");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("ok");
    let (code, stdout, _) = lpir(&[
        "counterexample",
        "--config",
        cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("counterexample.csv"));

    let (code, stdout, _) = lpir(&["validate", "--config", cfg]);
    assert_eq!((code, stdout.trim_end().ends_with("ok")), (0, true));

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"kind": "train", "problem": {"name": "pendulum"}, "train": {"lambda": 1.0}}"#,
    )
    .unwrap();
    let (code, _, stderr) = lpir(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("lambda out of range"));

    let (code, _, stderr) = lpir(&["train", "--config", cfg]);
    assert_eq!(code, 1, "{stderr}");

    let missing = dir.path().join("nope.json");
    let (code, _, _) = lpir(&["train", "--config", missing.to_str().unwrap()]);
    assert_eq!(code, 3);

    // output path occupied by a file
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let (code, _, _) = lpir(&[
        "counterexample",
        "--config",
        cfg,
        "--out",
        blocker.to_str().unwrap(),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn seed_flag_changes_training_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("example_6_2.json");
    let mut thetas = Vec::new();
    for seed in ["0", "1"] {
        let out = dir.path().join(seed);
        let (code, _, stderr) = lpir(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{stderr}");
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["seed"].as_u64().unwrap().to_string(), seed);
        assert_eq!(
            manifest["config"]["train"]["seed"]
                .as_u64()
                .unwrap()
                .to_string(),
            seed
        );
        thetas.push(fs::read(out.join("theta.json")).unwrap());
    }
    assert_ne!(thetas[0], thetas[1]);
}

#[test]
fn mdp_parse_errors_are_validation_failures() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("m.json"),
        r#"{"alpha": 0.9, "states": 1, "actions": [1], "g": [[[1.0]]], "P": [[[0.5]]]}"#,
    )
    .unwrap();
    let text = r#"{"kind": "solve", "problem": {"name": "mdp_file", "path": "m.json"}}"#;
    let cfg = parse_config(text, dir.path())
        .unwrap()
        .resolve(&Overrides {
            out: Some(dir.path().join("out")),
            ..Overrides::default()
        })
        .unwrap();
    let err = run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("sums to"), "{err}");
}
