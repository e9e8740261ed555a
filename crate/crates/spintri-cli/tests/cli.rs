//! End-to-end runs of the `spintri` binary: exit codes, output formats, schemas.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spintri"));
    c.env_remove("SPINTRI_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("UTF-8 output")
}

fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

/// Parses `text` and checks it against `schemas/<name>.schema.json`.
fn validated(text: &str, name: &str) -> Value {
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(schema_dir().join(format!("{name}.schema.json"))).expect("schema file"),
    )
    .expect("schema is JSON");
    let doc: Value = serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(&doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
    doc
}

fn ok_json(args: &[&str], schema: &str) -> Value {
    let o = run(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    validated(&stdout(&o), schema)
}

#[test]
fn classify_worked_example() {
    let doc = ok_json(&["classify", "--preset", "paper-example"], "classify");
    assert_eq!(doc["label"], "Generic");
    assert!((doc["e_min"].as_f64().unwrap() + 1.47328).abs() < 1e-5);
    assert!((doc["e_max"].as_f64().unwrap() - 1.23498).abs() < 1e-5);
    assert!((doc["period"].as_f64().unwrap() - 3.3693).abs() < 1e-4);
}

#[test]
fn compare_worked_example_over_one_period() {
    let doc = ok_json(
        &[
            "compare",
            "--preset",
            "paper-example",
            "--span",
            "1T",
            "--tol",
            "1e-5",
        ],
        "compare",
    );
    assert_eq!(doc["pass"], true);
    assert!(doc["max_deviation"].as_f64().unwrap() <= 1e-5);
}

#[test]
fn zero_samples_give_header_only() {
    let o = run(&["simulate", "--preset", "paper-example", "--samples", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "t,s1x,s1y,s1z,s2x,s2y,s2z,s3x,s3y,s3z\n");
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [
        &["simulate", "--preset", "paper-example", "--samples", "17"][..],
        &[
            "simulate",
            "--preset",
            "aperiodic(0.3)",
            "--span",
            "4",
            "--samples",
            "9",
            "--format",
            "json",
        ],
        &["integrate", "--preset", "paper-example", "--samples", "9"],
        &["sweep", "--preset", "paper-example", "--points", "6"],
        &["selftest", "--seed", "3", "--instances", "1"],
    ] {
        let a = run(args);
        let b = run(args);
        assert_eq!(code(&a), 0, "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn csv_rows_have_fixed_format() {
    let o = run(&[
        "simulate",
        "--couplings",
        "0.3,-1,2",
        "--gram",
        "0.1,-0.4,0.2",
        "--samples",
        "5",
        "--span",
        "2",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,s1x,s1y,s1z,s2x,s2y,s2z,s3x,s3y,s3z"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 10);
        for f in fields {
            let mantissa = f.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.len(), 18, "{f}");
            assert_eq!(mantissa.as_bytes()[1], b'.', "{f}");
            f.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn every_json_output_matches_its_schema() {
    let gen = ["--couplings", "0.3,-1,2", "--gram", "0.1,-0.4,0.2"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> { extra.to_vec() };
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (
            [&["simulate"][..], &gen, &["--samples", "3", "--format", "json"]].concat(),
            "trajectory",
        ),
        (
            [&["integrate"][..], &gen, &["--samples", "3", "--format", "json"]].concat(),
            "trajectory",
        ),
        (
            with(&[
                "special",
                "--preset",
                "isosceles(1,-0.5,0.2,1.2)",
                "--samples",
                "3",
                "--format",
                "json",
            ]),
            "trajectory",
        ),
        (
            with(&[
                "special",
                "--couplings",
                "1,1,2",
                "--face-gamma",
                "-0.3",
                "--samples",
                "2",
                "--format",
                "json",
            ]),
            "trajectory",
        ),
        (
            with(&["special", "--couplings", "1,-2,0.5", "--stationary-states"]),
            "stationary_states",
        ),
        (
            with(&["special", "--couplings", "1,0,0", "--stationary-states"]),
            "stationary_states",
        ),
        (with(&["classify", "--preset", "aperiodic(0.4)"]), "classify"),
        (
            with(&["classify", "--preset", "isosceles(1,2,0.3,1.5)"]),
            "classify",
        ),
        (
            [
                &["compare"][..],
                &gen,
                &["--field", "constant:0.7", "--span", "3"],
            ]
            .concat(),
            "compare",
        ),
        (with(&["actions", "--preset", "paper-example"]), "actions"),
        (
            with(&[
                "actions",
                "--preset",
                "paper-example",
                "--area",
                "--field",
                "sinusoid:0.2,0.1,2",
            ]),
            "actions",
        ),
        (
            with(&[
                "sweep",
                "--couplings",
                "1,2,3",
                "--points",
                "4",
                "--format",
                "json",
            ]),
            "sweep",
        ),
        (
            with(&[
                "sweep",
                "--couplings",
                "1,2,3",
                "--points",
                "2",
                "--no-actions",
                "--format",
                "json",
            ]),
            "sweep",
        ),
        (with(&["elliptic", "--m", "0.3"]), "elliptic"),
        (
            with(&["elliptic", "--g2", "3", "--g3", "0.1", "--t", "0.5"]),
            "elliptic",
        ),
        (
            with(&["selftest", "--seed", "11", "--instances", "1"]),
            "selftest",
        ),
    ];
    for (args, schema) in cases {
        let doc = ok_json(&args, schema);
        assert_eq!(doc["schema_version"], 1);
    }
}

#[test]
fn exit_codes() {
    let usage = [
        &["frobnicate"][..],
        &["classify"],
        &["classify", "--couplings", "1,2,3"],
        &["classify", "--couplings", "1,2", "--gram", "0,0,0"],
        &["classify", "--preset", "paper-example", "--couplings", "1,2,3"],
        &["classify", "--preset", "nonsense"],
        &["simulate", "--preset", "paper-example", "--span", "soon"],
        &["simulate", "--preset", "paper-example", "--format", "xml"],
        &["elliptic"],
        &["elliptic", "--u", "0.2"],
        &[
            "classify",
            "--preset",
            "paper-example",
            "--config",
            "/nonexistent/config.toml",
        ],
    ];
    for args in usage {
        let o = run(args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    let domain = [
        &["special", "--preset", "paper-example"][..],
        &["actions", "--preset", "aperiodic(0.5)"],
        &["classify", "--couplings", "1,2,3", "--gram", "2,0,0"],
        &["simulate", "--preset", "aperiodic(0.5)", "--span", "1T"],
        &["special", "--couplings", "1,2,3", "--face-gamma", "0.1"],
        &["elliptic", "--m", "1.5"],
    ];
    for args in domain {
        assert_eq!(code(&run(args)), 3, "{args:?}");
    }
    let o = run(&["compare", "--preset", "paper-example", "--tol", "1e-15"]);
    assert_eq!(code(&o), 4);
    assert_eq!(validated(&stdout(&o), "compare")["pass"], false);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn semi_analytic_and_reference_trajectories_agree() {
    let args = [
        "--preset",
        "isosceles(0.7,-1.1,0.4,1.3)",
        "--span",
        "2T",
        "--samples",
        "11",
    ];
    let a = stdout(&run(&[&["simulate"][..], &args].concat()));
    let b = stdout(&run(&[&["integrate"][..], &args].concat()));
    let nums = |s: &str| -> Vec<f64> {
        s.lines()
            .skip(1)
            .flat_map(|l| {
                l.split(',')
                    .map(|f| f.parse::<f64>().unwrap())
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let (a, b) = (nums(&a), nums(&b));
    assert_eq!(a.len(), 110);
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-7, "{worst}");
}

#[test]
fn sweep_rows_keep_input_order_for_any_thread_count() {
    let args = [
        "sweep",
        "--preset",
        "paper-example",
        "--points",
        "12",
        "--no-actions",
    ];
    let one = bin().args(args).env("SPINTRI_THREADS", "1").output().unwrap();
    let many = bin().args(args).env("SPINTRI_THREADS", "4").output().unwrap();
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, many.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    let idx: Vec<usize> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(idx, (0..12).collect::<Vec<_>>());
    let bad = bin().args(args).env("SPINTRI_THREADS", "zero").output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn sweep_smooths_the_critical_jump() {
    // The paper couplings at σ = 0 have one critical energy near 1.0667.
    let o = run(&[
        "sweep",
        "--preset",
        "paper-example",
        "--eps-min",
        "1.03",
        "--eps-max",
        "1.1",
        "--points",
        "8",
        "--no-actions",
    ]);
    assert_eq!(code(&o), 0);
    let rows: Vec<Vec<f64>> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|f| f.parse().unwrap()).collect())
        .collect();
    let raw_jump = rows
        .windows(2)
        .map(|w| (w[1][2] - w[0][2]).abs())
        .fold(0.0, f64::max);
    let smooth_jump = rows
        .windows(2)
        .map(|w| (w[1][3] - w[0][3]).abs())
        .fold(0.0, f64::max);
    assert!(raw_jump > 6.0, "{raw_jump}");
    assert!(smooth_jump < 0.5, "{smooth_jump}");
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "preset = \"paper-example\"\nsamples = 4\nspan = \"1T\"\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = run(&["simulate", "--config", cfg]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 5);
    let o = run(&["simulate", "--config", cfg, "--samples", "2", "--format", "json"]);
    let doc = validated(&stdout(&o), "trajectory");
    assert_eq!(doc["samples"].as_array().unwrap().len(), 2);
    std::fs::write(dir.path().join("bad.toml"), "no_such_flag = 1\n").unwrap();
    let o = run(&[
        "classify",
        "--config",
        dir.path().join("bad.toml").to_str().unwrap(),
        "--preset",
        "paper-example",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn output_file_and_field_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("b.csv");
    std::fs::write(&table, "t,B\n0,0.5\n1,0.2\n2,0.9\n10,0.9\n").unwrap();
    let out = dir.path().join("cmp.json");
    let field = format!("table:{}", table.display());
    let o = run(&[
        "compare",
        "--preset",
        "paper-example",
        "--field",
        &field,
        "--field-axis",
        "1,0,1",
        "--span",
        "4",
        "--tol",
        "1e-6",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let doc = validated(&std::fs::read_to_string(&out).unwrap(), "compare");
    assert!(doc["max_deviation"].as_f64().unwrap() < 1e-6);
}

#[test]
fn stationary_states_of_equal_couplings() {
    let doc = ok_json(
        &["special", "--couplings", "1,1,1", "--stationary-states"],
        "stationary_states",
    );
    let states = doc["states"].as_array().unwrap();
    let coplanar: Vec<&Value> = states
        .iter()
        .filter(|s| s["kind"] == "CoplanarCritical")
        .collect();
    assert!(!coplanar.is_empty());
    for s in coplanar {
        assert!((s["energy"].as_f64().unwrap() + 1.5).abs() < 1e-12);
    }
    assert!(states.iter().all(|s| s["torque"].as_f64().unwrap() <= 1e-12));
}
