use std::io::Write;
use std::process::{Command, Stdio};

use dnt_cli::{run, CommandResult, EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK};
use serde_json::Value;

fn dnt(args: &[&str], stdin: &str) -> CommandResult {
    let argv: Vec<String> = std::iter::once("dnt")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    run(&argv, &mut stdin.as_bytes())
}

fn ok(args: &[&str], stdin: &str) -> String {
    let r = dnt(args, stdin);
    assert_eq!(r.exit_code, EXIT_OK, "{args:?}: {}", r.stderr);
    r.stdout
}

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn binary(args: &[&str], stdin: &str) -> (i32, Vec<u8>) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dnt"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    (out.status.code().unwrap(), out.stdout)
}

#[test]
fn trine_is_not_permutation_decomposable() {
    let trine = ok(&["trine"], "");
    let r = dnt(&["decompose", "--mode", "permutation"], &trine);
    assert_eq!(r.exit_code, EXIT_NEGATIVE);
    let v = parse(&r.stdout);
    assert_eq!(v["decomposable"], Value::Bool(false));
    assert!(v["decomposition"].is_null());

    let r = dnt(&["decompose", "--mode", "affine"], &trine);
    assert_eq!(r.exit_code, EXIT_OK);
    assert!(parse(&r.stdout)["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn random_synth_validate_pipeline() {
    let povm = ok(&["random", "--kind", "povm", "--n", "2", "--d", "2", "--seed", "7"], "");
    let grid = ok(&["synth"], &povm);
    let v = parse(&ok(&["validate"], &grid));
    assert_eq!(v["valid"], Value::Bool(true));

    let (code, out) = binary(&["random", "--kind", "povm", "--n", "2", "--d", "2", "--seed", "7"], "");
    assert_eq!(code, 0);
    let (code, out) = binary(&["synth"], std::str::from_utf8(&out).unwrap());
    assert_eq!(code, 0);
    let (code, _) = binary(&["validate", "-"], std::str::from_utf8(&out).unwrap());
    assert_eq!(code, 0);
}

#[test]
fn bvn_two_by_two() {
    let v = parse(&ok(&["bvn"], r#"{"n": 2, "data": [[0.7, 0.3], [0.3, 0.7]]}"#));
    let terms = v["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 2);
    let mut weights: Vec<f64> = terms.iter().map(|t| t["weight"].as_f64().unwrap()).collect();
    weights.sort_by(f64::total_cmp);
    assert!((weights[0] - 0.3).abs() < 1e-12 && (weights[1] - 0.7).abs() < 1e-12);
}

#[test]
fn jm_verdicts_and_exit_codes() {
    let trine = ok(&["trine"], "");
    let r = dnt(&["jm-rows"], &trine);
    assert_eq!(r.exit_code, EXIT_NEGATIVE);
    assert!(parse(&r.stdout)["eta"].as_f64().unwrap() <= 1.0 - 1e-3);

    let grid = ok(&["random", "--kind", "dnt", "--n", "2", "--d", "2", "--seed", "3"], "");
    let r = dnt(&["jm-all"], &grid);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.stderr);
    assert!(parse(&r.stdout)["mother"].is_object());

    let povm = ok(&["random", "--kind", "povm", "--n", "3", "--d", "2", "--seed", "1"], "");
    let instance = format!("{{\"povms\": [{}, {}]}}", povm.trim(), povm.trim());
    let r = dnt(&["jm", "--tol", "1e-6"], &instance);
    assert_eq!(r.exit_code, EXIT_OK, "{}", r.stderr);
    assert_eq!(parse(&r.stdout)["compatible"], Value::Bool(true));
}

#[test]
fn trivial_mother_round_trip() {
    let trine = ok(&["trine"], "");
    let mother = ok(&["trivial-mother"], &trine);
    let back = ok(&["from-trivial-mother"], &mother);
    let v = parse(&ok(&["validate"], &back));
    assert_eq!(v["n"], 3);

    let bad = r#"{"dim": 1, "elements": [{"rows":1,"cols":1,"data":[[0.5,0]]},{"rows":1,"cols":1,"data":[[0]]},{"rows":1,"cols":1,"data":[[0.25,0]]},{"rows":1,"cols":1,"data":[[0.25,0]]}]}"#;
    assert_eq!(dnt(&["from-trivial-mother"], bad).exit_code, EXIT_ERROR);
}

#[test]
fn pseudo_mother_and_order() {
    let trine = ok(&["trine"], "");
    let v = parse(&ok(&["pseudo-mother", "--order", "3,1,2"], &trine));
    assert_eq!(v["order"], serde_json::json!([3, 1, 2]));
    assert_eq!(v["all_psd"], Value::Bool(false));
    assert_eq!(v["elements"].as_object().unwrap().len(), 27);
    assert_eq!(dnt(&["pseudo-mother", "--order", "1,1,2"], &trine).exit_code, EXIT_ERROR);
    assert_eq!(dnt(&["pseudo-mother", "--order", "0,1,2"], &trine).exit_code, EXIT_ERROR);
}

#[test]
fn extremality_exit_codes() {
    let dir = std::env::temp_dir().join(format!("dnt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let coin = dir.join("coin.json");
    std::fs::write(
        &coin,
        r#"{"dim": 2, "elements": [{"rows":2,"cols":2,"data":[[0.5,0],[0,0],[0,0],[0.5,0]]},{"rows":2,"cols":2,"data":[[0.5,0],[0,0],[0,0],[0.5,0]]}]}"#,
    )
    .unwrap();
    let r = dnt(&["extremal", "--povm", coin.to_str().unwrap()], "");
    assert_eq!(r.exit_code, EXIT_NEGATIVE);

    let r = dnt(&["extremal", "--dnt", "-"], &ok(&["trine"], ""));
    assert_eq!(r.exit_code, EXIT_OK);
    assert_eq!(parse(&r.stdout)["rows_columns_extremal"], Value::Bool(false));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_dnt_is_a_negative_verdict() {
    let mut v = parse(&ok(&["trine"], ""));
    v["grid"][0][0]["data"] = serde_json::json!([[0, 0], [0.3333333333333333, 0], [0.3333333333333333, 0], [0, 0]]);
    let r = dnt(&["validate"], &v.to_string());
    assert_eq!(r.exit_code, EXIT_NEGATIVE);
    assert!(r.stderr.contains("entry (1, 1)"), "{}", r.stderr);
}

#[test]
fn errors_name_the_offending_field() {
    let r = dnt(&["validate"], r#"{"n": 1, "dim": 1, "grid": [[{"rows": 1, "cols": 1, "data": [[1, "x"]]}]]}"#);
    assert_eq!(r.exit_code, EXIT_ERROR);
    assert!(r.stderr.contains("grid[0][0].data"), "{}", r.stderr);

    let r = dnt(&["synth"], r#"{"dim": 1, "elements": [{"rows":1,"cols":1,"data":[[0.5,0]]},{"rows":1,"cols":1,"data":[[0.25,0]]}]}"#);
    assert_eq!(r.exit_code, EXIT_ERROR);
    assert!(r.stderr.contains("elements"), "{}", r.stderr);

    let r = dnt(&["validate", "/nonexistent/file.json"], "");
    assert_eq!(r.exit_code, EXIT_ERROR);
    assert!(r.stderr.contains("/nonexistent/file.json"));
}

#[test]
fn usage_errors_exit_one_and_help_documents_formats() {
    let r = dnt(&["frobnicate"], "");
    assert_eq!(r.exit_code, EXIT_ERROR);
    assert!(r.stderr.contains("Usage"));
    assert_eq!(dnt(&["decompose"], "").exit_code, EXIT_ERROR);
    assert_eq!(dnt(&["extremal"], "").exit_code, EXIT_ERROR);

    for cmd in ["validate", "synth", "jm", "bvn", "pseudo-mother", "from-trivial-mother", "extremal"] {
        let r = dnt(&[cmd, "--help"], "");
        assert_eq!(r.exit_code, EXIT_OK);
        assert!(r.stdout.contains("Example"), "{cmd} help lacks an example");
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let grid = ok(&["random", "--kind", "dnt", "--n", "3", "--d", "2", "--seed", "11"], "");
    for args in [
        vec!["decompose", "--mode", "permutation"],
        vec!["decompose", "--mode", "affine"],
        vec!["jm-rows"],
        vec!["pseudo-mother"],
        vec!["trivial-mother"],
    ] {
        let (c1, a) = binary(&args, &grid);
        let (c2, b) = binary(&args, &grid);
        assert_eq!(c1, c2);
        assert_eq!(a, b, "{args:?}");
    }
    let sink = ["random", "--kind", "dnt", "--n", "3", "--d", "2", "--seed", "5", "--method", "sinkhorn"];
    assert_eq!(binary(&sink, "").1, binary(&sink, "").1);
}
