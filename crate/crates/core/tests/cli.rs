use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uncertainty-kit"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str], threads: &str) -> Output {
    bin()
        .args(args)
        .env("UNCERTAINTY_KIT_THREADS", threads)
        .output()
        .expect("binary runs")
}

const SHORT: &str = "0.5,0.75,0.875,0.9375,0.96875";

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/output.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn type_matches(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

// Covers the subset of JSON Schema used by the report schema.
fn validate(v: &Value, s: &Value, at: &str, errors: &mut Vec<String>) {
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(t) => type_matches(v, t),
            Value::Array(ts) => ts.iter().any(|t| type_matches(v, t.as_str().unwrap())),
            _ => true,
        };
        if !ok {
            errors.push(format!("{at}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(Value::Array(options)) = s.get("enum") {
        if !options.contains(v) {
            errors.push(format!("{at}: {v} not in enum"));
        }
    }
    if let (Some(Value::Array(req)), Value::Object(map)) = (s.get("required"), v) {
        for key in req {
            let key = key.as_str().unwrap();
            if !map.contains_key(key) {
                errors.push(format!("{at}: missing {key}"));
            }
        }
    }
    if let (Some(Value::Object(props)), Value::Object(map)) = (s.get("properties"), v) {
        for (key, sub) in props {
            if let Some(child) = map.get(key) {
                validate(child, sub, &format!("{at}.{key}"), errors);
            }
        }
    }
    if let (Some(items), Value::Array(arr)) = (s.get("items"), v) {
        for (i, child) in arr.iter().enumerate() {
            validate(child, items, &format!("{at}[{i}]"), errors);
        }
    }
}

fn assert_valid(text: &str) {
    let v: Value = serde_json::from_str(text).expect("valid json");
    let mut errors = Vec::new();
    validate(&v, &schema(), "$", &mut errors);
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn scan_csv_header_and_trailer() {
    let g = data("gaussian.json");
    let out = run(&["scan", g.to_str().unwrap(), "--schedule", SHORT], "2");
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,I,err_estimate"));
    let rows: Vec<&str> = text.lines().skip(1).filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
    }
    assert!(text.contains("# exponent="));
    assert!(text.lines().last().unwrap().starts_with("# exit_reason="));
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let g = data("gaussian.json");
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "json"] {
        let mut outputs = Vec::new();
        for threads in ["1", "4"] {
            let path = dir.path().join(format!("scan-{threads}.{format}"));
            let status = run(
                &["scan", g.to_str().unwrap(), "--schedule", SHORT, "--format", format, "--out", path.to_str().unwrap()],
                threads,
            );
            assert_eq!(status.status.code(), Some(0));
            outputs.push(std::fs::read(path).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{format} output differs");
    }
}

#[test]
fn every_command_emits_schema_valid_json() {
    let cases = [
        ("scan", "gaussian.json"),
        ("verify", "gaussian.json"),
        ("verify", "two_width.json"),
        ("mellin", "odd_linear.json"),
        ("recover", "even_quadratic.json"),
    ];
    for (command, file) in cases {
        let f = data(file);
        let mut args = vec![command, f.to_str().unwrap(), "--format", "json"];
        if command == "scan" {
            args.extend(["--schedule", SHORT]);
        }
        let out = run(&args, "2");
        assert_eq!(out.status.code(), Some(0), "{command} {file}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert_valid(&text);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["command"], command);
    }
}

#[test]
fn failed_check_exits_one() {
    let f = data("two_width.json");
    let out = run(&["scan", f.to_str().unwrap(), "--schedule", SHORT, "--format", "json"], "2");
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_valid(&text);
    let v: Value = serde_json::from_str(&text).unwrap();
    let d = v["results"]["diverged_at"].as_f64().unwrap();
    assert!((d - 0.5).abs() < 1e-3, "{d}");
}

#[test]
fn invalid_input_exits_two_with_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"terms":[{"coeffs":[1],"width":-1}]}"#).unwrap();
    let out = run(&["verify", bad.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stderr).unwrap();
    assert_valid(&text);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert!(v["exit_reason"].as_str().unwrap().starts_with("error"));

    let g = data("gaussian.json");
    let out = run(&["scan", g.to_str().unwrap(), "--schedule", "0.5,0.9"], "1");
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["exit_reason"].as_str().unwrap().contains("schedule_too_short"));

    std::fs::write(&bad, r#"{"terms":[{"coeffs":[1],"width":1,"extra":0}]}"#).unwrap();
    let out = run(&["verify", bad.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["exit_reason"].as_str().unwrap().contains("parse"));
}
