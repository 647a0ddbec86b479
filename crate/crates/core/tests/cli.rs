use std::fs;
use std::path::Path;
use std::process::Command;

use kacmoment::cli::{echoed_config, Report, RunConfig, CSV_COLUMNS, EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_PASS};
use kacmoment::montecarlo::Verdict;

const BASE: &str = r#"{
  "schema_version": 1,
  "kernels": {
    "bm": { "family": "brownian" }
  },
  "measures": {
    "lebesgue": { "density": { "kind": "constant", "value": 1.0 } },
    "delta0": { "atoms": [ { "location": 0.0, "weight": 1.0 } ] },
    "half_delta0": { "atoms": [ { "location": 0.0, "weight": 0.5 } ] }
  },
  "tasks": [
    TASKS
  ],
  "mc": { "seed": 7, "n_paths": 20000, "dt": 0.0001, "epsilon": 0.005 }
}"#;

fn config_with(tasks: &str) -> String {
    BASE.replace("TASKS", tasks)
}

fn run(dir: &Path, text: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join("run.json");
    let out = dir.join("report.out");
    fs::write(&cfg, text).unwrap();
    let mut args = vec!["kacmoment".to_owned()];
    args.extend(extra.iter().map(|s| s.to_string()));
    args.extend(["--config".to_owned(), cfg.display().to_string()]);
    args.extend(["--out".to_owned(), out.display().to_string()]);
    let code = kacmoment::cli::main_with_args(args);
    (code, fs::read_to_string(&out).unwrap_or_default())
}

fn json_report(dir: &Path, text: &str, sub: &str) -> (i32, Report) {
    let (code, out) = run(dir, text, &[sub, "--format", "json"]);
    (code, serde_json::from_str(&out).expect("json report"))
}

#[test]
fn lebesgue_second_moment_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(
        r#"{ "op": "moment", "id": "leb", "kernel": "bm", "measures": ["lebesgue"], "k": 2, "x": 0.0, "t": 1.0 }"#,
    );
    let (code, report) = json_report(dir.path(), &text, "run");
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.verdict, Verdict::NotApplicable);
    assert!((row.engine_value.unwrap() - 1.0).abs() < 1e-6, "{row:?}");
    assert!(row.mc_mean.is_none());
}

#[test]
fn local_time_mc_compare_passes() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(
        r#"{ "op": "moment", "kernel": "bm", "measures": ["delta0"], "x": 0.0, "t": 1.0 },
    { "op": "mc-compare", "kernel": "bm", "measures": ["delta0"], "x": 0.0, "t": 1.0 }"#,
    );
    let (code, report) = json_report(dir.path(), &text, "run");
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].task_id, "task1");
    let row = &report.rows[1];
    assert_eq!(row.op, "mc-compare");
    assert_eq!(row.verdict, Verdict::Pass, "{row:?}");
    assert!(row.z_score.unwrap().abs() <= 3.0);
    assert!((row.engine_value.unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-8);
    assert!(row.detail.contains("seed=7"), "{}", row.detail);
}

#[test]
fn undeclared_measure_is_rejected_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(r#"{ "op": "kato", "kernel": "bm", "measure": "mu9" }"#);
    let line = text.lines().position(|l| l.contains("mu9")).unwrap() + 1;
    match RunConfig::parse(&text) {
        Err(kacmoment::KacError::Config { line: l, message }) => {
            assert_eq!(l, Some(line));
            assert!(message.contains("\"mu9\""), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let (code, out) = run(dir.path(), &text, &["run"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(out.is_empty());
}

#[test]
fn binary_reports_config_errors_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text = config_with(r#"{ "op": "kato", "kernel": "bm", "measure": "mu9" }"#);
    fs::write(&cfg, &text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kacmoment"))
        .args(["run", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().position(|l| l.contains("mu9")).unwrap() + 1;
    assert!(err.contains("mu9") && err.contains(&format!("line {line}")), "{err}");
}

#[test]
fn io_failures_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let code = kacmoment::cli::main_with_args(["kacmoment", "run", "--config", missing.to_str().unwrap()]);
    assert_eq!(code, EXIT_IO);
    let text = config_with(r#"{ "op": "moment", "kernel": "bm", "measures": ["lebesgue"], "x": 0.0, "t": 1.0 }"#);
    let cfg = dir.path().join("ok.json");
    fs::write(&cfg, text).unwrap();
    let bad_out = dir.path().join("no/such/dir/report.csv");
    let code = kacmoment::cli::main_with_args([
        "kacmoment",
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        bad_out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_IO);
}

#[test]
fn numeric_failure_marks_row_and_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    // The start point lies on the killing boundary, which the engine refuses.
    let text = config_with(
        r#"{ "op": "moment", "id": "bad", "kernel": "bm", "measures": ["delta0"], "x": 1.0, "t": 1.0, "killed_domain": [-1.0, 1.0] },
    { "op": "moment", "id": "good", "kernel": "bm", "measures": ["lebesgue"], "x": 0.0, "t": 2.0 }"#,
    );
    let (code, report) = json_report(dir.path(), &text, "run");
    assert_eq!(code, EXIT_FAIL);
    assert_eq!(report.rows[0].verdict, Verdict::Fail);
    assert!(!report.rows[0].detail.is_empty());
    assert_eq!(report.rows[1].verdict, Verdict::NotApplicable);
    assert!((report.rows[1].engine_value.unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn echoed_config_round_trips_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(
        r#"{ "op": "moment", "kernel": "bm", "measures": ["lebesgue", "delta0"], "x": 0.5, "t": 0.25,
      "terminal": { "inside": { "kind": "indicator", "lower": 0.0, "upper": 1.0 } } }"#,
    );
    for format in ["csv", "json"] {
        let (code, out) = run(dir.path(), &text, &["run", "--format", format, "--seed-override", "99"]);
        assert_eq!(code, EXIT_PASS, "{out}");
        let echo = echoed_config(&out).unwrap();
        assert_eq!(echo.mc.as_ref().unwrap().seed, 99);
        let digest = out
            .lines()
            .find_map(|l| l.strip_prefix("# config_digest="))
            .map(str::to_owned)
            .unwrap_or_else(|| serde_json::from_str::<Report>(&out).unwrap().config_digest);
        assert_eq!(echo.digest(), digest, "{format}");
        let again = RunConfig::parse(&serde_json::to_string_pretty(&echo).unwrap()).unwrap();
        assert_eq!(again, echo);
    }
}

#[test]
fn csv_layout_is_fixed() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(
        r#"{ "op": "moment", "id": "a", "kernel": "bm", "measures": ["lebesgue"], "k": 3, "x": 0.0, "t": 0.5 },
    { "op": "moment", "id": "b", "kernel": "bm", "measures": ["delta0"], "k": 2, "x": 0.0, "t": 1.0 }"#,
    );
    let (code, out) = run(dir.path(), &text, &["moment"]);
    assert_eq!(code, EXIT_PASS);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# tool_version="));
    assert!(lines[1].starts_with("# config_digest="));
    assert!(lines[2].starts_with("# config={"));
    assert_eq!(lines[3], CSV_COLUMNS.join(","));
    assert_eq!(lines.len(), 6);
    let fields: Vec<&str> = lines[4].split(',').collect();
    assert_eq!(&fields[..3], &["a", "moment", "n/a"]);
    // 17 significant digits: one before the point and sixteen after.
    let mantissa = fields[3].split('e').next().unwrap();
    assert_eq!(mantissa.len(), 18, "{}", fields[3]);
    let v: f64 = fields[3].parse().unwrap();
    assert!((v - 0.125).abs() < 1e-8);
    assert_eq!(lines[5].split(',').next(), Some("b"));
}

#[test]
fn json_report_follows_published_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../../../docs/report.schema.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(
        r#"{ "op": "moment", "kernel": "bm", "measures": ["lebesgue"], "x": 0.0, "t": 1.0 },
    { "op": "kato", "kernel": "bm", "measure": "delta0", "alphas": [0.25, 1.0, 4.0] }"#,
    );
    let (_, out) = run(dir.path(), &text, &["run", "--format", "json"]);
    let value: serde_json::Value = serde_json::from_str(&out).unwrap();
    let keys = |v: &serde_json::Value| -> Vec<String> {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    let required = |v: &serde_json::Value| -> Vec<String> {
        let mut k: Vec<String> = v["required"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_owned()).collect();
        k.sort();
        k
    };
    assert_eq!(keys(&value), required(&schema));
    let row_schema = &schema["properties"]["rows"]["items"];
    for row in value["rows"].as_array().unwrap() {
        assert_eq!(keys(row), required(row_schema));
        let verdicts = row_schema["properties"]["verdict"]["enum"].as_array().unwrap();
        assert!(verdicts.contains(&row["verdict"]));
    }
    assert_eq!(value["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn kernel_check_on_builtins_exits_zero() {
    let out = Command::new(env!("CARGO_BIN_EXE_kacmoment"))
        .arg("kernel-check")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_PASS), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let row = stdout.lines().last().unwrap();
    assert!(row.contains(",kernel-check,pass,"), "{row}");
    for name in ["brownian", "brownian-drift", "reflected-brownian", "killed-brownian"] {
        assert!(row.contains(name), "{row}");
    }
}

#[test]
fn kato_on_local_time_reports_alpha_star_below_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(r#"{ "op": "kato", "kernel": "bm", "measure": "delta0" }"#);
    let (code, report) = json_report(dir.path(), &text, "kato");
    assert_eq!(code, EXIT_PASS);
    let a = report.rows[0].engine_value.unwrap();
    assert!(a <= 1.0, "{a}");
    // sup U_a delta0 = (2a)^(-1/2) crosses one at a = 1/2.
    assert!((a - 0.5).abs() < 0.02, "{a}");
}

#[test]
fn exp_bound_series_below_bound() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(r#"{ "op": "exp-bound", "kernel": "bm", "measure": "half_delta0", "t_values": [1.0] }"#);
    let (code, report) = json_report(dir.path(), &text, "exp-bound");
    assert_eq!(code, EXIT_PASS);
    let row = &report.rows[0];
    assert_eq!(row.verdict, Verdict::Pass);
    let series = row.engine_value.unwrap();
    assert!((series - 1.565).abs() < 5e-3, "{series}");
    assert!(row.detail.contains("bound="), "{}", row.detail);
}

#[test]
fn task_filter_and_subcommand_selection() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_with(
        r#"{ "op": "moment", "id": "m1", "kernel": "bm", "measures": ["lebesgue"], "x": 0.0, "t": 1.0 },
    { "op": "kato", "id": "k1", "kernel": "bm", "measure": "delta0", "alphas": [1.0] }"#,
    );
    let (code, report) = json_report(dir.path(), &text, "kato");
    assert_eq!(code, EXIT_PASS);
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].task_id, "k1");
    let (code, _) = run(dir.path(), &text, &["run", "--task", "nope"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, out) = run(dir.path(), &text, &["run", "--task", "m1", "--workers", "2"]);
    assert_eq!(code, EXIT_PASS);
    assert_eq!(out.lines().filter(|l| l.starts_with("m1,")).count(), 1);
}

#[test]
fn mc_compare_without_mc_block_is_a_config_error() {
    let text = r#"{
  "schema_version": 1,
  "kernels": { "bm": { "family": "brownian" } },
  "measures": { "d": { "atoms": [ { "location": 0.0, "weight": 1.0 } ] } },
  "tasks": [ { "op": "mc-compare", "kernel": "bm", "measures": ["d"], "x": 0.0, "t": 1.0 } ]
}"#;
    assert!(matches!(RunConfig::parse(text), Err(kacmoment::KacError::Config { .. })));
    let bad_version = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
    assert!(matches!(
        RunConfig::parse(&bad_version),
        Err(kacmoment::KacError::Config { line: Some(2), .. })
    ));
}

#[test]
fn sample_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            RunConfig::parse(&fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n > 0);
}
