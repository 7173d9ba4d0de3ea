//! End-to-end tests against the built binary.

use std::path::Path;
use std::process::{Command, Output};

fn stratvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratvar"))
        .args(args)
        .env_remove("STRATVAR_CAP")
        .output()
        .expect("binary runs")
}

fn stratvar_with_cap_env(cap: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratvar"))
        .args(args)
        .env("STRATVAR_CAP", cap)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is utf-8")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is utf-8")
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, text).expect("scenario written");
    path.to_str().expect("utf-8 path").to_owned()
}

#[test]
fn variance_table_reports_exact_value() {
    let output = stratvar(&[
        "variance",
        "--sizes", "5,5",
        "--reds", "2,2",
        "--alloc", "2,2",
        "--kind", "strat-without",
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("exact: 9/200"), "got: {text}");
    assert!(text.contains("decimal: 0.045"), "got: {text}");
}

#[test]
fn variance_flags_and_file_agree_byte_for_byte() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = write_scenario(
        dir.path(),
        r#"{"sizes": [5, 5], "reds": [2, 2], "alloc": [2, 2]}"#,
    );
    for format in ["table", "json", "csv"] {
        let from_flags = stratvar(&[
            "variance",
            "--sizes", "5,5",
            "--reds", "2,2",
            "--alloc", "2,2",
            "--kind", "strat-without",
            "--format", format,
        ]);
        let from_file = stratvar(&[
            "variance",
            "--scenario", &path,
            "--kind", "strat-without",
            "--format", format,
        ]);
        assert!(from_flags.status.success());
        assert!(from_file.status.success());
        assert_eq!(from_flags.stdout, from_file.stdout, "format {format}");
    }
}

#[test]
fn fractional_scenario_file_round_trips() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = write_scenario(
        dir.path(),
        r#"{"sizes": [6, 4], "reds": ["1/2", "1/2"], "alloc": [3, 2]}"#,
    );
    let from_file = stratvar(&["variance", "--scenario", &path, "--kind", "strat-with"]);
    let from_flags = stratvar(&[
        "variance",
        "--sizes", "6,4",
        "--reds", "1/2,1/2",
        "--alloc", "3,2",
        "--kind", "strat-with",
    ]);
    assert!(from_file.status.success(), "stderr: {}", stderr(&from_file));
    assert_eq!(from_file.stdout, from_flags.stdout);
    assert!(stdout(&from_file).contains("exact: 1/20"));
}

#[test]
fn json_output_is_stable_under_reserialization() {
    let output = stratvar(&[
        "variance",
        "--sizes", "5,5",
        "--reds", "2,2",
        "--alloc", "2,2",
        "--kind", "strat-without",
        "--format", "json",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let value: serde_json::Value = serde_json::from_str(&text).expect("valid json");
    let reserialized = serde_json::to_string_pretty(&value).expect("serializes");
    assert_eq!(text.trim_end(), reserialized);
    assert_eq!(value["exact"], "9/200");
    assert_eq!(value["inputs"]["reds"], serde_json::json!([2, 2]));
}

#[test]
fn minimax_reports_game_value_and_witnesses() {
    let output = stratvar(&[
        "minimax",
        "--sizes", "4,6",
        "--n", "5",
        "--R", "5",
        "--format", "json",
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).expect("valid json");
    assert_eq!(value["value"], "47/1500");
    assert_eq!(value["lower_bound"], "1/32");
    assert_eq!(value["upper_bound"], "47/1500");
    assert_eq!(value["allocation"], serde_json::json!([2, 3]));
    assert_eq!(value["distribution"], serde_json::json!([2, 3]));
    assert_eq!(value["class"], "admissible");

    let table = stratvar(&["minimax", "--sizes", "4,6", "--n", "5", "--R", "5"]);
    assert!(table.status.success());
    let text = stdout(&table);
    assert!(text.contains("lower bound: 1/32"), "got: {text}");
    assert!(text.contains("upper bound: 47/1500"), "got: {text}");
}

#[test]
fn worst_nature_and_best_alloc_agree_with_search_oracles() {
    let worst = stratvar(&[
        "worst-nature",
        "--sizes", "5,5",
        "--alloc", "2,2",
        "--R", "4",
        "--format", "json",
    ]);
    assert!(worst.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&worst)).expect("valid json");
    assert_eq!(value["value"], "9/200");
    assert_eq!(value["distribution"], serde_json::json!([2, 2]));

    let best = stratvar(&[
        "best-alloc",
        "--sizes", "5,5",
        "--reds", "0,4",
        "--n", "4",
        "--format", "json",
    ]);
    assert!(best.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&best)).expect("valid json");
    assert_eq!(value["value"], "1/150");
    assert_eq!(value["allocation"], serde_json::json!([1, 3]));
}

#[test]
fn decompose_splits_the_proportional_variance() {
    let output = stratvar(&[
        "decompose",
        "--sizes", "5,5",
        "--reds", "1,3",
        "--alloc", "2,2",
        "--format", "json",
    ]);
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).expect("valid json");
    assert_eq!(value["simple"], "3/50");
    assert_eq!(value["heterogeneity"], "1/100");
    assert_eq!(value["stratified"], "1/20");
}

#[test]
fn decompose_rejects_non_proportional_allocations() {
    let output = stratvar(&[
        "decompose",
        "--sizes", "4,6",
        "--reds", "1,3",
        "--alloc", "3,2",
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("proportional"), "got: {}", stderr(&output));
}

#[test]
fn theorems_hold_and_exit_zero() {
    let output = stratvar(&["theorems", "--id", "e2", "--max-N", "8", "--max-m", "2"]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("verdict: holds"), "got: {text}");
    assert!(text.contains("failures: 0"), "got: {text}");
}

#[test]
fn adversarial_probes_show_up_in_the_report() {
    let output = stratvar(&[
        "theorems",
        "--id", "3",
        "--max-N", "7",
        "--max-m", "2",
        "--p", "1/2",
        "--adversarial",
        "--format", "json",
    ]);
    assert_eq!(output.status.code(), Some(0), "stderr: {}", stderr(&output));
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).expect("valid json");
    assert_eq!(value["verdict"], "holds");
    assert!(value["probe_count"].as_u64().expect("count") > 0);
}

#[test]
fn simulate_is_reproducible_and_worker_independent() {
    let base = [
        "simulate",
        "--sizes", "5,5",
        "--reds", "2,2",
        "--alloc", "2,2",
        "--kind", "strat-without",
        "--trials", "5000",
        "--seed", "11",
        "--format", "csv",
    ];
    let one = stratvar(&[&base[..], &["--workers", "1"]].concat());
    let four = stratvar(&[&base[..], &["--workers", "4"]].concat());
    assert!(one.status.success(), "stderr: {}", stderr(&one));
    let first = stdout(&one);
    let second = stdout(&four);
    let strip_workers = |text: &str| {
        text.lines()
            .map(|line| {
                line.split(',')
                    .enumerate()
                    .filter(|(i, _)| *i != 3)
                    .map(|(_, field)| field.to_owned())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_workers(&first), strip_workers(&second));
    assert!(first.starts_with("kind,trials,seed,workers,"), "got: {first}");
}

#[test]
fn sweep_csv_lists_every_candidate() {
    let output = stratvar(&[
        "sweep",
        "--sizes", "2,5",
        "--n", "6",
        "--R", "3",
        "--kind", "strat-without",
        "--format", "csv",
    ]);
    assert!(output.status.success());
    let text = stdout(&output);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7, "got: {text}");
    assert_eq!(lines[0], "sizes,reds,alloc,kind,exact,decimal");
    assert!(lines[1].starts_with("\"2,5\",\"0,3\",\"1,5\""), "got: {}", lines[1]);
}

#[test]
fn invalid_inputs_exit_one() {
    let bad_sizes = stratvar(&[
        "variance",
        "--sizes", "5,1",
        "--reds", "2,0",
        "--alloc", "2,1",
        "--kind", "strat-without",
    ]);
    assert_eq!(bad_sizes.status.code(), Some(1));
    assert!(stderr(&bad_sizes).contains("size 1"));

    let bad_kind = stratvar(&[
        "variance",
        "--sizes", "5,5",
        "--reds", "2,2",
        "--alloc", "2,2",
        "--kind", "mystery",
    ]);
    assert_eq!(bad_kind.status.code(), Some(1));

    let bad_flag = stratvar(&["variance", "--nope"]);
    assert_eq!(bad_flag.status.code(), Some(1));

    let conflicting = stratvar(&[
        "variance",
        "--sizes", "5,5",
        "--scenario", "missing.json",
        "--kind", "strat-without",
    ]);
    assert_eq!(conflicting.status.code(), Some(1));
}

#[test]
fn cap_environment_variable_limits_searches() {
    let capped = stratvar_with_cap_env("2", &["minimax", "--sizes", "5,5", "--n", "4", "--R", "4"]);
    assert_eq!(capped.status.code(), Some(1));
    assert!(stderr(&capped).contains("cap is 2"), "got: {}", stderr(&capped));

    let overridden = stratvar_with_cap_env(
        "2",
        &["minimax", "--sizes", "5,5", "--n", "4", "--R", "4", "--cap", "1000000"],
    );
    assert_eq!(overridden.status.code(), Some(0), "stderr: {}", stderr(&overridden));

    let garbage = stratvar_with_cap_env("soon", &["minimax", "--sizes", "5,5", "--n", "4", "--R", "4"]);
    assert_eq!(garbage.status.code(), Some(1));
    assert!(stderr(&garbage).contains("STRATVAR_CAP"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(stratvar(&["--help"]).status.code(), Some(0));
    assert_eq!(stratvar(&["--version"]).status.code(), Some(0));
    assert_eq!(stratvar(&["simulate", "--help"]).status.code(), Some(0));
}
