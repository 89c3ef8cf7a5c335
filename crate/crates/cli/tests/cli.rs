use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use gradsense_cli::{parse_scenario, render, run_command, Command, Format, RunOptions};
use proptest::prelude::*;
use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gradsense")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Proc::new(bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

const THIRD: &str = "\
domain.kind = interval
domain.lengths = 1
region.bounds = 0.2, 0.5
basis.truncation = 25
sensor.b.location = 1/3
horizon = 1
";

#[test]
fn check_reports_counterexample_at_one_third() {
    let cfg = scenarios().join("third.scn");
    let (code, out, _) = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let r = &v["results"];
    assert_eq!(r["state_strategic"], false);
    assert_eq!(r["gradient_strategic"], true);
    assert_eq!(r["state"]["first_failure"]["modes"][0], "3");
    assert_eq!(r["closed_form"]["sensors"][0]["S_witnesses"][0]["n"], 3);
    assert_eq!(r["closed_form"]["sensors"][0]["exact"], true);
    assert_eq!(r["closed_form"]["gradient_agrees"], true);
    assert_eq!(r["closed_form"]["state_agrees"], true);
}

#[test]
fn gramian_at_one_half_is_not_positive_definite() {
    let cfg = scenarios().join("half.scn");
    let (code, out, _) = run(&["gramian", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["results"]["positive_definite"], false);
    assert!(v["results"]["margin"].as_f64().unwrap() < 1e-20);
    assert_eq!(v["results"]["observability_constant"], Value::Null);
    assert_eq!(v["results"]["constant_finite"], false);
}

#[test]
fn simulate_matches_single_mode_decay() {
    let dir = tempfile::tempdir().unwrap();
    let text = "\
domain.kind = interval
basis.truncation = 3
sensor.b.location = 1/4
initial.coefficients = 1, 0, 0
time.samples = 16
";
    let cfg = write(&dir, "s.scn", text);
    let (code, out, _) = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let times = v["results"]["times"].as_array().unwrap();
    let ys = v["results"]["series"][0]["values"].as_array().unwrap();
    for (t, y) in times.iter().zip(ys) {
        let want = (-std::f64::consts::PI.powi(2) * t.as_f64().unwrap()).exp();
        assert!((y.as_f64().unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.scn", &THIRD.replace("1/3", "1.5"));
    let (code, _, err) = run(&["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("sensor outside domain"), "{err}");

    let missing = write(
        &dir,
        "missing.scn",
        &THIRD.replace("basis.truncation = 25\n", ""),
    );
    let (code, _, err) = run(&["check", "--config", missing.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("truncation"));

    let (code, _, _) = run(&[
        "check",
        "--config",
        dir.path().join("nope.scn").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&["frobnicate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);

    let ok = write(&dir, "ok.scn", THIRD);
    let (code, _, err) = run(&["simulate", "--config", ok.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("initial.coefficients"));

    // every mode is gradient-blind at 1/2 with one mode: estimation has nothing to fit
    let blind = write(
        &dir,
        "blind.scn",
        "basis.truncation = 1\nsensor.b.location = 1/2\nsignature.mode = gradient\ninitial.coefficients = 1\n",
    );
    let (code, _, err) = run(&["reconstruct", "--config", blind.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn scan_csv_schema_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "s.scn", THIRD);
    let (code, out, _) = run(&[
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "0.1:0.9:9, ",
        "--format",
        "csv",
    ]);
    assert_eq!(
        code, 1,
        "a trailing comma after a range is not a valid axis"
    );
    let (code, out2, _) = run(&[
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "0.1:0.9:9",
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let lines: Vec<&str> = out2.split('\n').collect();
    assert_eq!(lines[0], "b1,b2,state_strategic,gradient_strategic,margin");
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[10], "");
    assert!(!out2.contains('\r'));
    assert!(lines[5].starts_with("0.5,,false,false,"));

    let (_, out3, _) = run(&[
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "0.2, 1/3",
        "--format",
        "csv",
    ]);
    let row: Vec<&str> = out3.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(&row[..4], &["0.333333333333333", "", "false", "true"]);
}

#[test]
fn square_scan_has_64_nonnegative_margins() {
    let cfg = scenarios().join("square.scn");
    let (code, out, _) = run(&["scan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let rows = v["results"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r["margin"].as_f64().unwrap() >= 0.0));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, cfg, extra) in [
        ("check", "third.scn", vec![]),
        ("gramian", "square.scn", vec![]),
        ("simulate", "reconstruct.scn", vec!["--seed", "9"]),
        ("reconstruct", "reconstruct.scn", vec!["--seed", "9"]),
        ("scan", "square.scn", vec![]),
        ("split", "third.scn", vec![]),
    ] {
        for fmt in ["json", "csv"] {
            let cfg = scenarios().join(cfg);
            let outs: Vec<Vec<u8>> = (0..2)
                .map(|i| {
                    let path = dir.path().join(format!("{cmd}-{fmt}-{i}"));
                    let mut args = vec![
                        cmd,
                        "--config",
                        cfg.to_str().unwrap(),
                        "--format",
                        fmt,
                        "--out",
                        path.to_str().unwrap(),
                    ];
                    args.extend(&extra);
                    let (code, _, err) = run(&args);
                    assert_eq!(code, 0, "{cmd}: {err}");
                    std::fs::read(path).unwrap()
                })
                .collect();
            assert_eq!(outs[0], outs[1], "{cmd} {fmt}");
        }
    }
}

#[test]
fn seed_changes_noisy_output() {
    let cfg = scenarios().join("reconstruct.scn");
    let (_, a, _) = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    let (_, b, _) = run(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "2"]);
    assert_ne!(a, b);
}

#[test]
fn timing_is_opt_in() {
    let cfg = scenarios().join("third.scn");
    let (_, out, _) = run(&["check", "--config", cfg.to_str().unwrap()]);
    assert!(!out.contains("wall_seconds"));
    let (_, out, _) = run(&["check", "--config", cfg.to_str().unwrap(), "--timing"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn unwritable_output_is_an_input_error() {
    let cfg = scenarios().join("third.scn");
    let (code, _, _) = run(&[
        "check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "/nonexistent-dir/x.json",
    ]);
    assert_eq!(code, 1);
}

/// Keys every report carries, per docs/report.md.
fn assert_schema(v: &Value, cmd: &str) {
    let top: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        top,
        ["tool", "version", "command", "scenario", "settings", "results"],
        "{cmd}"
    );
    for k in [
        "truncation",
        "tolerances",
        "horizon",
        "signature_mode",
        "quadrature",
    ] {
        assert!(v["settings"].get(k).is_some(), "{cmd}: settings.{k}");
    }
    let results: &[&str] = match cmd {
        "check" => &[
            "truncation",
            "gradient_strategic",
            "state_strategic",
            "gradient",
            "state",
            "closed_form",
        ],
        "gramian" => &[
            "margin",
            "positive_definite",
            "observability_constant",
            "constant_finite",
            "truncation",
        ],
        "simulate" => &["times", "series"],
        "reconstruct" => &[
            "estimate",
            "unidentifiable_modes",
            "residual_norm",
            "condition_number",
            "errors",
            "field",
        ],
        "scan" => &["rows", "candidates"],
        "split" => &["kernel", "complement", "residual"],
        _ => unreachable!(),
    };
    for k in results {
        assert!(v["results"].get(*k).is_some(), "{cmd}: results.{k}");
    }
}

#[test]
fn every_command_follows_the_report_schema() {
    for (cmd, cfg) in [
        ("check", "third.scn"),
        ("check", "square.scn"),
        ("gramian", "half.scn"),
        ("simulate", "reconstruct.scn"),
        ("reconstruct", "reconstruct.scn"),
        ("scan", "square.scn"),
        ("split", "third.scn"),
    ] {
        let cfg = scenarios().join(cfg);
        let (code, out, err) = run(&[cmd, "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0, "{cmd}: {err}");
        assert_schema(&serde_json::from_str(&out).unwrap(), cmd);
    }
}

fn scan_rows(text: &str, grid: &str) -> Vec<String> {
    let s = parse_scenario(text).unwrap();
    let r = run_command(
        &s,
        Command::Scan,
        &RunOptions {
            grid: Some(grid.into()),
            seed: None,
        },
    )
    .unwrap();
    render(&r, Format::Csv)
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sub_grid_rows_match_full_grid(picks in prop::collection::btree_set(0usize..12, 1..6)) {
        let text = THIRD.replace("basis.truncation = 25", "basis.truncation = 10");
        let full: Vec<f64> = (0..12).map(|i| 0.05 + 0.9 * i as f64 / 11.0).collect();
        let full_spec = full.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let sub_spec = picks.iter().map(|i| format!("{:?}", full[*i])).collect::<Vec<_>>().join(", ");
        let all = scan_rows(&text, &full_spec);
        let sub = scan_rows(&text, &sub_spec);
        for (row, i) in sub.iter().zip(&picks) {
            prop_assert_eq!(row, &all[*i]);
        }
    }
}
