//! Black-box tests of the `ppkm` binary: artifact schemas, exit codes,
//! seeding rules, config-file replay, and the analysis subcommands.

mod util;

use std::path::Path;

use tempfile::TempDir;
use util::{
    bin, exit_code, flatten_keys, read_json, run_cli, stderr_str, stdout_json, stdout_str,
    write_blob_csv,
};

fn fixture(dir: &Path) -> std::path::PathBuf {
    write_blob_csv(dir, "blobs.csv", 424242, 24, 2, 3)
}

#[test]
fn run_writes_all_four_artifacts() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let out = tmp.path().join("out");
    let output = run_cli(&[
        "run", "--data", data.to_str().unwrap(), "--k", "3", "--seed", "11",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_str(&output));
    for artifact in ["labels.csv", "centers.json", "transcript.jsonl", "report.json"] {
        assert!(out.join(artifact).is_file(), "{artifact} missing");
    }
    let summary = stdout_str(&output);
    assert!(summary.contains("24 points in 3 clusters"), "summary line: {summary}");
}

#[test]
fn report_schema_matches_the_golden_key_list() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let out = tmp.path().join("out");
    let output = run_cli(&[
        "run", "--data", data.to_str().unwrap(), "--k", "3", "--seed", "11",
        "--out", out.to_str().unwrap(), "--with-oracle",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_str(&output));

    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema_version"], 1);
    let actual = flatten_keys(&report).join("\n") + "\n";
    assert_eq!(actual, include_str!("golden/report_keys.txt"), "report key paths changed");
    assert_eq!(report["oracle"]["assignments_match"], true);
    assert_eq!(report["oracle"]["rounds_match"], true);

    let centers = read_json(&out.join("centers.json"));
    assert_eq!(centers["schema_version"], 1);
    assert_eq!(centers["transformed"].as_array().unwrap().len(), 3);
    assert_eq!(centers["approx_input_space"].as_array().unwrap().len(), 3);
}

#[test]
fn labels_csv_lists_every_point_once() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let out = tmp.path().join("out");
    run_cli(&[
        "run", "--data", data.to_str().unwrap(), "--k", "3", "--seed", "11",
        "--out", out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("labels.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,label"));
    let ids: Vec<u64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ids, (0..24).collect::<Vec<u64>>());
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(exit_code(&run_cli(&["--help"])), 0);
    assert_eq!(exit_code(&run_cli(&["--version"])), 0);
    assert_eq!(exit_code(&run_cli(&["run", "--help"])), 0);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let data = data.to_str().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("unknown flag", vec!["run", "--data", data, "--k", "2", "--out", out, "--bogus"]),
        ("unknown subcommand", vec!["frobnicate"]),
        ("missing --data", vec!["run", "--k", "2", "--out", out]),
        ("missing --k", vec!["run", "--data", data, "--out", out]),
        ("weak mode without --w", vec![
            "run", "--data", data, "--k", "2", "--out", out, "--mode", "weak",
        ]),
        ("--w under strict mode", vec![
            "run", "--data", data, "--k", "2", "--out", out, "--w", "64",
        ]),
        ("tcp with too few addresses", vec![
            "run", "--data", data, "--k", "2", "--out", out, "--transport", "tcp",
            "--connect", "127.0.0.1:1", "--connect", "127.0.0.1:2",
        ]),
        ("--connect without tcp", vec![
            "run", "--data", data, "--k", "2", "--out", out, "--connect", "127.0.0.1:1",
        ]),
        ("conflicting analyze flags", vec!["analyze", "--attack-table", "--kl"]),
        ("analyze without a mode", vec!["analyze"]),
        ("kl without inputs", vec!["analyze", "--kl"]),
        ("partial kl group", vec!["analyze", "--kl", "--x1", "4"]),
        ("oracle without data", vec!["oracle", "--k", "2"]),
        ("zero points in plan", vec!["plan-params", "--n", "0", "--d", "16"]),
        ("serving the owner", vec!["serve", "--role", "owner"]),
        ("serving an unknown role", vec!["serve", "--role", "banana"]),
    ];
    for (label, args) in cases {
        let output = run_cli(&args);
        assert_eq!(exit_code(&output), 2, "{label}: stderr {}", stderr_str(&output));
    }

    let output = bin()
        .args(["run", "--data", data, "--k", "2", "--out", out])
        .env("PPKM_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2, "malformed seed env: {}", stderr_str(&output));
}

#[test]
fn runtime_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let missing = run_cli(&["run", "--data", "/nonexistent/data.csv", "--k", "2", "--out", out]);
    assert_eq!(exit_code(&missing), 1, "stderr: {}", stderr_str(&missing));

    let too_many = run_cli(&["run", "--data", data.to_str().unwrap(), "--k", "99", "--out", out]);
    assert_eq!(exit_code(&too_many), 1, "stderr: {}", stderr_str(&too_many));

    let ragged = tmp.path().join("ragged.csv");
    std::fs::write(&ragged, "1.0,2.0\n3.0\n").unwrap();
    let malformed = run_cli(&["run", "--data", ragged.to_str().unwrap(), "--k", "2", "--out", out]);
    assert_eq!(exit_code(&malformed), 1, "stderr: {}", stderr_str(&malformed));
    assert!(stderr_str(&malformed).starts_with("error:"), "stderr: {}", stderr_str(&malformed));
}

#[test]
fn seed_env_var_is_a_fallback_for_the_flag() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let data = data.to_str().unwrap();

    let flag_out = tmp.path().join("flag");
    run_cli(&["run", "--data", data, "--k", "3", "--seed", "7", "--out", flag_out.to_str().unwrap()]);

    let env_out = tmp.path().join("env");
    let output = bin()
        .args(["run", "--data", data, "--k", "3", "--out", env_out.to_str().unwrap()])
        .env("PPKM_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_str(&output));

    assert_eq!(
        std::fs::read(flag_out.join("labels.csv")).unwrap(),
        std::fs::read(env_out.join("labels.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(flag_out.join("transcript.jsonl")).unwrap(),
        std::fs::read(env_out.join("transcript.jsonl")).unwrap()
    );

    // An explicit flag wins over the environment.
    let override_out = tmp.path().join("override");
    let output = bin()
        .args([
            "run", "--data", data, "--k", "3", "--seed", "9",
            "--out", override_out.to_str().unwrap(),
        ])
        .env("PPKM_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    assert_eq!(read_json(&override_out.join("report.json"))["config"]["seed"], 9);
}

#[test]
fn a_run_replays_from_its_own_reported_config() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let first_out = tmp.path().join("first");
    run_cli(&[
        "run", "--data", data.to_str().unwrap(), "--k", "3", "--seed", "21",
        "--out", first_out.to_str().unwrap(),
    ]);

    let report = read_json(&first_out.join("report.json"));
    let config_path = tmp.path().join("replay.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&report["config"]).unwrap())
        .unwrap();

    // The reported config pins --out too; replaying overwrites in place.
    let before = std::fs::read(first_out.join("transcript.jsonl")).unwrap();
    let output = run_cli(&["run", "--config", config_path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_str(&output));
    assert_eq!(before, std::fs::read(first_out.join("transcript.jsonl")).unwrap());

    // Flags override file entries.
    let second_out = tmp.path().join("second");
    let output = run_cli(&[
        "run", "--config", config_path.to_str().unwrap(), "--k", "2",
        "--out", second_out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_str(&output));
    let replayed = read_json(&second_out.join("report.json"));
    assert_eq!(replayed["config"]["k"], 2);
    assert_eq!(replayed["config"]["seed"], 21);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let config_path = tmp.path().join("bad.json");
    std::fs::write(&config_path, r#"{"k": 2, "clusterz": 3}"#).unwrap();
    let output = run_cli(&["run", "--config", config_path.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 2, "stderr: {}", stderr_str(&output));
}

#[test]
fn oracle_matches_run_labels_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let data = data.to_str().unwrap();

    let run_out = tmp.path().join("run");
    run_cli(&["run", "--data", data, "--k", "3", "--seed", "9", "--out", run_out.to_str().unwrap()]);

    let oracle_out = tmp.path().join("oracle");
    let first = run_cli(&[
        "oracle", "--data", data, "--k", "3", "--seed", "9", "--out", oracle_out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&first), 0, "stderr: {}", stderr_str(&first));
    assert_eq!(
        std::fs::read(run_out.join("labels.csv")).unwrap(),
        std::fs::read(oracle_out.join("labels.csv")).unwrap(),
        "protocol and plaintext labels diverge"
    );

    let doc = stdout_json(&first);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["k"], 3);
    assert_eq!(doc["labels"].as_object().unwrap().len(), 24);
    assert!(doc["within_cluster_ss"].as_f64().unwrap() >= 0.0);
    assert_eq!(doc["centers"].as_array().unwrap().len(), 3);

    let second = run_cli(&["oracle", "--data", data, "--k", "3", "--seed", "9"]);
    assert_eq!(stdout_str(&first), stdout_str(&second));
}

#[test]
fn security_plan_reports_the_published_operating_point() {
    let good = stdout_json(&run_cli(&[
        "plan-params", "--n", "65536", "--d", "16", "--ell1", "64", "--ell2", "32",
    ]));
    assert_eq!(good["secure"], true);
    assert_eq!(good["ell1"], 64);
    assert!(good["log2_p_point_guess"].as_f64().unwrap() < -80.0);
    assert!(good["log2_p_quotient_guess"].as_f64().unwrap() < -80.0);

    let weak = stdout_json(&run_cli(&["plan", "--n", "65536", "--d", "16"]));
    assert_eq!(weak["ell1"], 34, "default magnitude class");
    assert_eq!(weak["secure"], false, "34/32 leaks too much for 2^-80");

    let table = run_cli(&["plan-params", "--n", "65536", "--d", "16", "--table"]);
    let text = stdout_str(&table);
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit()))
        .collect();
    assert_eq!(data_rows.len(), 4, "table:\n{text}");
    assert!(text.contains("secure needs"), "table footer:\n{text}");
}

#[test]
fn attack_table_has_ten_rows_in_both_renderings() {
    let rows = stdout_json(&run_cli(&["analyze", "--attack-table"]));
    let rows = rows.as_array().expect("JSON array");
    assert_eq!(rows.len(), 10);
    for row in rows {
        assert!(row["log2_steps"].as_f64().unwrap() > 0.0);
    }

    let text = stdout_str(&run_cli(&["analyze", "--attack-table", "--table"]));
    let data_rows: Vec<&str> = text
        .lines()
        .filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit()))
        .collect();
    assert_eq!(data_rows.len(), 10, "table:\n{text}");
}

#[test]
fn explicit_divergence_inputs_evaluate_the_closed_forms() {
    let same_mask = stdout_json(&run_cli(&["analyze", "--kl", "--x1", "4", "--x2", "2", "--z", "6"]));
    let got = same_mask["kd_same_mask"].as_f64().unwrap();
    let want = -(4.0f64 / 2.0).ln() * 6.0;
    assert!((got - want).abs() < 1e-12, "kd_same_mask {got} vs {want}");
    assert!((same_mask["kd_same_mask_abs"].as_f64().unwrap() - want.abs()).abs() < 1e-12);

    let ratio = stdout_json(&run_cli(&[
        "analyze", "--kl", "--x", "3", "--y", "2", "--ratio-sum", "10",
    ]));
    let got = ratio["kd_aggregator_ratio"].as_f64().unwrap();
    let want = -(3.0f64 / 2.0).ln() * 10.0;
    assert!((got - want).abs() < 1e-12, "kd_aggregator_ratio {got} vs {want}");

    let quotient = stdout_json(&run_cli(&[
        "analyze", "--kl", "--x11", "5", "--x21", "3", "--x31", "2", "--x41", "6",
        "--r1", "100", "--eps", "0.5", "--d", "4",
    ]));
    let got = quotient["kd_quotient_bound"].as_f64().unwrap();
    let d12: f64 = 2.0;
    let d34: f64 = 4.0;
    let want = 4.0 * (d12 / d34) * ((100.0 + 0.5 * 6.0 / d34) / (100.0 - 0.5 * 3.0 / d12)).ln();
    assert!((got - want).abs() < 1e-12, "kd_quotient_bound {got} vs {want}");
}

#[test]
fn transcript_replay_recovers_per_round_divergences() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let out = tmp.path().join("out");
    run_cli(&[
        "run", "--data", data.to_str().unwrap(), "--k", "3", "--seed", "11",
        "--out", out.to_str().unwrap(),
    ]);
    let transcript = out.join("transcript.jsonl");
    let report = read_json(&out.join("report.json"));
    let iterations = report["iterations"].as_u64().unwrap();
    assert!(iterations >= 2, "fixture converges too fast to test cross-round leakage");

    let doc = stdout_json(&run_cli(&["analyze", "--kl", "--transcript", transcript.to_str().unwrap()]));
    let rounds = doc["rounds"].as_array().expect("rounds array");
    assert_eq!(rounds.len() as u64, iterations);
    for (i, round) in rounds.iter().enumerate() {
        assert!(round["x"].as_f64().unwrap() > 1.0);
        assert!(round["y"].as_f64().unwrap() > 1.0);
        assert!(round["kd_aggregator_ratio"].as_f64().unwrap().is_finite());
        assert!(
            round["clusters_skipped"].as_array().unwrap().is_empty(),
            "no cluster emptied in this fixture"
        );
        if i == 0 {
            assert!(round["kd_same_mask"].is_null(), "no previous round to compare");
        } else {
            assert!(round["kd_same_mask"].as_f64().unwrap().is_finite());
        }
    }

    // Truncated logs fail as runtime errors, not panics.
    let broken = tmp.path().join("broken.jsonl");
    let text = std::fs::read_to_string(&transcript).unwrap();
    let keep: Vec<&str> = text.lines().take(2).collect();
    std::fs::write(&broken, keep.join("\n")).unwrap();
    let output = run_cli(&["analyze", "--kl", "--transcript", broken.to_str().unwrap()]);
    assert_eq!(exit_code(&output), 1, "stderr: {}", stderr_str(&output));
}

#[test]
fn weak_mode_runs_with_an_explicit_width() {
    let tmp = TempDir::new().unwrap();
    let data = fixture(tmp.path());
    let out = tmp.path().join("out");
    let output = run_cli(&[
        "run", "--data", data.to_str().unwrap(), "--k", "3", "--seed", "4", "--mode", "weak",
        "--w", "64", "--out", out.to_str().unwrap(), "--with-oracle",
    ]);
    assert_eq!(exit_code(&output), 0, "stderr: {}", stderr_str(&output));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["mode"], "weak");
    assert_eq!(report["config"]["w"], 64.0);
    assert_eq!(report["bounds"]["mode"], "weak");
    assert_eq!(report["oracle"]["assignments_match"], true);
}
