use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybrid-leo")).args(args).output().unwrap()
}

fn run_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--experiment",
        "bound-tightness",
        "--small",
        "--mc-samples",
        "20",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    cli(&args)
}

#[test]
fn small_run_writes_csv_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run_small(&a, &["--seed", "3"]).status.success());
    assert!(run_small(&b, &["--seed", "3"]).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("experiment,architecture,resolution,m_rf,"));
    // header plus one row per power budget
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let res = run_small(&out, &["--format", "json", "--trials", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.trim_start().starts_with('['));
    assert!(text.contains("\"trials\": 2"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "k_users = 12\nm_rf = 9\n").unwrap();
    assert_eq!(cli(&["validate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "antennas = 4\n").unwrap();
    assert_eq!(cli(&["validate", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    assert_eq!(cli(&["validate", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    let out = dir.path().join("x.csv");
    let res = run_small(&out, &["--config", bad.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn validate_accepts_a_good_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "n_tx_x = 4\nn_tx_y = 4\nk_users = 4\nm_rf = 4\npower_budget_db = 10.0\n").unwrap();
    let res = cli(&["validate", "--config", good.to_str().unwrap()]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("ok: 16 antennas"));
}

#[test]
fn unsupported_grid_cell_exits_with_3() {
    // 12 RF chains cannot split 16 antennas into equal subarrays.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "n_tx_x = 4\nn_tx_y = 4\nk_users = 4\nm_rf = 12\n").unwrap();
    let out = dir.path().join("o.csv");
    let res = cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--experiment",
        "ee-vs-power-budget",
        "--small",
        "--mc-samples",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    // the table is still written, with the failure in the error column
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("partially connected array needs m_rf | n_tx"));
}

#[test]
fn bad_arguments_are_rejected() {
    assert!(!cli(&["run", "--experiment", "nonsense", "--out", "x"]).status.success());
    assert!(!cli(&["run", "--experiment", "method-compare", "--out", "x", "--format", "xml"]).status.success());
}
