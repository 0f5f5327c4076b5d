use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn snrsel(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snrsel"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(snrsel(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(
        snrsel(
            &["simulate", "--n", "10", "--d-noise", "-1", "--out", "x"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        snrsel(
            &["fit", "--method", "nope", "--rank", "2", "--in", "a", "--out", "b"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
    fs::write(
        dir.path().join("bad.json"),
        r#"{"runs": 2, "colour": "red"}"#,
    )
    .unwrap();
    let out = snrsel(
        &["experiment", "recovery-grid", "--config", "bad.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = snrsel(
        &[
            "fit",
            "--method",
            "lfa",
            "--rank",
            "2",
            "--in",
            "missing.snrf",
            "--out",
            "m.snrm",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(
        snrsel(
            &["predict", "--bank", "nobank", "--in", "x.csv", "--out", "p.csv"],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn simulate_fit_select() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(snrsel(
        &[
            "simulate",
            "--n",
            "400",
            "--d-noise",
            "20",
            "--seed",
            "3",
            "--out",
            "sim",
            "--csv"
        ],
        p
    )
    .status
    .success());
    assert!(
        p.join("sim/data.csv").exists()
            && !p.join("sim/data.snrf").exists()
            && p.join("sim/truth.json").exists()
    );
    let truth: serde_json::Value =
        serde_json::from_slice(&fs::read(p.join("sim/truth.json")).unwrap()).unwrap();
    assert_eq!(
        truth["true_indices"],
        serde_json::json!([0, 1, 2, 3, 4, 5, 6, 7, 8, 9])
    );

    assert!(snrsel(
        &[
            "fit",
            "--method",
            "lfa",
            "--rank",
            "3",
            "--in",
            "sim/data.csv",
            "--out",
            "m.snrm"
        ],
        p
    )
    .status
    .success());
    assert!(snrsel(
        &["select", "--model", "m.snrm", "--m", "10", "--out", "sel.csv"],
        p
    )
    .status
    .success());
    let text = fs::read_to_string(p.join("sel.csv")).unwrap();
    assert!(text.starts_with("# snrsel "));
    let selected: Vec<usize> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(selected, (0..10).collect::<Vec<_>>());
}

#[test]
fn threads_flag_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("g.json"),
        r#"{"n_values": [60], "noise_values": [10], "runs": 4, "methods": ["elf", "heteropca"]}"#,
    )
    .unwrap();
    for (t, out) in [("1", "one"), ("3", "three")] {
        let o = snrsel(
            &[
                "--threads",
                t,
                "experiment",
                "recovery-grid",
                "--config",
                "g.json",
                "--seed",
                "5",
                "--out",
                out,
            ],
            p,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(
        fs::read(p.join("one/recovery_grid.csv")).unwrap(),
        fs::read(p.join("three/recovery_grid.csv")).unwrap()
    );
}
