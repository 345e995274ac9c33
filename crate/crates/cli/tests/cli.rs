use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dcp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DCP_OUT")
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_lambda_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(&["simulate", "--init", "single"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).trim(), "missing: lambda");
}

#[test]
fn zero_birth_rate_goes_extinct() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(
        &["simulate", "--lambda", "0", "--init", "single", "--seed", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("seed = 1"));
    let json = std::fs::read_to_string(dir.path().join("outcome.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["outcome"]["reason"], "Extinct");
    assert_eq!(v["seed"], 1);
}

#[test]
fn bad_values_and_unknown_keys_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(&["survival", "--lambda", "1:x:1", "--replicates", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[hardcore]\nlambda = 1.0\nreplicates = 5\nlamda = 2\n").unwrap();
    let o = dcp(&["--config", cfg.to_str().unwrap(), "hardcore"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lamda"));
    let o = dcp(&["simulate", "--lambda", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(
        &[
            "couple",
            "--mode",
            "pair",
            "--lambda",
            "3",
            "--a",
            "0",
            "--lambda2",
            "1",
            "--a2",
            "0",
            "--side",
            "20",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("couple: "), "{}", stderr(&o));
}

#[test]
fn command_line_beats_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(
        &[
            "--config",
            &config("hardcore.toml"),
            "hardcore",
            "--replicates",
            "50",
            "--seed",
            "9",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("hardcore.csv")).unwrap();
    assert!(csv.contains("#| seed = 9\n"));
    assert!(csv.contains("#| replicates = 50\n"));
    assert!(csv.contains("#| lambda = 1.0\n"));
}

#[test]
fn every_example_config_runs() {
    let small: &[(&str, &[&str])] = &[
        ("simulate", &["--side", "30", "--horizon", "5", "--snapshot", "5"]),
        ("survival", &["--side", "40", "--horizon", "10", "--replicates", "20"]),
        ("phase", &["--side", "40", "--horizon", "10", "--replicates", "10"]),
        (
            "lambda-c",
            &[
                "--side",
                "40",
                "--horizon",
                "20",
                "--replicates",
                "40",
                "--width",
                "0.5",
            ],
        ),
        ("meanfield", &[]),
        ("couple", &["--side", "60", "--horizon", "20", "--runs", "5"]),
        ("hardcore", &["--replicates", "200"]),
        ("blocks", &["--replicates", "50"]),
    ];
    for (cmd, extra) in small {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(&format!("{cmd}.toml"));
        let mut args = vec!["--config", cfg.as_str(), cmd];
        args.extend_from_slice(extra);
        let o = dcp(&args, dir.path());
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let p = entry.unwrap().path();
            let r = dcp(&["replay", p.to_str().unwrap()], &dir.path().join("replay"));
            assert!(stdout(&r).contains("identical"), "{}: {}", p.display(), stderr(&r));
        }
    }
}

#[test]
fn meanfield_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(
        &["meanfield", "--curve", "ac", "--lambda-grid", "0.05:0.95:0.05"],
        dir.path(),
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("a_c.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "lambda,a_c");
    assert_eq!(rows.len(), 20);
    let o = dcp(&["meanfield", "--lambda", "0.5", "--a", "3"], dir.path());
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("meanfield.csv")).unwrap();
    assert!(csv.contains("lambda,a,regime,u_minus,u_plus\n"));
    assert!(csv.contains(",bistable,"));
}

#[test]
fn sandwich_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(
        &[
            "couple",
            "--sandwich",
            "--lambda",
            "2",
            "--a",
            "-1",
            "--runs",
            "20",
            "--seed",
            "4",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("violations: 0"));
}
