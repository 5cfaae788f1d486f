use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use holonewt::io::read_checkpoint;
use holonewt::trainer::{read_trials_csv, TrialOutcome, TrialRecord, TrialStats};
use tempfile::TempDir;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> PathBuf {
    repo().join("configs").join(name)
}

fn holonewt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holonewt"))
        .args(args)
        .env_remove("HOLONEWT_JOBS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn manifest_artifacts(dir: &Path) -> Vec<String> {
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect()
}

#[test]
fn train_writes_three_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let cfg = config("xor_taylor3_pseudo_newton.json");
    let res = holonewt(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let (top, _) = read_checkpoint(&out.join("weights.json")).unwrap();
    assert_eq!(top.widths(), &[2, 4, 1]);
    let record: TrialRecord =
        serde_json::from_str(&fs::read_to_string(out.join("record.json")).unwrap()).unwrap();
    assert_eq!(record.outcome, TrialOutcome::Success);
    let history = fs::read_to_string(out.join("error_history.csv")).unwrap();
    assert!(history.starts_with("iteration,error\n"));
    assert_eq!(history.lines().count() as u64, record.iterations + 2);

    let artifacts = manifest_artifacts(&out);
    assert_eq!(
        artifacts,
        ["weights.json", "error_history.csv", "record.json"]
    );
    assert!(artifacts.iter().all(|a| out.join(a).exists()));
}

#[test]
fn failed_training_exits_2() {
    let tmp = TempDir::new().unwrap();
    let data = repo().join("data/xor.json");
    let cfg = write_config(
        &tmp,
        &format!(
            r#"{{"topology":[2,4,1],"activations":"sigmoid","dataset_path":"{}","method":"gradient_descent","trial":{{"max_iters":3}}}}"#,
            data.display()
        ),
    );
    let res = holonewt(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 2);
    let record: TrialRecord =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("o/record.json")).unwrap())
            .unwrap();
    assert_eq!(record.outcome, TrialOutcome::LocalMinimum);
    assert_eq!(record.iterations, 3);
}

#[test]
fn usage_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let missing_data = write_config(
        &tmp,
        r#"{"topology":[2,4,1],"activations":"taylor3","dataset_path":"nowhere.json","method":"pseudo_newton"}"#,
    );
    assert_eq!(
        code(&holonewt(&[
            "train",
            "--config",
            missing_data.to_str().unwrap(),
            "--out",
            out
        ])),
        1
    );

    let gd_one_step = write_config(
        &tmp,
        r#"{"topology":[2,4,1],"activations":"taylor3","method":"gradient_descent","steplength":{"mode":"one_step_newton"}}"#,
    );
    assert_eq!(
        code(&holonewt(&[
            "train",
            "--config",
            gd_one_step.to_str().unwrap(),
            "--out",
            out
        ])),
        1
    );

    let malformed = write_config(&tmp, r#"{"topology":[2,4,1],"#);
    assert_eq!(
        code(&holonewt(&[
            "trials",
            "--config",
            malformed.to_str().unwrap(),
            "--out",
            out
        ])),
        1
    );

    let cfg = config("xor_taylor3_pseudo_newton.json");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(
        code(&holonewt(&[
            "trials", "--config", cfg, "--out", out, "--trials", "0"
        ])),
        1
    );
    assert_eq!(
        code(&holonewt(&[
            "trials", "--config", cfg, "--out", out, "--jobs", "0"
        ])),
        1
    );
    assert_eq!(code(&holonewt(&["trials", "--config", cfg])), 1);
    assert_eq!(
        code(&holonewt(&["verify", "--config", "/no/such/config.json"])),
        1
    );
    assert_eq!(code(&holonewt(&["frobnicate"])), 1);
    assert_eq!(code(&holonewt(&["--help"])), 0);
}

#[test]
fn trials_are_reproducible_across_runs_and_jobs() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("xor_sigmoid_newton.json");
    let run = |name: &str, jobs: Option<&str>| {
        let out = tmp.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_holonewt"));
        cmd.args([
            "trials",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .args(["--trials", "40", "--seed", "11"])
        .env_remove("HOLONEWT_JOBS");
        if let Some(j) = jobs {
            cmd.env("HOLONEWT_JOBS", j);
        }
        let res = cmd.output().unwrap();
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
        fs::read(out.join("trials.csv")).unwrap()
    };
    let first = run("a", None);
    assert_eq!(run("b", None), first);
    assert_eq!(run("c", Some("1")), first);
    assert_eq!(run("d", Some("3")), first);

    let rows = read_trials_csv(first.as_slice()).unwrap();
    assert_eq!(rows.len(), 40);
    assert_eq!(
        rows.iter().map(|r| r.seed).collect::<Vec<_>>(),
        (11..51).collect::<Vec<_>>()
    );
    let stats: TrialStats =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/stats.json")).unwrap())
            .unwrap();
    let total: u64 = TrialOutcome::ALL.iter().map(|o| stats.count(*o)).sum();
    assert_eq!(total, 40);
    assert_eq!(
        stats.successes,
        rows.iter()
            .filter(|r| r.outcome == TrialOutcome::Success)
            .count() as u64
    );
}

#[test]
fn trials_summary_reports_table_rows() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("xor_taylor3_pseudo_newton.json");
    let res = holonewt(&[
        "trials",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("successes") && text.contains("singular_matrix"));
    let stats: TrialStats =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats.n_trials, 100);
    assert!(stats.successes >= 90);
    assert!(stats.mean_iterations_over_successes.unwrap() <= 100.0);
}

#[test]
fn verify_passes_and_catches_faults() {
    let cfg = config("verify_taylor3.json");
    let cfg = cfg.to_str().unwrap();
    let ok = holonewt(&["verify", "--config", cfg, "--seed", "4"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["layers"].as_array().unwrap().len(), 2);

    let bad = holonewt(&[
        "verify",
        "--config",
        cfg,
        "--seed",
        "4",
        "--fault-theta",
        "1.5",
    ]);
    assert_eq!(code(&bad), 2);

    let tmp = TempDir::new().unwrap();
    let with_out = holonewt(&[
        "verify",
        "--config",
        cfg,
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&with_out), 0);
    assert_eq!(manifest_artifacts(tmp.path()), ["verify.json"]);
}
