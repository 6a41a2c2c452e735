use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[run]
seed = 4
repetitions = 2
methods = ["split", "rcp", "cqr"]

[dataset]
kind = "synthetic"
n = 600

[metrics]
wsc_directions = 20

[training.regressor]
hidden = [8]
epochs = 5

[training.quantile]
hidden = [8]
epochs = 5

[training.finetune]
epochs = 5
"#;

fn cpcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpcp"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_then_summarize_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let csv = dir.path().join("out/res.csv");
    let out = cpcp(&["run", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(text.starts_with("dataset,method,seed,status,"));

    let json = dir.path().join("res.json");
    let out = cpcp(&[
        "run",
        "--config",
        &cfg,
        "--out",
        json.to_str().unwrap(),
        "--format",
        "json",
        "--reps",
        "1",
        "--methods",
        "split,cqr",
        "--seed",
        "9",
    ]);
    assert!(out.status.success());
    let records: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["method"], "cqr");

    for path in [&csv, &json] {
        let out = cpcp(&["summarize", "--in", path.to_str().unwrap()]);
        assert!(out.status.success());
        let table = String::from_utf8(out.stdout).unwrap();
        assert!(table.contains("split") && table.contains("cqr"), "{table}");
    }
}

#[test]
fn saved_model_predicts_from_raw_features() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let models = dir.path().join("models");
    let out = cpcp(&[
        "run",
        "--config",
        &cfg,
        "--reps",
        "1",
        "--save-models",
        models.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for m in ["split", "rcp", "cqr"] {
        let model = models.join(format!("{m}.ckpt"));
        let out = cpcp(&[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--x",
            "0.5,0.1,0.2,0.3,-0.4",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = String::from_utf8(out.stdout).unwrap();
        let line = text.lines().find(|l| l.starts_with("y[0]: [")).unwrap();
        let inner = line.trim_start_matches("y[0]: [").trim_end_matches(']');
        let (lo, hi) = inner.split_once(", ").unwrap();
        assert!(lo.parse::<f64>().unwrap() <= hi.parse::<f64>().unwrap());
    }
    let bad = cpcp(&[
        "predict",
        "--model",
        models.join("split.ckpt").to_str().unwrap(),
        "--x",
        "1,2",
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("expects 5 features"));
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cpcp(&[
        "run",
        "--config",
        dir.path().join("nope.toml").to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let cfg = write_config(dir.path());
    let bad_method = cpcp(&["run", "--config", &cfg, "--methods", "split,bogus"]);
    assert!(!bad_method.status.success());
    assert!(String::from_utf8_lossy(&bad_method.stderr).contains("bogus"));

    let garbage = dir.path().join("garbage.ckpt");
    std::fs::write(&garbage, b"not a model").unwrap();
    let out = cpcp(&["predict", "--model", garbage.to_str().unwrap(), "--x", "1"]);
    assert!(!out.status.success());
}
