use std::fs;
use std::path::Path;

use bwpred::cli::run;

fn bwpred(args: &[&str]) -> i32 {
    let mut argv = vec!["bwpred".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    let data = tmp.path().join("data");
    let model = tmp.path().join("model");
    let eval = tmp.path().join("eval");
    let pred = tmp.path().join("pred");
    let ctl = tmp.path().join("ctl");
    let quick = r#"{"train": {"epochs": 1, "mlp_sizes": [116, 8, 1]}}"#;
    let ifaces = "r1-eth1,r2-eth1,r2-eth3";

    assert_eq!(bwpred(&["simulate", "--hours", "0.2", "--interfaces", ifaces, "--out", s(&raw)]), 0);
    assert!(raw.join("interfaces.json").exists());
    assert!(raw.join("r2-eth1").join("system.csv").exists());
    assert!(raw.join("simulation.json").exists());

    assert_eq!(bwpred(&["featurize", "--telemetry", s(&raw), "--out", s(&data)]), 0);
    let csv = data.join("r2-eth1.csv");
    assert!(csv.exists() && data.join("r2-eth1.json").exists());

    assert_eq!(
        bwpred(&["train", "--model", "mlp", "--data", s(&data), "--config", quick, "--out", s(&model)]),
        0
    );
    let ckpt = model.join("model.ckpt");
    assert!(ckpt.exists());
    let curve = fs::read_to_string(model.join("loss_curve.csv")).unwrap();
    assert!(curve.starts_with("epoch,mse\n"));
    // untrained loss plus one epoch
    assert_eq!(curve.lines().count(), 3);

    assert_eq!(bwpred(&["evaluate", "--model", "arima", "--data", s(&data), "--out", s(&eval)]), 0);
    let report = fs::read_to_string(eval.join("report.csv")).unwrap();
    assert!(report.starts_with("model,fold,interface,bias,mae,mse,rmse"));
    assert!(report.lines().any(|l| l.starts_with("arima,avg")));

    assert_eq!(
        bwpred(&["predict", "--checkpoint", s(&ckpt), "--data", s(&csv), "--svg", "--out", s(&pred)]),
        0
    );
    assert!(pred.join("trace.svg").exists());
    let trace = pred.join("trace.csv");
    assert_eq!(bwpred(&["plot-trace", "--trace", s(&trace), "--out", s(&pred)]), 0);

    assert_eq!(
        bwpred(&["control", "--checkpoint", s(&ckpt), "--policy", "block", "--hours", "0.2", "--out", s(&ctl)]),
        0
    );
    for f in ["actions.csv", "report.csv", "timeline.csv", "manifest.json"] {
        assert!(ctl.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ctl.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "control");
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(bwpred(&["train", "--model", "mlp", "--out", out]), 1);
    assert_eq!(bwpred(&["no-such-command"]), 1);
    assert_eq!(bwpred(&["simulate", "--offset", "50", "--out", out]), 1);
    assert_eq!(bwpred(&["train", "--model", "svm", "--data", out, "--out", out]), 1);
    assert_eq!(bwpred(&["simulate", "--hours", "0.1", "--interfaces", "r9-eth9", "--out", out]), 1);
    assert_eq!(bwpred(&["simulate", "--config", "{\"bogus\": 1}", "--out", out]), 1);
    assert_eq!(bwpred(&["--help"]), 0);
}

#[test]
fn missing_files_are_runtime_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let missing = tmp.path().join("nope.ckpt");
    let code = bwpred(&["predict", "--checkpoint", s(&missing), "--data", s(&missing), "--out", out]);
    assert_eq!(code, 2);
}
