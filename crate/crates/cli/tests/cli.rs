use std::path::Path;
use std::process::{Command, Output};

use crucial::loss::kappa_star;
use serde_json::Value;

fn crucial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crucial")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn dir(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dir(tmp.path());
    assert_eq!(code(&crucial(&[])), 2);
    assert_eq!(code(&crucial(&["properties", "--bogus", "1", "--output-dir", out])), 2);
    assert_eq!(code(&crucial(&["properties"])), 2, "missing output dir");
    assert_eq!(code(&crucial(&["simulate", "--sigmas", "", "--output-dir", out])), 2);
    assert_eq!(code(&crucial(&["simulate", "--n", "lots", "--output-dir", out])), 2);
    assert_eq!(code(&crucial(&["train", "--model", "transformer", "--output-dir", out])), 2);
    assert_eq!(code(&crucial(&["properties", "--kappa-rule", "guess", "--output-dir", out])), 2);
    assert_eq!(code(&crucial(&["--help"])), 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    std::fs::write(&cfg, "# grid\nsigmas = 0.5\nlambdas = 1, 2\nn = 20000 # small\nseed = 9\n").unwrap();
    let out = tmp.path().join("out");
    let o = crucial(&["simulate", "--config", dir(&cfg), "--lambdas", "0.5", "--output-dir", dir(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let echo = std::fs::read_to_string(out.join("config.resolved")).unwrap();
    for line in ["lambdas = 0.5\n", "sigmas = 0.5\n", "n = 20000\n", "seed = 9\n", "tolerance_se = 3\n"] {
        assert!(echo.contains(line), "{line:?} missing from\n{echo}");
    }
    let report = json(&out.join("report_sigma0.5_lambda0.5.json"));
    assert!(report["seed"].as_u64().is_some());
    assert_eq!(report["n"], 20000);
    assert!(!out.join("report_sigma0.5_lambda1.json").exists());

    std::fs::write(&cfg, "epochs = 3\n").unwrap();
    assert_eq!(code(&crucial(&["simulate", "--config", dir(&cfg), "--output-dir", dir(&out)])), 2);
}

#[test]
fn normal_grid_orders_uniform_first() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crucial(&["simulate", "--n", "200000", "--output-dir", dir(tmp.path())]);
    assert_eq!(code(&o), 0);
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.contains(",u-beats-p,") && r.ends_with(",true")), "{summary}");
}

#[test]
fn half_normal_transcription_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["simulate", "--population", "half-normal", "--sigmas", "0.5", "--lambdas", "1", "--output-dir"];
    let o = crucial(&[&args[..], &[dir(tmp.path())]].concat());
    assert_eq!(code(&o), 1, "the transcribed E_P disagrees with simulation");
    let r = json(&tmp.path().join("report_sigma0.5_lambda1.json"));
    assert_eq!(r["orderings_agree"], false);
    assert_eq!(r["mc_ordering"], "p-beats-u");
}

#[test]
fn properties_pass_and_compat_flag_breaks_only_the_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    assert_eq!(code(&crucial(&["properties", "--output-dir", dir(&a)])), 0);
    let rep = json(&a.join("properties.json"));
    assert_eq!(rep["passed"], true);
    assert!(rep["suites"].as_array().unwrap().len() >= 10);

    let b = tmp.path().join("b");
    assert_eq!(code(&crucial(&["properties", "--kappa-rule", "main-text", "--output-dir", dir(&b)])), 1);
    let rep = json(&b.join("properties.json"));
    let passed =
        |name: &str| rep["suites"].as_array().unwrap().iter().find(|s| s["name"] == name).unwrap()["passed"].clone();
    assert_eq!(passed("kappa-argmin"), false);
    assert_eq!(passed("differentiated-scaling"), true);

    let c = tmp.path().join("c");
    let o = crucial(&["properties", "--suites", "sin-period,erfc-symmetry", "--output-dir", dir(&c)]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&c.join("properties.json"))["suites"].as_array().unwrap().len(), 2);
    assert_eq!(code(&crucial(&["properties", "--suites", "nope", "--output-dir", dir(&c)])), 2);
}

fn trace_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn trace_loss_easy_and_hard() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crucial(&["trace-loss", "--lambda", "0.5", "--output-dir", dir(tmp.path())]);
    assert_eq!(code(&o), 0);
    let rows = trace_rows(&tmp.path().join("trace.csv"));
    assert_eq!(rows.len(), 30);
    // epoch, threshold, easy (l, kappa, value), hard (l, kappa, value)
    let r0 = &rows[0];
    assert!(r0[3] >= 1.0 && r0[6] < 1.0);
    assert!((r0[3] - kappa_star(0.2, 1.1, 0.5).unwrap()).abs() < 1e-15);
    assert!((r0[6] - kappa_star(2.0, 1.1, 0.5).unwrap()).abs() < 1e-15);

    let same = tmp.path().join("same");
    let o = crucial(&["trace-loss", "--hard-start", "0.2", "--hard-decay", "0.8", "--output-dir", dir(&same)]);
    assert_eq!(code(&o), 0);
    for r in trace_rows(&same.join("trace.csv")) {
        assert_eq!(r[2..5], r[5..8]);
    }
}

#[test]
fn train_sweep_and_continuous_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = tmp.path().join("sweep");
    let o = crucial(&[
        "train",
        "--wrapper",
        "adp",
        "--epochs",
        "5",
        "--seeds",
        "5",
        "--seed",
        "3",
        "--output-dir",
        dir(&sweep),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for s in 3..8 {
        assert!(sweep.join(format!("metrics_seed{s}.csv")).exists());
        assert!(sweep.join(format!("loss_trace_seed{s}.csv")).exists());
    }
    let agg = json(&sweep.join("aggregate.json"));
    assert_eq!(agg["runs"].as_array().unwrap().len(), 5);
    assert!(agg["median_final_metric"].as_f64().unwrap() > 0.0);
    let metrics = std::fs::read_to_string(sweep.join("metrics_seed3.csv")).unwrap();
    assert!(metrics.starts_with("run_id,seed,epoch,split,metric_name,value\n"));
    assert!(metrics.contains("adp-seed3,3,4,test,mse,"));

    let cont = tmp.path().join("cont");
    let o =
        crucial(&["train", "--task", "continuous", "--epochs", "3", "--trace", "false", "--output-dir", dir(&cont)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&cont.join("transfer_seed0.json"));
    let r = m["R"].as_array().unwrap();
    assert_eq!(r.len(), 4);
    assert!(r.iter().all(|row| row.as_array().unwrap().len() == 4));
    assert!(m["bwt"].is_f64() && m["fwt"].is_f64());
    assert!(!cont.join("loss_trace_seed0.csv").exists());
}

#[test]
fn unit_wrapper_matches_plain_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut finals = Vec::new();
    for (name, extra) in [("plain", vec![]), ("unit", vec!["--wrapper", "baseline", "--kappa-rule", "unit"])] {
        let d = tmp.path().join(name);
        let mut args = vec!["train", "--epochs", "4", "--trace", "false", "--output-dir", dir(&d)];
        args.extend(extra);
        assert_eq!(code(&crucial(&args)), 0);
        finals.push(json(&d.join("aggregate.json"))["runs"][0]["final_metric"].as_f64().unwrap());
    }
    assert_eq!(finals[0].to_bits(), finals[1].to_bits());
}

#[test]
fn divergence_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crucial(&["train", "--lr", "50", "--epochs", "20", "--output-dir", dir(tmp.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn generated_csv_trains_like_generated_data() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g");
    assert_eq!(
        code(&crucial(&[
            "gen-data",
            "--kind",
            "drift",
            "--n",
            "64",
            "--length",
            "16",
            "--seed",
            "4",
            "--output-dir",
            dir(&g)
        ])),
        0
    );
    let csv = g.join("data.csv");
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("id,label,v1,v2,"));
    let mut results = Vec::new();
    for extra in [vec!["--data-csv", dir(&csv)], vec!["--n", "64", "--length", "16"]] {
        let d = tmp.path().join(format!("t{}", results.len()));
        let mut args = vec![
            "train",
            "--task",
            "single-shot",
            "--epochs",
            "3",
            "--window",
            "8",
            "--seed",
            "4",
            "--output-dir",
            dir(&d),
        ];
        args.extend(extra);
        let o = crucial(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        results.push(std::fs::read_to_string(d.join("metrics_seed4.csv")).unwrap());
    }
    assert_eq!(results[0], results[1]);
}
