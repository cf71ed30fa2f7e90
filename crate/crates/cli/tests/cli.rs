use std::path::Path;
use std::process::{Command, Output};

fn sumparam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumparam"))
        .args(args)
        .env_remove("SUMPARAM_OUT_DIR")
        .output()
        .expect("spawn sumparam")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_single_tone_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = sumparam(&[
        "synth",
        "--amp",
        "1",
        "--freq",
        "0.1",
        "--n",
        "16",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "n,re,im");
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[1], "0,1.0,0.0");
    // second sample is e^{j 2π 0.1}
    let f: Vec<f64> = rows[2]
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    let w = std::f64::consts::TAU * 0.1;
    assert!((f[0] - w.cos()).abs() < 1e-12 && (f[1] - w.sin()).abs() < 1e-12);
}

#[test]
fn crb_single_tone_omega() {
    let o = sumparam(&[
        "crb", "--p-sig", "1", "--sigma2", "1", "--n", "100", "--ts", "1", "--json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let crb = v["closed_form"]["crb_omega"].as_f64().unwrap();
    let expected = 12.0 / (100.0 * (100.0f64 * 100.0 - 1.0));
    assert!((crb - expected).abs() / expected < 1e-12, "{crb}");
    assert!((crb - 1.20012e-5).abs() < 1e-10);

    let text = sumparam(&["crb", "--p-sig", "1", "--sigma2", "1", "--n", "100"]);
    assert!(stdout(&text).contains("1.200120e-5"));
}

#[test]
fn usage_errors_exit_one() {
    let o = sumparam(&["bench", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(sumparam(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sumparam(&["crb", "--sigma2", "1"]).status.code(), Some(1));
    assert_eq!(sumparam(&["--help"]).status.code(), Some(0));
    assert_eq!(sumparam(&["--version"]).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_two_with_json() {
    // Two coincident tones make the Fisher matrix singular.
    let dir = tempfile::tempdir().unwrap();
    let ens = dir.path().join("e.json");
    std::fs::write(
        &ens,
        r#"{"components":[{"amplitude":1.0,"omega":1.0,"phase":0.0},{"amplitude":1.0,"omega":1.0,"phase":0.5}],"ts":1.0}"#,
    )
    .unwrap();
    let o = sumparam(&["audit", "--ensemble", path(&ens), "--n", "64"]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"], "numerical");
}

#[test]
fn synth_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("s.csv");
    let truth = dir.path().join("t.json");
    let spectrum = dir.path().join("p.csv");
    let trace = dir.path().join("trace.csv");
    let o = sumparam(&[
        "synth",
        "--seed",
        "5",
        "--k",
        "3",
        "--n",
        "1024",
        "--snr-db",
        "40",
        "--out",
        path(&sig),
        "--truth",
        path(&truth),
        "--spectrum",
        path(&spectrum),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let t: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    let true_sigma = t["ground_truth"]["sigma_sum"].as_f64().unwrap();
    let true_omega = t["ground_truth"]["omega_sum"].as_f64().unwrap();

    for method in ["egem", "ipfft", "rootmusic"] {
        let mut args = vec![
            "estimate",
            "--input",
            path(&sig),
            "--method",
            method,
            "--order",
            "3",
        ];
        if method == "egem" {
            args.extend(["--trace", path(&trace)]);
        }
        let o = sumparam(&args);
        assert!(
            o.status.success(),
            "{method}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        let th = &v["result"]["theta_hat"];
        let s = th["sigma_sum"].as_f64().unwrap();
        let w = th["omega_sum"].as_f64().unwrap();
        assert!(
            (s - true_sigma).abs() / true_sigma < 0.02,
            "{method} sigma {s} vs {true_sigma}"
        );
        assert!(
            (w - true_omega).abs() / true_omega < 0.02,
            "{method} omega {w} vs {true_omega}"
        );
    }

    let trace = std::fs::read_to_string(&trace).unwrap();
    assert!(trace.starts_with("iteration,omega_hat,re_phi,im_phi,sigma_hat"));
    assert!(trace.lines().count() >= 2);

    let spectrum = std::fs::read_to_string(&spectrum).unwrap();
    let reparsed = sumparam::io::read_periodogram_csv(spectrum.as_bytes()).unwrap();
    assert_eq!(reparsed.len(), 2048);
}

#[test]
fn bench_and_report_outputs_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = sumparam(&[
        "bench",
        "--trials",
        "4",
        "--n-values",
        "256",
        "--snr-grid",
        "20",
        "--k",
        "3",
        "--seed",
        "9",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trials.csv",
        "summary.csv",
        "timing.csv",
        "claims.txt",
        "config.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let trials =
        sumparam::bench::read_trials_csv(std::fs::File::open(out.join("trials.csv")).unwrap())
            .unwrap();
    assert_eq!(trials.len(), 4 * 3);
    let summary =
        sumparam::bench::read_summary_csv(std::fs::File::open(out.join("summary.csv")).unwrap())
            .unwrap();
    assert_eq!(summary.len(), 3 * 4);

    let r = sumparam(&["report", "--summary", path(&out.join("summary.csv"))]);
    assert!(r.status.success());
    assert_eq!(
        stdout(&r),
        std::fs::read_to_string(out.join("claims.txt")).unwrap()
    );
    assert_eq!(stdout(&r).matches("not evaluated").count(), 4);
}
