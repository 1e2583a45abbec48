use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conformal-sphere"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn gen(path: &Path, seed: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "--bandlimit",
        "12",
        "--seed",
        seed,
        "--out",
        path.to_str().unwrap(),
        "gen",
        "--epsilon",
        "0.04",
        "--l-max-perturbation",
        "4",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn gen_is_deterministic() {
    let a = scratch("gen_a.json");
    let b = scratch("gen_b.json");
    let c = scratch("gen_c.json");
    assert!(gen(&a, "3", &[]).status.success());
    assert!(gen(&b, "3", &[]).status.success());
    assert!(gen(&c, "4", &[]).status.success());
    let (a, b, c) = (
        std::fs::read(a).unwrap(),
        std::fs::read(b).unwrap(),
        std::fs::read(c).unwrap(),
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn verify_and_stability_round_trip() {
    let g1 = scratch("pair_g1.json");
    let g2 = scratch("pair_g2.json");
    assert!(gen(&g1, "1", &["--normalize-area"]).status.success());
    assert!(gen(&g2, "1", &["--normalize-area"]).status.success());

    let rep = scratch("verify.json");
    let o = run(&[
        "verify-identities",
        "--metric",
        g1.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
        "--geodesics",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&rep).unwrap()).unwrap();
    assert!(json["records"].as_array().unwrap().len() > 5);

    let o = run(&[
        "stability",
        "--g1",
        g1.to_str().unwrap(),
        "--g2",
        g2.to_str().unwrap(),
        "--procrustes-trials",
        "200",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["delta"].as_f64(), Some(0.0));
}

#[test]
fn spectrum_of_round_metric() {
    let spec = scratch("round.json");
    let o = run(&[
        "--bandlimit",
        "8",
        "--out",
        spec.to_str().unwrap(),
        "gen",
        "--epsilon",
        "0",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["spectrum", "--metric", spec.to_str().unwrap(), "--count", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ev: Vec<f64> = json["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(ev.len(), 4);
    for (got, want) in ev.iter().zip([0.0, 2.0, 2.0, 2.0]) {
        assert!((got - want).abs() < 1e-9, "{ev:?}");
    }
}

#[test]
fn table_of_empty_report_is_header_only() {
    let rep = scratch("empty_report.json");
    std::fs::write(
        &rep,
        r#"{"schema":"1","environment":{"version":"0","bandlimit":8,"seed":0},"records":[]}"#,
    )
    .unwrap();
    let o = run(&["table", "--report", rep.to_str().unwrap(), "--kind", "constants"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "check,epsilon,ratio,anchor\n");

    let o = run(&["table", "--report", rep.to_str().unwrap(), "--kind", "histogram"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_code_two() {
    let o = run(&["gen", "--epsilon", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["--tolerance-scale", "0", "gen", "--epsilon", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify-identities", "--metric", "/nonexistent/metric.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_suite_reports_only_basis_failures() {
    let cfg = scratch("suite_config.json");
    std::fs::write(
        &cfg,
        r#"{"bandlimit":12,"ensemble_size":2,"convergence_bandlimits":[12,24],
            "l_max_perturbation":4,"procrustes_trials":100,"geodesic_directions":2,
            "round_only":true}"#,
    )
    .unwrap();
    let rep = scratch("suite_report.json");
    let o = run(&[
        "--out",
        rep.to_str().unwrap(),
        "suite",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let stderr = String::from_utf8(o.stderr).unwrap();
    let failed: Vec<&str> = stderr
        .lines()
        .filter_map(|l| l.strip_prefix("FAIL "))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(failed, ["basis.L_dY", "basis.L_star_dY"]);

    let o = run(&["table", "--report", rep.to_str().unwrap(), "--kind", "convergence"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
}
