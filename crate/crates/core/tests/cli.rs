use std::process::{Command, Output};

fn fbcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbcast"))
        .args(args)
        .env_remove("FBCAST_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header and rows as `(column -> cell)` lookups.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn rates_full_correlation_row() {
    let o = fbcast(&[
        "rates", "--model", "bc2", "--p", "4", "--s1", "1", "--s2", "1", "--rho", "-1",
    ]);
    assert!(o.status.success());
    let (h, rows) = table(&stdout(&o));
    let r = &rows[0];
    assert_eq!(num(&r[col(&h, "closed_sum")]), 2.0);
    assert!((num(&r[col(&h, "cutset_two_cuts")]) - 5f64.log2()).abs() < 1e-11);
    assert_eq!(r[col(&h, "cutset_single_cut")], "inf");
    assert_eq!(r[col(&h, "full_corr")], "true");
    assert_eq!(r[col(&h, "degraded")], "false");
    assert!(num(&r[col(&h, "achievable_sum")]) >= 2.0 - 1e-11);
}

#[test]
fn rates_degraded_row() {
    let o = fbcast(&[
        "rates", "--model", "bc2", "--p", "1", "--s1", "2", "--s2", "0.25", "--rho", "0.35355",
    ]);
    assert!(o.status.success());
    let (h, rows) = table(&stdout(&o));
    let r = &rows[0];
    assert_eq!(r[col(&h, "branch")], "degraded");
    assert_eq!(r[col(&h, "degraded")], "true");
    let want = 0.5 * 5f64.log2();
    assert!((num(&r[col(&h, "hi_snr")]) - want).abs() < 1e-11);
    assert!((num(&r[col(&h, "no_feedback")]) - want).abs() < 1e-11);
}

#[test]
fn tight_tolerance_reclassifies_degraded_example() {
    let o = fbcast(&[
        "rates", "--p", "1", "--s1", "2", "--s2", "0.25", "--rho", "0.35355", "--tol", "1e-12",
    ]);
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows[0][col(&h, "branch")], "cooperative");
}

#[test]
fn empty_grid_exits_2_without_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = fbcast(&["rates", "--p", "", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid is empty"));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_inputs_exit_2() {
    for args in [
        vec!["rates", "--p", "-1"],
        vec!["rates", "--p", "1", "--rho", "1.5"],
        vec!["rates", "--p", "1", "--s1", "0"],
        vec!["fig3", "--rho", "0.5,1"],
        vec!["rates", "--model", "nope", "--p", "1"],
        vec!["scheme-verify", "--p", "1,2", "--rho", "-1"],
    ] {
        assert_eq!(fbcast(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn fig3_default_minimum() {
    let o = fbcast(&["fig3"]);
    let (h, rows) = table(&stdout(&o));
    assert_eq!(h, ["rho", "gamma"]);
    assert_eq!(rows.len(), 1000);
    let (r, g) = rows
        .iter()
        .map(|r| (num(&r[0]), num(&r[1])))
        .fold((0.0, f64::INFINITY), |a, x| if x.1 < a.1 { x } else { a });
    assert!((r - 0.3536).abs() < 2e-3);
    assert!((g - 4.0).abs() < 1e-6);
}

#[test]
fn fig3_symmetric_is_decreasing() {
    let o = fbcast(&["fig3", "--s1", "1", "--s2", "1"]);
    let (_, rows) = table(&stdout(&o));
    let g: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    assert!(g.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn fig3_single_point() {
    let o = fbcast(&["fig3", "--rho", "0.2"]);
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn fig4_layout_and_order() {
    let o = fbcast(&["fig4", "--p", "100,1000"]);
    let (h, rows) = table(&stdout(&o));
    assert_eq!(h, ["P", "rho", "ratio"]);
    assert_eq!(rows.len(), 10);
    let ratios: Vec<f64> = rows[..5].iter().map(|r| num(&r[2])).collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]));
    let o = fbcast(&["fig4", "--p", "100", "--rho", "-1"]);
    let (_, rows) = table(&stdout(&o));
    assert!((num(&rows[0][2]) - 1.997).abs() < 2e-3);
}

#[test]
fn output_is_byte_stable() {
    let a = fbcast(&["fig4", "--p", "log:1:10000:9"]);
    let b = fbcast(&["fig4", "--p", "log:1:10000:9"]);
    assert_eq!(a.stdout, b.stdout);
    let args = [
        "simulate", "--model", "bck", "--alphas", "1,-1,2", "--p", "16", "--eta", "4", "--trials", "5000", "--seed",
        "7",
    ];
    assert_eq!(fbcast(&args).stdout, fbcast(&args).stdout);
}

#[test]
fn verify_bc2_full_correlation_passes() {
    let o = fbcast(&[
        "scheme-verify",
        "--model",
        "bc2",
        "--p",
        "4",
        "--rho",
        "-1",
        "--eta",
        "3..6",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["etas"].as_array().unwrap().len(), 4);
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for n in [
        "causality",
        "interference",
        "canceled_noise",
        "power",
        "closed_form_rates",
    ] {
        assert!(names.contains(&n), "{n}");
    }
}

#[test]
fn verify_with_monte_carlo() {
    let o = fbcast(&[
        "scheme-verify",
        "--model",
        "ic",
        "--gains",
        "1,1,1,1",
        "--rho",
        "-1",
        "--p",
        "100",
        "--eta",
        "4",
        "--trials",
        "20000",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"] == "monte_carlo"));
}

#[test]
fn verify_rejects_duplicate_alphas() {
    let o = fbcast(&["scheme-verify", "--model", "bck", "--alphas", "1,1,2", "--p", "16"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_rejects_degenerate_interference_gains() {
    let o = fbcast(&[
        "scheme-verify",
        "--model",
        "ic",
        "--gains",
        "1,1,-1,1",
        "--rho",
        "-1",
        "--p",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"bc2\"\np = [1, 10]\nrho = -0.5\ns2 = 2\n").unwrap();
    let o = fbcast(&["bounds", "--config", cfg.to_str().unwrap(), "--s2", "3"]);
    assert!(o.status.success());
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!(num(&rows[1][col(&h, "P")]), 10.0);
    assert_eq!(num(&rows[0][col(&h, "sigma2_sq")]), 3.0);
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(
        fbcast(&["bounds", "--p", "1", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn seed_from_environment_matches_flag() {
    let args = [
        "simulate", "--model", "p2p", "--p", "4", "--eta", "2", "--trials", "3000",
    ];
    let env = Command::new(env!("CARGO_BIN_EXE_fbcast"))
        .args(args)
        .env("FBCAST_SEED", "11")
        .output()
        .unwrap();
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "11"]);
    assert_eq!(env.stdout, fbcast(&with_flag).stdout);
    assert_ne!(env.stdout, fbcast(&args).stdout);
}

#[test]
fn out_file_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let o = fbcast(&["fig3", "--rho", "0:0.5:3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        stdout(&fbcast(&["fig3", "--rho", "0:0.5:3"]))
    );
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn prelog_reports_slopes() {
    let o = fbcast(&["prelog", "--model", "bc2", "--rho", "-1", "--eta", "3"]);
    let (h, rows) = table(&stdout(&o));
    assert_eq!(h, ["quantity", "slope", "expected"]);
    let get = |q: &str| num(&rows.iter().find(|r| r[0] == q).unwrap()[1]);
    assert!((get("closed_sum") - 2.0).abs() < 0.05);
    assert!((get("finite_sum_eta_3") - 4.0 / 3.0).abs() < 0.05);
    assert!((get("no_feedback") - 1.0).abs() < 0.02);
    assert_eq!(rows.iter().find(|r| r[0] == "cutset_single_cut").unwrap()[1], "inf");
}

#[test]
fn rates_other_models() {
    let o = fbcast(&["rates", "--model", "p2p", "--p", "4", "--eta", "1"]);
    let (h, rows) = table(&stdout(&o));
    assert!((num(&rows[0][col(&h, "finite_rate")]) - 0.5 * 5f64.log2()).abs() < 1e-11);
    let o = fbcast(&["rates", "--model", "bck", "--alphas", "1,-1,2", "--p", "16"]);
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows.len(), 9);
    assert_eq!(num(&rows[0][col(&h, "limit_rate")]), 2.0);
    let o = fbcast(&[
        "rates", "--model", "ic", "--gains", "1,1,1,1", "--p", "100", "--eta", "1",
    ]);
    let (h, rows) = table(&stdout(&o));
    assert_eq!(rows[0][col(&h, "finite_r1")], "nan");
}
