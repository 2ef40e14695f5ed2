use std::fs;
use std::path::Path;

use chemotax::run;

const PARAMS: &[&str] = &[
    "--D1", "1", "--D2", "1", "--chi", "4.5", "--ubar", "1", "--beta", "1", "--L",
    "3.141592653589793",
];

fn args<'a>(cmd: &'a str, out: &'a Path, extra: &[&'a str]) -> Vec<String> {
    let mut v = vec!["chemotax".to_string(), cmd.to_string()];
    v.extend(PARAMS.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v.push("--out".into());
    v.push(out.display().to_string());
    v
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn analyze_writes_mode_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args("analyze", dir.path(), &["--kmax", "10"])), 0);
    let text = fs::read_to_string(dir.path().join("analyze.csv")).unwrap();
    assert!(text.starts_with("# chemotax"));
    assert!(text.contains("# chi = 4.5"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "k,lambda_k,chi_k,Q_k,simple,trace,max_growth_at_chi");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 4.0);
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 6.25);
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() < 0.0));
    // χ = 4.5 > χ₁ = 4: mode 1 grows, mode 2 does not
    assert!(rows[0][6].parse::<f64>().unwrap() > 0.0);
    assert!(rows[1][6].parse::<f64>().unwrap() < 0.0);
}

#[test]
fn continue_writes_branch_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(args(
        "continue",
        dir.path(),
        &["--k", "1", "--chi-max", "20", "--N", "100", "--snapshots", "5"],
    ));
    assert_eq!(code, 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("branch.json")).unwrap()).unwrap();
    assert_eq!(json["terminated_by"], "ChiLimit");
    assert_eq!(json["max_chi"].as_f64().unwrap(), 20.0);
    let csv = fs::read_to_string(dir.path().join("branch.csv")).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), json["points"].as_array().unwrap().len());
    assert_eq!(rows[0].len(), 8);
    assert!(dir.path().join("state_chi_5.csv").exists());
}

#[test]
fn pitchfork_record_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(args("pitchfork", dir.path(), &[])), 0);
    let json: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("pitchfork.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(json["k2"].as_f64().unwrap(), 0.0);
    assert!((json["k3_fourier"].as_f64().unwrap() - 8.0).abs() < 1e-12);
    assert_eq!(json["stability"], "stable");
    assert_eq!(json["region"]["case"], "vi");
    let chart = fs::read_to_string(dir.path().join("sign_chart.csv")).unwrap();
    assert_eq!(data_rows(&chart).len(), 1600);
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let extra = ["--dt", "0.005", "--t-final", "1", "--seed", "9", "--N", "50"];
    assert_eq!(run(args("simulate", a.path(), &extra)), 0);
    assert_eq!(run(args("simulate", b.path(), &extra)), 0);
    for name in ["timeseries.csv", "final_state.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        // headers differ only in the output directory, which is not recorded
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn probe_reports_growth_for_unstable_branch() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = args(
        "simulate",
        dir.path(),
        &["--probe", "--dt", "0.01", "--t-final", "200", "--N", "100"],
    );
    // D1 = 0.1 has K3 < 0
    a[3] = "0.1".into();
    a[7] = "2.5".into();
    assert_eq!(run(a), 0);
    let text = fs::read_to_string(dir.path().join("probe.csv")).unwrap();
    assert!(text.contains("verdict = Grew"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# unit parameters\nD1 = 1\nD2 = 1\nchi = 4\nubar = 1\nbeta = 1\nL = 3.141592653589793\nN = 64\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let code = run([
        "chemotax",
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--chi",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(out.join("analyze.csv")).unwrap();
    assert!(text.contains("# chi = 5\n"));
    assert!(text.contains("# N = 64\n"));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(["chemotax", "frobnicate"]), 2);
    assert_eq!(run(["chemotax"]), 2);
    let mut a = args("analyze", dir.path(), &[]);
    a[3] = "-1".into();
    assert_eq!(run(a), 2);
    // missing required key
    assert_eq!(run(["chemotax", "analyze", "--D1", "1"]), 2);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "D1 = 1\nmystery = 3\n").unwrap();
    assert_eq!(run(["chemotax", "analyze", "--config", cfg.to_str().unwrap()]), 2);
    assert_eq!(run(["chemotax", "analyze", "--config", "/nonexistent/x.cfg"]), 2);
    // pitchfork needs linear kinetics
    assert_eq!(run(args("pitchfork", dir.path(), &["--kinetics", "custom"])), 2);
}

#[test]
fn numerical_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // far beyond the advection bound
    let mut a = args("simulate", dir.path(), &["--dt", "1", "--t-final", "2", "--eps", "0.3"]);
    a[7] = "50".into();
    let code = run(a);
    assert_eq!(code, 1);
}

#[test]
fn selftest_passes_at_defaults() {
    assert_eq!(run(["chemotax", "selftest"]), 0);
}

#[test]
fn sweep_writes_spike_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = args(
        "sweep",
        dir.path(),
        &["--N", "100", "--points", "4", "--chi-max", "3.5"],
    );
    a[3] = "0.5".into();
    assert_eq!(run(a), 0);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "chi,D1,peak_ratio,half_width,mass,tail_sup,step_flag");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[4].parse::<f64>().unwrap() <= std::f64::consts::PI * (1.0 + 1e-8));
        assert_eq!(r[6], "false");
    }
}
