use std::process::{Command, Output};

fn kpzcum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpzcum")).args(args).output().expect("spawn kpzcum")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Value column of the first CSV row whose first two fields match.
fn lookup(csv: &str, k: &str, method: &str) -> f64 {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0] == k && f.get(2) == Some(&method))
        .unwrap_or_else(|| panic!("no row {k},{method} in\n{csv}"))[1]
        .parse()
        .unwrap()
}

#[test]
fn equilibrium_line_value() {
    let o = kpzcum(&["cumulants", "--u", "0.6", "--v", "-0.6", "--L", "1"]);
    assert!(o.status.success());
    let c1 = lookup(&stdout(&o), "1", "continuation");
    assert!((c1 - (-1.0 / 24.0 + 0.18)).abs() < 1e-9, "{c1}");
}

#[test]
fn routes_agree_in_output() {
    let o = kpzcum(&["cumulants", "--u", "1", "--v", "1", "--L", "1", "--kmax", "3"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for k in ["1", "2", "3"] {
        let a = lookup(&s, k, "closed_form");
        let b = lookup(&s, k, "series");
        assert!((a - b).abs() < 1e-6, "k={k}: {a} {b}");
    }
    assert!(s.starts_with("# {"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["cumulants", "--u", "1", "--v", "1", "--L", "1", "--kmax", "0"][..],
        &["cumulants", "--u", "1", "--v", "1"],
        &["cumulants", "--u", "1", "--v", "1", "--L", "-1"],
        &["cumulants", "--u", "-1", "--v", "-1", "--L", "1"],
        &["nonsense"],
        &["mc", "--L", "1", "--samples", "10"],
    ] {
        let o = kpzcum(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn empty_rate_window_exits_3() {
    let o = kpzcum(&["rate", "--ut", "1", "--vt", "1", "--zeta-min", "5", "--zeta-max", "6"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn json_output_parses() {
    let o = kpzcum(&["largel", "--ut", "1", "--vt", "1", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["config"]["ut"], 1.0);
}

#[test]
fn deterministic_output() {
    let args = ["mc", "--L", "1", "--samples", "10000", "--steps", "1024", "--seed", "3"];
    let a = kpzcum(&args);
    let b = kpzcum(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = kpzcum(&["mc", "--L", "1", "--samples", "10000", "--steps", "1024", "--seed", "4"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn rate_scaled_is_convex() {
    let o = kpzcum(&["rate", "--ut", "1", "--vt", "1", "--zeta-steps", "21"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("# convex=true"), "{s}");
    assert!(s.lines().filter(|l| !l.starts_with('#')).count() > 10);
}

#[test]
fn out_flag_writes_file() {
    let path = std::env::temp_dir().join(format!("kpzcum-largel-{}.csv", std::process::id()));
    let o = kpzcum(&["largel", "--ut", "2", "--vt", "0", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.contains("k,c_tilde,phi_k,psi_k,method"));
}

#[test]
fn validate_detects_sabotage() {
    let o = kpzcum(&["validate", "--samples", "10000", "--steps", "1024", "--perturb-euler", "1e-3"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["all_pass"], false);
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"kk_diagonal"), "{failed:?}");
}
