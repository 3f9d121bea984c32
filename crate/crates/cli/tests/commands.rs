use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const TWO_COHORT: &str = r#"
v_good = 8.0
v_bad = -4.0
prior = 0.75
rate_good = 1.0
rate_bad = 2.0
cohorts = [{ discount = 2.0, mass = 1.0 }, { discount = 1.0, mass = 1.0 }]
"#;

const SINGLE_COHORT: &str = r#"
v_good = 8.0
v_bad = -4.0
prior = 0.75
rate_good = 1.0
rate_bad = 1.0
cohorts = [{ discount = 1.0, mass = 1.0 }]
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn adoption(args: &[&str], market: &Path, out: &Path) -> i32 {
    let output = Command::new(env!("CARGO_BIN_EXE_adoption"))
        .args(args)
        .arg("--market")
        .arg(market)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    output.status.code().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn optimal_policy_file_feeds_equilibrium() {
    let ws = Workspace::new();
    let market = ws.file("market.toml", TWO_COHORT);
    let first = ws.out("optimal");
    assert_eq!(adoption(&["optimal"], &market, &first), 0);
    let policy = first.join("policy.toml");
    let second = ws.out("equilibrium");
    assert_eq!(adoption(&["equilibrium", "--policy", policy.to_str().unwrap()], &market, &second), 0);
    assert_eq!(read(&first, "path.csv"), read(&second, "path.csv"));
    assert!(read(&first, "report.txt").contains("0.0797537006225"));
}

#[test]
fn path_tables_share_a_header() {
    let ws = Workspace::new();
    let market = ws.file("market.toml", TWO_COHORT);
    let headers: Vec<String> = ["benchmark", "optimal"]
        .iter()
        .map(|cmd| {
            let out = ws.out(cmd);
            assert_eq!(adoption(&[cmd], &market, &out), 0);
            read(&out, "path.csv").lines().next().unwrap().to_owned()
        })
        .collect();
    assert_eq!(headers[0], "t,q,z_good,z_bad,x,phase_index");
    assert_eq!(headers[0], headers[1]);
}

#[test]
fn configuration_errors_exit_with_two() {
    let ws = Workspace::new();
    let bad = ws.file("bad.toml", &TWO_COHORT.replace("prior = 0.75", "prior = 1.5"));
    assert_eq!(adoption(&["benchmark"], &bad, &ws.out("a")), 2);
    let market = ws.file("market.toml", TWO_COHORT);
    assert_eq!(adoption(&["simulate"], &market, &ws.out("b")), 2);
    assert_eq!(adoption(&["benchmark"], &ws.out("missing.toml"), &ws.out("c")), 2);
}

#[test]
fn verify_passes_on_a_single_cohort_market() {
    let ws = Workspace::new();
    let market = ws.file("market.toml", SINGLE_COHORT);
    let out = ws.out("verify");
    assert_eq!(adoption(&["verify", "--n-paths", "20000"], &market, &out), 0);
    let checks = read(&out, "checks.csv");
    assert!(checks.lines().count() > 5);
    assert!(checks.contains("homogeneous_neutrality"));
}

#[test]
fn simulate_reports_an_estimate() {
    let ws = Workspace::new();
    let market = ws.file("market.toml", TWO_COHORT);
    let policy = ws.file("policy.toml", "good = \"transparent\"\nbad = \"transparent\"\n");
    let out = ws.out("simulate");
    let code = adoption(&["simulate", "--policy", policy.to_str().unwrap(), "--n-paths", "5000"], &market, &out);
    assert_eq!(code, 0);
    assert!(read(&out, "report.txt").contains("10.41"));
}
