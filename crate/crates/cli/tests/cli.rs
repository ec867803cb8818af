use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multiarm"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "[design]\nk = 2\ndelta_star = 0.5\neta = 0.95\nzeta = 0.9\nv = 1.0\n\
[[design.prior]]\nmu0 = 0.0\nq0 = 16.0\n[[design.prior]]\nmu0 = 0.0\nq0 = 4.0\n[[design.prior]]\nmu0 = 0.0\nq0 = 4.0\n";

#[test]
fn design_known_illustration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("illustration.toml");
    let o = run(&["design-known", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("design_known_report.txt")).unwrap();
    assert!(report.contains("(86, 68, 68)") && report.contains("total: 222"), "{report}");
    assert!(report.contains("(67, 55, 55)") && report.contains("total: 177"));
    // resolved config echoed, defaults included
    assert!(report.contains("delta_star = 0.5") && report.contains("n_draws = 1000000"), "{report}");
    let csv = fs::read_to_string(dir.path().join("design_known.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("design,total,n0,n1,n2,"));
    assert!(lines[1].starts_with("criterion 1,222,86,68,68,"));
    assert!(!csv.contains('\r'));
}

#[test]
fn csv_outputs_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("illustration.toml");
    for d in [&a, &b] {
        let o = run(
            &["boundary", "--config", cfg.to_str().unwrap(), "--seed", "7", "--format", "csv"],
            d.path(),
        );
        assert!(o.status.success());
    }
    for f in ["boundary_c1.csv", "boundary_c2.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    assert!(!a.path().join("boundary_report.txt").exists());
}

#[test]
fn boundary_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("illustration.toml");
    let o = run(&["boundary", "--config", cfg.to_str().unwrap(), "--criterion", "1"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("boundary_c1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# criterion=1"));
    assert_eq!(lines.next(), Some("boundary,delta11,delta12"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().any(|r| r[0] == "proceed") && rows.iter().any(|r| r[0] == "abandon"));
    // corner of the L-shaped proceed region
    let corner = rows
        .iter()
        .filter(|r| r[0] == "proceed")
        .map(|r| r[1].parse::<f64>().unwrap().min(r[2].parse().unwrap()))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((corner - 0.2537).abs() < 1e-3, "{corner}");
    assert!(!dir.path().join("boundary_c2.csv").exists());
}

#[test]
fn boundary_rejects_k_other_than_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("dose_study.toml");
    let o = run(&["boundary", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("per-coordinate"));
}

#[test]
fn reproduce_tables_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["reproduce-tables", "--format", "csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t2 = fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    let totals: Vec<&str> = t2.lines().skip(1).map(|l| l.rsplit(',').nth(4).unwrap()).collect();
    assert_eq!(totals, ["235", "204", "137"]);
    assert!(t2.lines().skip(1).all(|l| l.ends_with(",pass")));
    let t3 = fs::read_to_string(dir.path().join("table3.csv")).unwrap();
    assert_eq!(t3.lines().count(), 8);
    assert!(t3.lines().skip(1).all(|l| l.ends_with(",pass")), "{t3}");
}

#[test]
fn analyze_empty_data_returns_prior() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}[data]\n"));
    let o = run(&["analyze", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("analyze.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][3..5], ["0", "16"]);
    assert_eq!(rows[1][3..5], ["0", "4"]);
    let report = fs::read_to_string(dir.path().join("analyze_report.txt")).unwrap();
    assert!(report.contains("posterior equals the prior"));
}

#[test]
fn analyze_dose_study() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("dose_study.toml");
    let o = run(&["analyze", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let dec = fs::read_to_string(dir.path().join("analyze_decision.csv")).unwrap();
    assert!(dec.lines().nth(1).unwrap().ends_with(",Proceed,1 2 3 4"), "{dec}");
}

#[test]
fn dunnett_dose_study() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("dose_study.toml");
    let o = run(&["dunnett", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("dunnett.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("dunnett,235,47,47,47,47,47,"));
    let t = fs::read_to_string(dir.path().join("dunnett_test.csv")).unwrap();
    let max_row = t.lines().find(|l| l.contains(",true,")).unwrap();
    assert!(max_row.starts_with("4,"));
}

#[test]
fn design_unknown_needs_prior() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["design-unknown", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("precision_prior"));
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let both = write_config(dir.path(), &SMALL.replace("v = 1.0", "v = 1.0\nsd = 1.0"));
    let o = run(&["design-known", "--config", both.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let unknown = write_config(dir.path(), &format!("{SMALL}typo = 1\n"));
    let o = run(&["design-known", "--config", unknown.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo"));

    let bad = write_config(dir.path(), &SMALL.replace("eta = 0.95", "eta = 1.5"));
    let o = run(&["design-known", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["design-known"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
}

#[test]
fn numeric_failure_exits_three() {
    // zero spread in every arm gives a zero pooled sd
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}[dunnett]\nsigma = 1.0\n[[data.arm]]\nn = 2\nmean = 0.0\nsd = 0.0\n\
[[data.arm]]\nn = 2\nmean = 1.0\nsd = 0.0\n[[data.arm]]\nn = 2\nmean = 0.5\nsd = 0.0\n"
    );
    let cfg = write_config(dir.path(), &text);
    let o = run(&["dunnett", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
