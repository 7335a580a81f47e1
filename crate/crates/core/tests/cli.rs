use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mdapprox::measures::{measure_coprime_exact, measure_mc, SetDescriptor, Variant};
use mdapprox::psi::PsiSpec;
use mdapprox::series::{partial_sum, CriterionKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdapprox"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("-o").arg(out).output().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn measure_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = run(
        &["measure", "--variant", "coprime", "--q", "4", "--psi", "const:0.125", "--k", "2", "--seed", "7"],
        &out,
    );
    assert!(o.status.success());
    let row = &rows(&out)[0];
    let exact = measure_coprime_exact(4, 0.125f64).unwrap();
    assert_eq!(row[5], exact.value.to_string());
    let desc = SetDescriptor::new(4, 0.125f64, Variant::Coprime, 2).unwrap();
    let mc = measure_mc(&desc, 1_000_000, 7).unwrap();
    assert_eq!(row[8], mc.value.to_string());
    assert_eq!(row[9], mc.error_bound.to_string());
}

#[test]
fn geometry_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    assert!(run(&["geometry", "--q", "4"], &out).status.success());
    assert_eq!(rows(&out).len(), 16);
    assert!(run(&["geometry", "--q", "4", "--coprime"], &out).status.success());
    let centres: Vec<(String, String)> = rows(&out).into_iter().map(|r| (r[3].clone(), r[4].clone())).collect();
    let want: Vec<(String, String)> = [("0.25", "0.25"), ("0.25", "0.75"), ("0.75", "0.25"), ("0.75", "0.75")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(centres, want);
}

#[test]
fn series_trace_monotone_and_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&["series", "--kind", "main", "--psi", "eps_over_q:0.1", "--k", "2", "--Q", "100000"], &out);
    assert!(o.status.success());
    let sums: Vec<f64> = rows(&out).iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(sums.windows(2).all(|w| w[0] <= w[1]));
    let lib = partial_sum(CriterionKind::Main, &PsiSpec::parse("eps_over_q:0.1").unwrap(), 2, 100_000, &[]).unwrap();
    let mut buf = Vec::new();
    lib.write_csv(&mut buf).unwrap();
    assert_eq!(fs::read(&out).unwrap(), buf);
}

#[test]
fn help_shows_grammar() {
    let o = bin().arg("--help").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for needle in ["PSI EXPRESSIONS", "restrict:<support>;<psi>", "powlog:t=", "totient_le", "--config"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    for args in [
        vec!["measure", "--q", "4", "--psi", "const:0.1", "--bogus"],
        vec!["measure", "--q", "4", "--psi", "nonsense"],
        vec!["measure", "--psi", "const:0.1"],
        vec!["series", "--psi", "const:0.1"],
    ] {
        let o = run(&args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert!(!out.exists());
}

#[test]
fn computation_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(
        &["measure", "--q", "30", "--psi", "const:0.01", "--k", "3", "--tol", "1e-300", "--mc-samples", "0"],
        &out,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kind=budget-exceeded"));
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "command=series\npsi=const:0.1\nQ=64\nkind=km\n").unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(bin().arg("--config").arg(&cfg).arg("-o").arg(&a).status().unwrap().success());
    assert!(bin()
        .args(["series", "--kind", "main", "--config"])
        .arg(&cfg)
        .arg("-o")
        .arg(&b)
        .status()
        .unwrap()
        .success());
    assert!(rows(&a).iter().all(|r| r[0] == "km"));
    assert!(rows(&b).iter().all(|r| r[0] == "main"));
    assert_eq!(rows(&a).last().unwrap()[2], "64");
}

#[test]
fn experiment_report_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.report.txt");
    let b = dir.path().join("b.report.txt");
    let args = ["experiment", "--psi", "eps_over_q:0.3", "--Q", "3000", "--n-alphas", "12", "--seed", "5"];
    assert!(bin().args(args).arg("-o").arg(&a).env("MDAPPROX_THREADS", "1").status().unwrap().success());
    assert!(bin().args(args).args(["--threads", "3"]).arg("-o").arg(&b).status().unwrap().success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("schema=1\n"));
    assert!(text.contains("\n[checkpoints]\n"));
}

#[test]
fn count_and_correlate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let third = (1.0f64 / 3.0).to_string();
    assert!(run(&["count", "--alpha", &third, "--psi", "const:0", "--Q", "10"], &out).status.success());
    assert_eq!(rows(&out)[0][1], "1");
    assert_eq!(rows(&out)[0][3], "3");
    let o = run(&["correlate", "--psi", "const:0.01", "--q", "30", "--r", "42", "--format", "report"], &out);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("q,r,D_bar,A_cut,P_product,correlation,product_of_means,ratio"));
    assert!(text.contains("refinement_bias="));
}
