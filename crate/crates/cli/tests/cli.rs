use std::io::Write;
use std::process::{Command, Output};

use ifs_cuntz::io::measure_from_json;
use ifs_cuntz::rational::rat;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifs-cuntz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn hutchinson_emits_round_trippable_measure_json() {
    let out = run(&["hutchinson", "--system", "dyadic", "--weights", "1/2,1/2", "--depth", "3"]);
    assert!(out.status.success());
    let m = measure_from_json(&stdout(&out)).unwrap();
    assert_eq!(m.depth(), 3);
    for (_, mass) in m.cylinder_part().masses() {
        assert_eq!(*mass, rat(1, 8));
    }
}

#[test]
fn hutchinson_iterate_reports_trace() {
    let out = run(&[
        "hutchinson", "--system", "cantor", "--weights", "1/3,2/3", "--depth", "4", "--iterate",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["schema"], "ifs-cuntz/v1");
    let trace = doc["trace"].as_array().unwrap();
    assert!(!trace.is_empty() && trace.len() <= 50);
    assert_eq!(trace.last().unwrap(), "0/1");
    measure_from_json(&doc["measure"].to_string()).unwrap();
}

#[test]
fn invalid_weights_exit_2_with_error_json() {
    let out = run(&["hutchinson", "--weights", "2,-1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["code"], 2);
    assert!(err["error"]
        .as_str()
        .unwrap()
        .contains("weights must be positive and sum to 1"));
}

#[test]
fn verify_full_cover_passes() {
    let out = run(&["verify", "--system", "cantor", "--depth", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["ok"], true);
    assert!(doc["checks"].as_array().unwrap().len() > 10);
}

#[test]
fn verify_branch_deleted_fails_on_completeness() {
    let out = run(&["verify", "--system", "dyadic", "--branches", "1", "--depth", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["ok"], false);
    assert_eq!(doc["worst"]["relation"], "sum S_i S_i*");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sum S_i S_i*"), "stderr: {stderr}");
}

#[test]
fn verify_torus_rep_with_covariance_passes() {
    let out = run(&["verify", "--rep", "torus", "--covariance", "--depth", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let checks = doc["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["relation"]
        .as_str()
        .unwrap()
        .starts_with("covariance")));
    assert!(checks.iter().any(|c| c["relation"] == "W isometry defect"));
}

#[test]
fn extract_basis_vector_flags_the_atom() {
    let out = run(&["extract", "--rep", "torus", "--vector", "0:1", "--depth", "6"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["total_mass"], "1/1");
    let atoms = doc["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert_eq!(atoms[0]["word"], "000000");
    assert_eq!(atoms[0]["interval"][0], "0/1");
    measure_from_json(&doc["measure"].to_string()).unwrap();
}

#[test]
fn extract_reads_vector_files_and_rejects_malformed_ones() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    writeln!(std::fs::File::create(&good).unwrap(), "index,re,im\n1,1,0").unwrap();
    let out = run(&["extract", "--rep", "torus", "--vector-file", good.to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["atoms"][0]["interval"][0], "1/2");

    let bad = dir.path().join("bad.csv");
    writeln!(std::fs::File::create(&bad).unwrap(), "one,two,three,four").unwrap();
    let out = run(&["extract", "--rep", "torus", "--vector-file", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn chaos_is_reproducible_and_reports_bounds() {
    let args = [
        "chaos", "--system", "dyadic", "--weights", "1/2,1/2", "--samples", "2000", "--seed",
        "9", "--depth", "2",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(stdout(&first), stdout(&second));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&first)).unwrap();
    assert!(doc["max_abs_deviation"].as_f64().unwrap() >= 0.0);
    assert_eq!(doc["cells"].as_array().unwrap().len(), 4);
}

#[test]
fn chaos_single_sample_is_a_unit_mass() {
    let out = run(&[
        "chaos", "--system", "dyadic", "--weights", "1/2,1/2", "--samples", "1", "--seed", "3",
        "--depth", "3",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let unit: Vec<&serde_json::Value> = doc["cells"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["empirical"] == "1/1")
        .collect();
    assert_eq!(unit.len(), 1);
}

#[test]
fn apply_inverts_its_own_isometry() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("phi.csv");
    writeln!(
        std::fs::File::create(&table).unwrap(),
        "word,re,im\n00,1,0\n01,2,0\n10,3,0\n11,4,0"
    )
    .unwrap();
    let out = run(&[
        "apply", "--system", "dyadic", "--ops", "2*,2",
        "--vector-file", table.to_str().unwrap(), "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    for line in ["00,1,0", "01,2,0", "10,3,0", "11,4,0"] {
        assert!(text.contains(line), "missing {line} in {text}");
    }
}

#[test]
fn apply_scales_by_sqrt_2_on_dyadic_lebesgue() {
    let out = run(&[
        "apply", "--system", "dyadic", "--ops", "1", "--vector", "0:1", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains(&format!("00,{},0", 2.0f64.sqrt())), "{text}");
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("masses.json");
    let out = run(&[
        "hutchinson", "--system", "dyadic", "--weights", "1/4,3/4", "--depth", "2",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let m = measure_from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(m.cylinder_mass(&ifs_cuntz::Word::finite(m.alphabet(), &[2, 2]).unwrap()).unwrap(), rat(9, 16));
}
