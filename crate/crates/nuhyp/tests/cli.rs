use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nuhyp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nuhyp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn indices(v: &Value) -> Vec<u64> {
    v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn pliss_times_of_short_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "a.csv", "2\n-1\n2\n");
    let v = json(&nuhyp(&["pliss", &f, "--c1", "0.5", "--c2", "1"]));
    assert_eq!(indices(&v["pliss_times"]), [1, 3]);
    assert!(v.get("oracle").is_none());
}

#[test]
fn periodic_constant_sequence_has_every_index_ultimate() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.csv", "value\n0.7\n0.7\n0.7\n0.7\n0.7\n");
    let v = json(&nuhyp(&["pliss", &f, "--periodic", "--verify"]));
    assert_eq!(indices(&v["ultimate_times"]), [1, 2, 3, 4, 5]);
    assert_eq!(v["oracle"], "match");
}

#[test]
fn verify_reports_oracle_match_on_random_input() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let text: String = (0..300).map(|_| format!("{}\n", rng.gen_range(-1.0..1.0))).collect();
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "r.csv", &text);
    for extra in [&[][..], &["--periodic"][..]] {
        let mut args = vec!["pliss", f.as_str(), "--c1", "0.1", "--verify"];
        args.extend_from_slice(extra);
        let v = json(&nuhyp(&args));
        assert_eq!(v["oracle"], "match");
    }
}

#[test]
fn malformed_csv_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.csv", "# a comment\n1.0\n2.x\n");
    let out = nuhyp(&["pliss", &f]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("2.x"), "{}", err);
}

#[test]
fn invalid_constants_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "a.csv", "1\n1\n");
    let out = nuhyp(&["pliss", &f, "--c1", "0.6", "--c2", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = nuhyp(&["experiment", "catmap", "--set", "hyperbolicity.gamma=2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("γ"));
}

#[test]
fn empty_saddle_list_gives_empty_partition() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "s.csv", "x,y,period\n");
    let v = json(&nuhyp(&["classes", "--system", "catmap", "--saddles", &f]));
    assert_eq!(v["saddles"].as_array().unwrap().len(), 0);
    assert_eq!(v["parent"].as_array().unwrap().len(), 0);
}

#[test]
fn cat_saddles_from_file_form_one_class() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "s.csv", "0,0,1\n0.5,0,3\n0.2,0.4,4\n");
    let v = json(&nuhyp(&["classes", "--system", "catmap", "--saddles", &f, "--arclength", "3"]));
    let parent = indices(&v["parent"]);
    assert_eq!(parent.len(), 3);
    assert!(parent.iter().all(|&p| p == parent[0]));
}

#[test]
fn non_returning_saddle_row_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "s.csv", "0,0,1\n0.3,0.1,1\n");
    let out = nuhyp(&["classes", "--system", "catmap", "--saddles", &f]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn blowup_fixed_points_stay_apart() {
    let v = json(&nuhyp(&["classes", "--system", "blowup", "--arclength", "5"]));
    let parent = indices(&v["parent"]);
    assert_eq!(parent, [0, 1]);
    assert!(v["unrelated"][0][1].get("NotFoundWithinBudget").is_some());
}

#[test]
fn exponents_of_periodic_orbit_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "o.json",
        r#"{"points": [[0.0, 0.0]], "jacobians": [[[2.0, 1.0], [1.0, 1.0]]], "period": 1}"#,
    );
    let v = json(&nuhyp(&["exponents", &f]));
    let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let e: Vec<f64> = v["exponents"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((e[0] + l).abs() < 1e-12 && (e[1] - l).abs() < 1e-12, "{:?}", e);
}

#[test]
fn measure_distance_between_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "weight,x,y\n1,0.25,0.5\n");
    let b = write(dir.path(), "b.csv", "weight,x,y\n0.5,0.25,0.5\n0.5,1.25,0.5\n");
    let c = write(dir.path(), "c.csv", "weight,x,y\n1,0.75,0.5\n");
    let same = json(&nuhyp(&["measure-dist", &a, &b]));
    assert_eq!(same["distance"].as_f64().unwrap(), 0.0);
    let apart = json(&nuhyp(&["measure-dist", &a, &c, "--truncation", "5"]));
    assert!(apart["distance"].as_f64().unwrap() > 0.0);
    assert_eq!(apart["truncation"], 5);
}

#[test]
fn experiment_summaries_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = nuhyp(&[
            "experiment",
            "catmap",
            "--set",
            "catmap.max_q=12",
            "--set",
            "catmap.classes_max_q=3",
            "-o",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        assert!(String::from_utf8_lossy(&out.stdout).contains("PASS exponents_match_log_lambda"));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["catmap_summary.json", "catmap_exponents.csv", "catmap_classes.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{}", name);
    }
    let csv = fs::read_to_string(a.join("catmap_exponents.csv")).unwrap();
    assert!(csv.contains("# exponent_threshold: ") && csv.contains("max_exponent_error [1/iterate]"));
    let config = fs::read_to_string(a.join("catmap_config.toml")).unwrap();
    assert!(config.contains("max_q = 12"));
}

#[test]
fn failing_check_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = nuhyp(&[
        "experiment",
        "catmap",
        "--set",
        "catmap.max_q=4",
        "--set",
        "catmap.classes_max_q=2",
        "--set",
        "thresholds.exponent_abs=0",
        "--set",
        "thresholds.angle_abs=0",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL crossing_angles_match_eigendirections"));
}
