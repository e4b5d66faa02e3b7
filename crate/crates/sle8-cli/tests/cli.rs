use std::process::{Command, Output};

fn sle8(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sle8")).args(args).env_remove("SLE8_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn eval_one_link() {
    let o = sle8(&["eval", "--beta", "1-2", "--x", "0,1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], 1);
    assert!((v["F"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-10);
    assert_eq!(v["p"]["1-2"].as_f64().unwrap(), 1.0);
    // round trip
    let again: serde_json::Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v, again);
}

#[test]
fn eval_table_sums_to_one() {
    let o = sle8(&["eval", "--beta", "1-6,2-5,3-4", "--x", "0,1,2,3,4,5", "--format", "csv"]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let ps: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(ps.len(), 2);
    assert!((ps.iter().sum::<f64>() - 1.0).abs() < 1e-8);
}

#[test]
fn malformed_pattern_is_a_usage_error() {
    let o = sle8(&["eval", "--beta", "1-2,2-3", "--x", "0,1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("index 2 repeated"));
    let o = sle8(&["eval", "--beta", "1-2", "--x", "1,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_is_reproducible() {
    let args = ["sample", "--beta", "1-6,2-5,3-4", "--grid", "12x12", "--n", "500", "--seed", "3", "--threads", "2"];
    let a = sle8(&args);
    let b = sle8(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("alpha,count,freq,ci_lo,ci_hi,exact_p\n"));
    let total: u64 = csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()[1].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 500);
}

#[test]
fn verify_writes_json_and_exit_code() {
    let dir = std::env::temp_dir().join(format!("sle8-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("v.json");
    let o = sle8(&["verify", "--suite", "sum", "--N", "2", "--seed", "11", "--json", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["seed"], 11);
    assert_eq!(v["failed"], 0);
    assert_eq!(v["checks"].as_array().unwrap().len(), 2);
    assert_eq!(sle8(&["verify", "--suite", "bogus"]).status.code(), Some(2));
}

#[test]
fn map_and_loewner_outputs() {
    let o = sle8(&["map", "--beta", "1-4,2-3,5-6", "--x", "0,1,2,3,4,5", "--nx", "3", "--ny", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("z_re,z_im,phi_re,phi_im\n"));
    assert_eq!(text.lines().count(), 1 + 6);

    let args = ["loewner", "--beta", "1-4,2-3", "--x", "0,1,2,3", "--horizon", "0.005", "--seed", "9"];
    let a = sle8(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, sle8(&args).stdout);
    assert!(stdout(&a).starts_with("path,t,W,V1,V2,V3\n"));
}
