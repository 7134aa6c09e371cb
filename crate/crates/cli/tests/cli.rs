use std::process::{Command, Output};

use serde_json::Value;

fn polyspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyspec"))
        .args(args)
        .env_remove("POLYSPEC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_series(dir: &tempfile::TempDir, values: &[f64]) -> String {
    let path = dir.path().join("x.csv");
    let body: String = values.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = polyspec(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_weight_label_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_series(&dir, &[1.0, 2.0, 0.5, -1.0]);
    let o = polyspec(&["estimate", "--input", &input, "--weight", "squiggle"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[E_"), "{}", stderr(&o));
}

#[test]
fn unknown_model_is_usage_error() {
    let o = polyspec(&["variance", "--weight", "cosprod", "--model", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_is_computation_error() {
    let o = polyspec(&["estimate", "--input", "/nonexistent/series.csv", "--weight", "cosprod"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E_INPUT]"), "{}", stderr(&o));
}

#[test]
fn estimate_lag_zero_is_sample_variance() {
    let dir = tempfile::tempdir().unwrap();
    let x = [1.0, -2.0, 0.5, 3.0, -1.5, 0.25, 2.0, -0.75];
    let input = write_series(&dir, &x);
    let o = polyspec(&["estimate", "--input", &input, "--weight", "lag:h=0", "--k", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema"], "polyspec/1");
    assert_eq!(v["t"], 8);
    let mean = x.iter().sum::<f64>() / 8.0;
    let gamma0 = x.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 8.0;
    let got = v["estimates"][0]["value"]["re"].as_f64().unwrap();
    assert!((got - gamma0).abs() < 1e-10, "{got} vs {gamma0}");
}

#[test]
fn simulate_is_deterministic_and_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = polyspec(&[
            "simulate", "--model", "ar2-exp", "--T", "50", "--replicates", "2", "--seed", "9", "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let sa = std::fs::read_to_string(&a).unwrap();
    assert_eq!(sa, std::fs::read_to_string(&b).unwrap());
    assert!(sa.starts_with("replicate,t,value\n"));
    assert_eq!(sa.lines().count(), 101);
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        let o = polyspec(&[
            "--threads", threads, "variance", "--weight", "cosprod", "--weight", "cone", "--model", "ar2-exp",
            "--grid-n", "32",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_str::<Value>(&stdout(&o)).unwrap()
    };
    let one = run("1");
    let four = run("4");
    let m1 = one["matrix"].as_array().unwrap();
    let m4 = four["matrix"].as_array().unwrap();
    for (r1, r4) in m1.iter().zip(m4) {
        for (a, b) in r1.as_array().unwrap().iter().zip(r4.as_array().unwrap()) {
            let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn variance_white_noise_lag_is_one() {
    let o = polyspec(&["variance", "--weight", "lag:h=2", "--k", "1", "--model", "wn-gauss", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-6, "{v}");
}

#[test]
fn partitions_dump_counts() {
    let o = polyspec(&["partitions", "dump", "--k", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["count"].as_u64().unwrap() as usize, v["schemes"].as_array().unwrap().len());
    for s in v["schemes"].as_array().unwrap() {
        let m = s["m"].as_u64().unwrap() as usize;
        assert_eq!(s["a"].as_array().unwrap().len(), m);
        assert_eq!(s["b"].as_array().unwrap().len(), m);
    }
}

#[test]
fn lintest_reports_statistic_and_pvalue() {
    let dir = tempfile::tempdir().unwrap();
    let sim = polyspec(&["simulate", "--model", "ar1:phi=0.4", "--T", "128", "--seed", "3"]);
    let values: Vec<f64> = stdout(&sim)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let input = write_series(&dir, &values);
    let o = polyspec(&["lintest", "--input", &input, "--model", "ar1:phi=0.4", "--M", "3", "--pvalue", "imhof"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let stat = v["statistic"].as_f64().unwrap();
    let p = v["pvalue"].as_f64().unwrap();
    assert!(stat >= 0.0);
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(v["terms"].as_array().unwrap().len(), 15);
}

#[test]
fn cluster_wide_panel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gdp.csv");
    let cents = dir.path().join("centroids.json");
    let mut body = String::from("id");
    for y in 0..40 {
        body.push_str(&format!(",{}", 1980 + y));
    }
    body.push('\n');
    for c in 0..6 {
        body.push_str(&format!("C{c}"));
        let mut level = 100.0;
        for y in 0..40 {
            level *= 1.0 + 0.01 * (((c * 7 + y * 3) % 11) as f64 - 5.0) / 5.0;
            body.push_str(&format!(",{level}"));
        }
        body.push('\n');
    }
    body.push_str("RAMP");
    for y in 0..40 {
        body.push_str(&format!(",{}", y + 1));
    }
    body.push('\n');
    std::fs::write(&path, body).unwrap();
    let o = polyspec(&[
        "cluster", "--input", path.to_str().unwrap(), "--k", "2", "--seed", "7", "--centroids",
        cents.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("RAMP"));
    let out = stdout(&o);
    assert!(out.starts_with("id,cluster\n"));
    assert_eq!(out.lines().count(), 7);
    let c: Value = serde_json::from_str(&std::fs::read_to_string(&cents).unwrap()).unwrap();
    assert_eq!(c["centroids"].as_array().unwrap().len(), 2);
    assert_eq!(c["features"].as_array().unwrap().len(), 12);
}
