use std::io::Write;
use std::process::{Command, Output, Stdio};

use psd_synth::cli::rational_from_json;
use psd_synth::fps::{rat, Rational};
use serde_json::Value;

fn psd(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_psd"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    if let Some(text) = stdin {
        child
            .stdin
            .take()
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
    }
    child.wait_with_output().unwrap()
}

fn coefficients(out: &Output) -> Vec<Rational> {
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v["c"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| rational_from_json(q).unwrap())
        .collect()
}

fn ints(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&n| rat(n, 1)).collect()
}

#[test]
fn quartic_u_table_as_json() {
    let out = psd(
        &[
            "x*(1+2*x)*(1+3*x)*(1+4*x)*(1+6*x)",
            "--order",
            "8",
            "--format",
            "json",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        coefficients(&out),
        ints(&[1, 1, 8, 96, 1379, 21937, 372724, 6631164])
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["routes"]["agree"], true);
    assert_eq!(v["c"][4]["n"], "1379");
    assert_eq!(v["c"][4]["d"], "1");
}

#[test]
fn cubic_without_the_sixth_factor() {
    let out = psd(
        &[
            "x*(1+2*x)*(1+3*x)*(1+4*x)",
            "--order",
            "8",
            "--format",
            "json",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        coefficients(&out),
        ints(&[1, 1, 5, 36, 306, 2861, 28457, 295616])
    );
}

#[test]
fn negative_control_exit_code() {
    let out = psd(&["2*x*(1-x)", "--order", "10", "--format", "json"], None);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"]["first_negative_index"], 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not the covariance"));
}

#[test]
fn poisson_oracle() {
    let out = psd(
        &["x", "--verify", "oracle", "--x", "1", "--format", "json"],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let o = &v["oracle"][0];
    assert_eq!(o["samples"], 1_000_000);
    assert_eq!(o["passed"], true);
    assert!((o["empirical_variance"].as_f64().unwrap() - 1.0).abs() < 0.01);
}

#[test]
fn oracle_is_reproducible_per_seed() {
    let run = |seed: &str| {
        let out = psd(
            &[
                "x*(1+x)",
                "--verify",
                "oracle",
                "--x",
                "1/2",
                "--samples",
                "5000",
                "--seed",
                seed,
                "--format",
                "json",
            ],
            None,
        );
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["oracle"][0]["empirical_variance"].as_f64().unwrap()
    };
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"));
}

#[test]
fn stdin_expression() {
    let out = psd(
        &["-", "--order", "7", "--format", "json"],
        Some("x/(1-x)\n"),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(coefficients(&out)[6], rat(733, 180));
}

#[test]
fn preset_with_scale() {
    let out = psd(
        &[
            "--preset",
            "sqrt-example",
            "--s-scale",
            "1/2",
            "--order",
            "7",
            "--format",
            "json",
        ],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(coefficients(&out)[4], rat(67, 24));
}

#[test]
fn transform_flags() {
    let out = psd(
        &["x*(1+x/2)*(1+x+x^2/2)", "--shift", "1", "--order", "8"],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("covariance: -1/4 + 1/4*x^4"), "{text}");
    assert!(text.contains("round trip: yes"));

    let out = psd(
        &[
            "x", "--power", "2", "--argpow", "2", "--order", "9", "--format", "json",
        ],
        None,
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["transform"]["covariance"], "2*x");
    // exp(2 y^2): 1, 0, 2, 0, 2, 0, 4/3, ...
    let omega: Vec<Rational> = v["transform"]["omega"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| rational_from_json(q).unwrap())
        .collect();
    assert_eq!(omega[4], rat(2, 1));
    assert_eq!(omega[6], rat(4, 3));
}

#[test]
fn usage_errors() {
    let out = psd(&["x*(1+x", "--order", "8"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1, column 7"));
    assert_eq!(psd(&["x", "--order", "1"], None).status.code(), Some(1));
    assert_eq!(
        psd(&["x", "--verify", "oracle", "--samples", "999"], None)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(psd(&["x", "--power", "0"], None).status.code(), Some(1));
    assert_eq!(psd(&["x", "--format", "yaml"], None).status.code(), Some(1));
    assert_eq!(psd(&[], None).status.code(), Some(1));
    assert_eq!(psd(&["x*(1-x)", "--x", "2"], None).status.code(), Some(1));
}

#[test]
fn text_report_lists_coefficients() {
    let out = psd(&["x*(1+x)^3", "--order", "7"], None);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("c_5 = 5861/120"));
    assert!(text.contains("sufficiency: passed"));
}
