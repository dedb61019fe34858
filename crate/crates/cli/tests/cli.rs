use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn finsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsym"))
        .args(args)
        .env_remove("FINSYM_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

#[test]
fn classify_case_4() {
    let out = finsym(&["classify", "--eq", &data("case4.json"), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["case"], 4);
    assert_eq!(v["params"]["n"], 1);
    assert_eq!(v["basis"][1], "-t*d_t + x*d_x + 3*u*d_u");
}

#[test]
fn exact_case_6_residual() {
    let out = finsym(&["exact", "--eq", &data("case6.json"), "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["residual"].as_f64().unwrap() <= 1e-10);
    assert!(v["solution"]["u"].as_str().unwrap().contains("(x^2 + 1)^(-3/2)"));
}

#[test]
fn nonclassical_solution_from_params() {
    let out = finsym(&["exact", "--eq", &data("nonclassical.json"), "--kind", "nonclassical", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["solution"]["u"], "2*exp(t*x)");
}

#[test]
fn input_errors_exit_2() {
    for file in ["malformed.json", "unknown_key.json"] {
        let out = finsym(&["classify", "--eq", &data(file)]);
        assert_eq!(out.status.code(), Some(2), "{file}");
        assert!(out.stdout.is_empty());
    }
    assert_eq!(finsym(&["classify"]).status.code(), Some(2));
    assert_eq!(finsym(&["frobnicate"]).status.code(), Some(2));
    let out = finsym(&["transform", "--eq", &data("case6.json"), "--map", "6p0-to-5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verification_failure_exits_1() {
    let out = finsym(&["verify-symmetry", "--eq", &data("case4.json"), "--field", "0;0;u", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["holds"], false);
    let out = finsym(&["verify-symmetry", "--eq", &data("case4.json"), "--field=-t;x;3*u"]);
    assert_eq!(out.status.code(), Some(0));
    let out = finsym(&["residual", "--eq", &data("case4.json"), "--u", "x^2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reduce_and_conserve() {
    let out = finsym(&["reduce", "--eq", &data("case6.json"), "--case", "6", "--sub", "1", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["reduction"]["label"], "6.1");
    assert_eq!(v["verification"]["passed"], true);
    let out = finsym(&["reduce", "--eq", &data("case6.json"), "--case", "4", "--sub", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = finsym(&["conserve", "--eq", &data("case10.json"), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["laws"][1]["law"]["flux"], "-exp(-t)*u*u_x");
}

#[test]
fn transform_10_to_11() {
    let out = finsym(&["transform", "--eq", &data("case10_n2.json"), "--map", "10-to-11", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["matches"], true);
    assert_eq!(v["target"]["case"], 11);
}

#[test]
fn simulate_csv() {
    let out = finsym(&[
        "simulate", "--eq", &data("case4.json"), "--initial", "x^3/15", "--x-range", "1,2", "--nodes", "9",
        "--t-end", "0.01", "--left", "1/15", "--right", "8/15", "--store-every", "100000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,u"));
    assert_eq!(text.lines().count(), 1 + 2 * 9);
}

#[test]
fn output_is_deterministic_and_seed_env_is_read() {
    let args = ["classify", "--eq", &data("case6.json"), "--json"];
    assert_eq!(finsym(&args).stdout, finsym(&args).stdout);
    let with_env = Command::new(env!("CARGO_BIN_EXE_finsym"))
        .args(["verify-symmetry", "--eq", &data("case4.json"), "--field", "0;0;u", "--json"])
        .env("FINSYM_SEED", "7")
        .output()
        .unwrap();
    let explicit = finsym(&["verify-symmetry", "--eq", &data("case4.json"), "--field", "0;0;u", "--json", "--seed", "7"]);
    assert_eq!(with_env.stdout, explicit.stdout);
}
