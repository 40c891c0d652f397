use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_profinite"));
    c.env_remove("PROFINITE_DEPTH");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.push("--json");
    let out = run(&a);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    v["result"].clone()
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn group_info_lists_subgroups() {
    let v = json(&["group", "info", "--group", "sym:3"]);
    assert_eq!(v["subgroups"].as_array().unwrap().len(), 6);
    assert_eq!(v["classes"].as_array().unwrap().len(), 4);
    let t = json(&["group", "info", "--group", "cyclic:1"]);
    assert_eq!(t["order"], 1);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["group", "info", "--group", "bogus:3"]).status.code(), Some(2));
    assert_eq!(run(&["burnside", "marks"]).status.code(), Some(2));
    assert_eq!(run(&["cb", "rank", "--tower", "pro_p:2", "--depth", "40"]).status.code(), Some(3));
    assert_eq!(run(&["homdim", "certify", "--setup", "spzp:4"]).status.code(), Some(2));
    assert_eq!(run(&["sheaf", "ext", "--base", "spzp", "--E", "nope", "--F", "const:Q"]).status.code(), Some(2));
}

#[test]
fn marks_tsv() {
    let out = run(&["burnside", "marks", "--group", "cyclic:2", "--tsv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().filter(|l| !l.starts_with('#')).map(|l| l.split('\t').skip(1).collect()).collect();
    assert_eq!(rows, vec![vec!["1", "1"], vec!["2", "0"]]);
    let trivial = json(&["burnside", "marks", "--group", "trivial"]);
    assert_eq!(trivial["marks"], serde_json::json!([[1]]));
}

#[test]
fn depth_from_environment() {
    let out = bin().args(["cb", "rank", "--tower", "pro_p:3", "--json"]).env("PROFINITE_DEPTH", "2").output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["depth"], 2);
    let d0 = json(&["cb", "rank", "--tower", "pro_p:2", "--depth", "0"]);
    assert_eq!(d0["verdict"]["interval"]["lo"], 0);
}

#[test]
fn span_compose_from_file() {
    let basis = json(&["span", "basis", "--group", "cyclic:2", "--from", "0", "--to", "0"]);
    let spans = basis["spans"].as_array().unwrap();
    assert_eq!(spans.len(), 2);
    // [C2/e]^2 = 2[C2/e]: the free orbit composed with itself over a point.
    let free = json(&["span", "basis", "--group", "cyclic:2", "--from", "1", "--to", "1"]);
    let free_span = free["spans"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["apex"]["size"] == 2)
        .unwrap()
        .clone();
    let body = serde_json::json!({"group": "cyclic:2", "first": free_span, "second": free_span});
    let p = scratch("free_square.json", &body.to_string());
    let v = json(&["span", "compose", "--file", p.to_str().unwrap(), "--verify"]);
    assert_eq!(v["verify"]["passed"], true);
    assert_eq!(v["canonical"].as_array().unwrap().len(), 2);
    assert_eq!(v["span"]["apex"]["size"], 4);
}

#[test]
fn certificates_reload_from_files() {
    let out = run(&["homdim", "certify", "--setup", "spzp-weyl", "--json"]);
    let p = scratch("cert.json", &String::from_utf8(out.stdout).unwrap());
    let v = json(&["homdim", "verify", "--file", p.to_str().unwrap()]);
    assert_eq!(v["verify"]["passed"], true);

    let mut cert: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    cert["result"]["upper"] = serde_json::json!(0);
    let bad = scratch("cert_bad.json", &cert.to_string());
    assert_eq!(run(&["homdim", "verify", "--file", bad.to_str().unwrap()]).status.code(), Some(1));

    let out = run(&["sheaf", "godement", "--base", "spzp", "--sheaf", "const:Q", "--stages", "3", "--json"]);
    let p = scratch("res.json", &String::from_utf8(out.stdout).unwrap());
    let v = json(&["sheaf", "verify", "--file", p.to_str().unwrap()]);
    assert_eq!(v["verify"]["passed"], true);

    let out = run(&["sheaf", "extension", "--base", "spzp", "--quotient", "sky:omega", "--sub", "const:Q", "--json"]);
    let p = scratch("ext.json", &String::from_utf8(out.stdout).unwrap());
    let v = json(&["sheaf", "verify", "--file", p.to_str().unwrap()]);
    assert_eq!(v["verify"]["passed"], true);
}

#[test]
fn mackey_commands() {
    let e = json(&["mackey", "ext", "--group", "sym:3", "--M", "burnside", "--N", "fixedpoint:sign", "--degree", "1"]);
    assert_eq!(e["dimension"], 0);
    let a = json(&["mackey", "audit", "--group", "sym:3"]);
    assert_eq!(a["ext1"]["nonzero_ext1"].as_array().unwrap().len(), 0);
    assert_eq!(a["yoneda"]["mismatches"].as_array().unwrap().len(), 0);
    let r = json(&["mackey", "resolve", "--group", "cyclic:2", "--M", "representable:0"]);
    assert_eq!(r["terminated"], true);
}

#[test]
fn sheaf_commands() {
    let e = json(&["sheaf", "ext", "--base", "spzp", "--E", "sky:omega", "--F", "const:Q", "--degree", "1"]);
    assert_eq!(e["value"]["kind"], "lower_bound_positive");
    let h = json(&["sheaf", "hom", "--base", "spzp", "--E", "const:Q", "--F", "const:Q"]);
    assert!(h["dimension"].as_u64().unwrap() >= 1);
    let w = json(&["sheaf", "weyl", "--base", "spzp:3", "--sheaf", "random:5"]);
    assert_eq!(w["holds"], true);
    let p = json(&["sheaf", "parity", "--base", "spzp", "--sheaf", "const:Q"]);
    assert_eq!(p["witness"]["nonzero_in_cokernel"], true);
}

#[test]
fn same_bytes_across_thread_counts() {
    let args = ["mackey", "phi", "--group", "sym:3", "--seed", "9", "--json"];
    let one = bin().args(args).args(["--threads", "1"]).output().unwrap().stdout;
    let four = bin().args(args).args(["--threads", "4"]).output().unwrap().stdout;
    assert!(!one.is_empty());
    assert_eq!(one, four);
}
