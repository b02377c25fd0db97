use std::path::PathBuf;
use std::process::{Command, Output};

fn figure(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../figures/{name}.dag"))
}

fn ptgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptgraph"))
        .args(args)
        .env_remove("PTGRAPH_COMPLETION_CAP")
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_figure2_as_json() {
    let out = ptgraph(&["analyze", figure("fig2").to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["overall"], "Rejected");
    assert_eq!(v["rejected_by"], serde_json::json!(["C2"]));
}

#[test]
fn analyze_text_names_the_obligation() {
    let out = ptgraph(&["analyze", figure("fig4").to_str().unwrap(), "--text"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("M = {U1}"), "{text}");
}

#[test]
fn minsets_on_the_split_listing() {
    let out = ptgraph(&["minsets", figure("fig3").to_str().unwrap(), "--outcome", "Y0"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["per_completion"].as_array().unwrap().len(), 25);
    assert_eq!(v["intersection"], serde_json::json!([["U1", "U3", "U4"]]));
}

#[test]
fn empty_file_is_a_parse_error() {
    let dir = std::env::temp_dir().join(format!("ptgraph-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("empty.dag");
    std::fs::write(&path, "").unwrap();
    let out = ptgraph(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"], "parse");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn missing_file_exits_one() {
    let out = ptgraph(&["fmt", "/nonexistent/graph.dag"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"], "io");
}

#[test]
fn cap_below_undirected_edge_count_is_semantic() {
    let out = ptgraph(&["analyze", figure("fig3").to_str().unwrap(), "--cap", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"], "semantic");
}

#[test]
fn environment_cap_applies_without_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_ptgraph"))
        .args(["completions", figure("fig4").to_str().unwrap()])
        .env("PTGRAPH_COMPLETION_CAP", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = ptgraph(&["completions", figure("fig4").to_str().unwrap()]);
    assert_eq!(json(&out).as_array().unwrap().len(), 3);
}

#[test]
fn swig_and_fmt_are_parseable() {
    for cmd in ["swig", "fmt"] {
        let out = ptgraph(&[cmd, figure("fig2").to_str().unwrap()]);
        assert!(out.status.success(), "{cmd}");
        let text = String::from_utf8(out.stdout).unwrap();
        ptgraph::dsl::parse(&text).unwrap_or_else(|e| panic!("{cmd}: {e}\n{text}"));
    }
}
