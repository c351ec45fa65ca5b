use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adcollapse")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eval_dense_word() {
    let o = run(&["eval", "Q{C2,1} z . < 'a'(z) >", "--word", "..a.a"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "True");
    let o = run(&["eval", "Q{C2,1} z . < 'a'(z) >", "--word", "neutral=_; w={5:a}", "--horizon", "10"]);
    assert_eq!(stdout(&o).trim(), "false");
}

#[test]
fn tree_dump_defaults_to_reference_instance() {
    let o = run(&["tree-dump"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("t = 0"));
    assert!(out.contains("= 575"), "{out}");
}

#[test]
fn boundary_table_is_sorted() {
    let o = run(&["boundary", "Q{C3,g} z . < z < x, 'a'(z) >", "--word", "neutral=_; w={7:a,49:b}", "--assign", "x=10"]);
    assert!(o.status.success());
    let points: Vec<i64> = stdout(&o)
        .lines()
        .skip(2)
        .map(|l| l.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    assert!(points.windows(2).all(|p| p[0] < p[1]));
    assert!(points.contains(&10) && points.contains(&49));
}

#[test]
fn collapse_json_with_trace() {
    let o = run(&["--format", "json", "--trace", "collapse", "Q{C2,g} z . < 'a'(z) >"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["threshold"].as_u64().unwrap() >= 2);
    assert!(!v["trace"].as_array().unwrap().is_empty());
}

#[test]
fn pipeline_removes_addition() {
    let o = run(&["pipeline", "Q{C2,1} z . < 'a'(z) & z + z > z >", "--r", "4", "--max-exp", "10"]);
    assert!(o.status.success());
    let last = stdout(&o).lines().last().unwrap().to_string();
    assert!(!last.contains('+'), "{last}");
}

#[test]
fn equiv_exit_code_reflects_counterexamples() {
    let same = run(&["equiv", "Q{C2,g} z . < 'a'(z) >", "Q{C2,g} y . < 'a'(y) >", "--samples", "20"]);
    assert_eq!(same.status.code(), Some(0));
    let diff = run(&["equiv", "Q{C2,g} z . < 'a'(z) >", "Q{C2,1} z . < 'a'(z) >", "--samples", "20"]);
    assert_eq!(diff.status.code(), Some(1));
    assert!(stdout(&diff).contains("counterexample"));
}

#[test]
fn suite_and_invariance() {
    let o = run(&["suite", "separation", "--instances", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["--format", "json", "invariance", "Q{C2,g} x [!'_'(x)] . < 'a'(x) >", "--trials", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["counterexamples"].as_array().unwrap().len(), 0);
}

#[test]
fn monoid_file_is_loaded() {
    let dir = std::env::temp_dir().join(format!("adcollapse-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("Z2.json");
    std::fs::write(&path, r#"{"name":"Z2","elements":["e","s"],"identity":"e","table":[["e","s"],["s","e"]]}"#).unwrap();
    let o = run(&["--monoid-file", path.to_str().unwrap(), "eval", "Q{Z2,s} z . < 'a'(z) >", "--word", "a"]);
    assert_eq!(stdout(&o).trim(), "True", "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn errors_exit_with_two() {
    let o = run(&["eval", "Q{C2,1} z . <", "--word", "a"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["suite", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
