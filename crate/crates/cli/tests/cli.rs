use std::process::Command;

fn hdflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hdflow"))
}

fn write(name: &str, text: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hdflow-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn spaces_on_three_points() {
    let out = hdflow().args(["spaces", "--p", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let s = &v["results"]["spaces"];
    assert_eq!(s["ambient"]["dim"], 4);
    assert_eq!(s["W_F"]["dim"], 0);
    assert_eq!(s["B"]["dim"], 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ambient 4, W_F 0, B 1"));
}

#[test]
fn flow_search_on_four_points() {
    let c = write(
        "four.json",
        r#"{"type":"rational","p":5,"marked":["0","1","inf","2"]}"#,
    );
    let out = hdflow().args(["flow", "--curve"]).arg(&c).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"]["flow"]["period"], 1);
}

#[test]
fn nodal_report_and_determinism() {
    let c = write(
        "td.json",
        r#"{"type":"td","g":2,"r":0,"edges":[[0,1],[0,1],[0,1]],"labels":["0","1","inf"]}"#,
    );
    let run = || {
        hdflow()
            .args(["nodal", "--p", "7", "--curve"])
            .arg(&c)
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["results"]["dims"]["F*T"]["computed"], 15);
    assert_eq!(v["results"]["ordinary"], true);
}

#[test]
fn malformed_input_reports_position() {
    let c = write("bad.json", "{\"type\": \"td\",\n  \"g\": 2 \"r\": 0}");
    let out = hdflow()
        .args(["nodal", "--curve"])
        .arg(&c)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column"));
}

#[test]
fn invalid_graph_and_usage_errors() {
    let c = write(
        "count.json",
        r#"{"type":"td","g":2,"r":0,"edges":[[0,1],[0,1]]}"#,
    );
    let out = hdflow()
        .args(["nodal", "--curve"])
        .arg(&c)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = hdflow().args(["spaces", "--p", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = hdflow().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_flow_on_three_points_fails_check() {
    // periodic only after a line bundle twist
    let out = hdflow()
        .args(["flow", "--p", "5", "--strict"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
