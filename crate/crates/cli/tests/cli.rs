use std::process::{Command, Output};

fn ncrest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncrest"))
        .args(args)
        .output()
        .expect("failed to spawn ncrest")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn analyze_default_grid() {
    let out = ncrest(&["analyze"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,p,a_wonc,a_wnc,increase_percent"));
    assert_eq!(lines.count(), 4 * 19);
}

#[test]
fn analyze_single_point() {
    let out = ncrest(&["analyze", "--alpha", "0.3", "--p", "0.5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("176.470"), "{text}");
}

#[test]
fn analyze_rejects_certain_loss() {
    let out = ncrest(&["analyze", "--p", "1"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn analyze_rejects_bad_grid() {
    assert!(!ncrest(&["analyze", "--p", "0.1:x:0.2"]).status.success());
}

#[test]
fn trace_reports_responses_in_order() {
    let out = ncrest(&["trace"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let a = text.find("Response(2,4)").unwrap();
    let b = text.find("Response(3,4)").unwrap();
    let c = text.find("Response(4,4)").unwrap();
    assert!(a < b && b < c);
    assert!(text.contains("additional: 2"));
}

#[test]
fn simulate_lossless_needs_nothing_extra() {
    let out = ncrest(&["simulate", "--n", "10", "--p", "0", "--seeds", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // Three seeds plus a mean row, for each of the two modes.
    assert_eq!(rows.len(), 8);
    for row in rows {
        assert_eq!(row[6].parse::<f64>().unwrap(), 0.0, "{row:?}");
        assert_eq!(row[7].parse::<f64>().unwrap(), 10.0, "{row:?}");
    }
}

#[test]
fn simulate_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    let out = ncrest(&[
        "simulate",
        "--n",
        "20",
        "--p",
        "0.3",
        "--seeds",
        "2",
        "--mode",
        "nc",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("n,p,alpha,seed,mode,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn reproduce_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncrest(&["reproduce-fig5", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let all = std::fs::read_to_string(dir.path().join("fig5.csv")).unwrap();
    assert_eq!(all.lines().count(), 1 + 4 * 19);
    let row = all
        .lines()
        .find(|l| l.starts_with("0.3,0.9,"))
        .expect("row for alpha 0.3, p 0.9");
    assert!(row.contains("369.863"), "{row}");
    for alpha in ["0.3", "0.5", "0.7", "1"] {
        let f = std::fs::read_to_string(dir.path().join(format!("fig5_alpha_{alpha}.csv"))).unwrap();
        assert_eq!(f.lines().count(), 1 + 19);
    }
}
